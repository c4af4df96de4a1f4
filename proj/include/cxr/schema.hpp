#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cxr/errors.hpp"

namespace cxr {

/// Which tier of the pipeline a label set belongs to.
enum class SchemaStage { multiclass4, stage1_binary, stage2_disease };

inline const char* to_string(SchemaStage s) {
  switch (s) {
    case SchemaStage::multiclass4: return "multiclass4";
    case SchemaStage::stage1_binary: return "stage1_binary";
    case SchemaStage::stage2_disease: return "stage2_disease";
  }
  return "?";
}

inline SchemaStage schema_stage_from_string(const std::string& s) {
  if (s == "multiclass4") return SchemaStage::multiclass4;
  if (s == "stage1_binary") return SchemaStage::stage1_binary;
  if (s == "stage2_disease") return SchemaStage::stage2_disease;
  throw ParseFailure("unknown schema stage: " + s);
}

inline const std::string kNormalClass = "normal";
inline const std::string kDiseaseClass = "disease";

/// An ordered set of class names plus the pipeline tier it serves.
///
/// `classes()` keeps declaration order (it drives deterministic tie-breaking,
/// e.g. which disease classes absorb a remainder). Integer label encoding is
/// always alphabetical, independent of declaration order — see encode_labels.
class LabelSchema {
 public:
  LabelSchema(SchemaStage stage, std::vector<std::string> classes)
      : stage_(stage), classes_(std::move(classes)) {
    validate();
    encoded_ = classes_;
    std::sort(encoded_.begin(), encoded_.end());
  }

  static LabelSchema multiclass4(std::vector<std::string> classes = {"covid", kNormalClass,
                                                                     "opacity", "pneumonia"}) {
    return LabelSchema(SchemaStage::multiclass4, std::move(classes));
  }

  static LabelSchema stage1_binary() {
    return LabelSchema(SchemaStage::stage1_binary, {kNormalClass, kDiseaseClass});
  }

  static LabelSchema stage2_disease(std::vector<std::string> classes = {"covid", "opacity",
                                                                        "pneumonia"}) {
    return LabelSchema(SchemaStage::stage2_disease, std::move(classes));
  }

  SchemaStage stage() const { return stage_; }
  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t size() const { return classes_.size(); }

  /// Class names in encoding (alphabetical) order.
  const std::vector<std::string>& encoded_order() const { return encoded_; }

  /// Alphabetical index of a class name. Throws UnknownLabel.
  int index_of(const std::string& name) const {
    auto it = std::lower_bound(encoded_.begin(), encoded_.end(), name);
    if (it == encoded_.end() || *it != name)
      throw UnknownLabel("label not in schema: " + name);
    return static_cast<int>(it - encoded_.begin());
  }

  bool contains(const std::string& name) const {
    return std::binary_search(encoded_.begin(), encoded_.end(), name);
  }

  bool operator==(const LabelSchema& other) const {
    return stage_ == other.stage_ && classes_ == other.classes_;
  }
  bool operator!=(const LabelSchema& other) const { return !(*this == other); }

 private:
  void validate() const {
    std::set<std::string> seen;
    for (const auto& c : classes_) {
      if (c.empty()) throw ConfigInvalid("schema contains an empty class name");
      if (!seen.insert(c).second) throw ConfigInvalid("duplicate class name in schema: " + c);
    }
    const std::size_t expected = stage_ == SchemaStage::multiclass4    ? 4
                                 : stage_ == SchemaStage::stage1_binary ? 2
                                                                        : 3;
    if (classes_.size() != expected) {
      throw ConfigInvalid(std::string("schema stage ") + to_string(stage_) + " requires " +
                          std::to_string(expected) + " classes, got " +
                          std::to_string(classes_.size()));
    }
    if (stage_ == SchemaStage::stage1_binary &&
        (!seen.count(kNormalClass) || !seen.count(kDiseaseClass))) {
      throw ConfigInvalid("stage1 schema must be {normal, disease}");
    }
  }

  SchemaStage stage_;
  std::vector<std::string> classes_;
  std::vector<std::string> encoded_;
};

/// Bijective class-name -> integer mapping; index is the position in the
/// alphabetically sorted class list, so it is stable across runs regardless
/// of declaration order.
inline std::map<std::string, int> encode_labels(const LabelSchema& schema) {
  std::map<std::string, int> mapping;
  const auto& order = schema.encoded_order();
  for (std::size_t i = 0; i < order.size(); ++i) mapping[order[i]] = static_cast<int>(i);
  return mapping;
}

}  // namespace cxr
