#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cxr/csv.hpp"
#include "cxr/errors.hpp"
#include "cxr/schema.hpp"

namespace cxr {

struct Sample {
  std::string id;        // stable unique identifier (relative path when scanned)
  std::string filepath;  // where to load pixels from
  std::string label;     // class name under the manifest schema
  std::string orig_label;  // original 4-class label when relabeled (stage1); else empty
};

/// Immutable index of (path, label) rows under one label schema. All sampling,
/// splitting and fold construction operate on manifests, never on directories.
class DatasetManifest {
 public:
  DatasetManifest(LabelSchema schema, std::vector<Sample> samples)
      : schema_(std::move(schema)), samples_(std::move(samples)) {
    std::set<std::string> ids;
    for (const auto& s : samples_) {
      if (!schema_.contains(s.label))
        throw UnknownLabel("sample '" + s.id + "' has label '" + s.label +
                           "' not in the manifest schema");
      if (!ids.insert(s.id).second)
        throw ConfigInvalid("duplicate sample id in manifest: " + s.id);
    }
  }

  const LabelSchema& schema() const { return schema_; }
  const std::vector<Sample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  /// Per-class sample counts, keyed by class name (all schema classes present).
  std::map<std::string, std::size_t> class_counts() const {
    std::map<std::string, std::size_t> counts;
    for (const auto& c : schema_.classes()) counts[c] = 0;
    for (const auto& s : samples_) ++counts[s.label];
    return counts;
  }

  /// Indices of samples with the given label, in manifest order.
  std::vector<std::size_t> indices_of(const std::string& label) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < samples_.size(); ++i)
      if (samples_[i].label == label) idx.push_back(i);
    return idx;
  }

  /// New manifest with the given rows, in the given order.
  DatasetManifest subset(std::span<const std::size_t> indices) const {
    std::vector<Sample> rows;
    rows.reserve(indices.size());
    for (std::size_t i : indices) rows.push_back(samples_.at(i));
    return DatasetManifest(schema_, std::move(rows));
  }

  std::set<std::string> id_set() const {
    std::set<std::string> ids;
    for (const auto& s : samples_) ids.insert(s.id);
    return ids;
  }

  /// CSV with header `id,filepath,label`; an `orig_label` column is appended
  /// only when any sample carries one (relabeled stage1 manifests).
  void save_csv(const std::filesystem::path& path) const {
    bool with_orig = false;
    for (const auto& s : samples_)
      if (!s.orig_label.empty()) with_orig = true;
    std::vector<std::string> header = {"id", "filepath", "label"};
    if (with_orig) header.push_back("orig_label");
    std::vector<std::vector<std::string>> rows;
    rows.reserve(samples_.size());
    for (const auto& s : samples_) {
      std::vector<std::string> row = {s.id, s.filepath, s.label};
      if (with_orig) row.push_back(s.orig_label);
      rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
  }

  static DatasetManifest load_csv(const std::filesystem::path& path, const LabelSchema& schema) {
    return DatasetManifest(schema, read_samples(path));
  }

  /// Loads a manifest and infers the schema from the distinct labels present:
  /// 4 classes -> multiclass4, 3 -> stage2_disease, 2 -> stage1_binary.
  static DatasetManifest load_csv(const std::filesystem::path& path) {
    auto samples = read_samples(path);
    std::set<std::string> labels;
    for (const auto& s : samples) labels.insert(s.label);
    std::vector<std::string> classes(labels.begin(), labels.end());
    LabelSchema schema = [&]() {
      switch (classes.size()) {
        case 2: return LabelSchema::stage1_binary();
        case 3: return LabelSchema::stage2_disease(classes);
        case 4: return LabelSchema::multiclass4(classes);
        default:
          throw ParseFailure("cannot infer a schema from " + std::to_string(classes.size()) +
                             " distinct labels in " + path.string());
      }
    }();
    return DatasetManifest(std::move(schema), std::move(samples));
  }

 private:
  static std::vector<Sample> read_samples(const std::filesystem::path& path) {
    CsvTable table = read_csv(path);
    const std::vector<std::string> plain = {"id", "filepath", "label"};
    const std::vector<std::string> with_orig = {"id", "filepath", "label", "orig_label"};
    bool has_orig;
    if (table.header == plain) {
      has_orig = false;
    } else if (table.header == with_orig) {
      has_orig = true;
    } else {
      throw ParseFailure("unexpected manifest header in " + path.string());
    }
    std::vector<Sample> samples;
    samples.reserve(table.rows.size());
    for (auto& row : table.rows) {
      Sample s{std::move(row[0]), std::move(row[1]), std::move(row[2]), ""};
      if (has_orig) s.orig_label = std::move(row[3]);
      samples.push_back(std::move(s));
    }
    return samples;
  }

  LabelSchema schema_;
  std::vector<Sample> samples_;
};

}  // namespace cxr
