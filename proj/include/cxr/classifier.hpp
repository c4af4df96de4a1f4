#pragma once

#include <string>
#include <vector>

#include "cxr/manifest.hpp"
#include "cxr/schema.hpp"

namespace cxr {

/// Anything that can score a manifest: trained models and the deterministic
/// test oracles share this surface, which is what lets the cascade be
/// composed and verified independently of training.
///
/// Output contract: one row per sample in manifest order. Binary schemas
/// produce a single column, P(disease); other schemas produce one column per
/// class in encoded (alphabetical) order, summing to 1.
class ProbabilityClassifier {
 public:
  virtual ~ProbabilityClassifier() = default;
  virtual const LabelSchema& schema() const = 0;
  virtual std::vector<std::vector<double>> predict_proba(const DatasetManifest& samples) const = 0;
};

/// Maps one probability row to a class name. Binary rows predict "disease"
/// strictly above 0.5 (a tie stays "normal"); multiclass rows take the first
/// maximum in encoded order.
inline std::string label_from_proba(const LabelSchema& schema, const std::vector<double>& row) {
  if (schema.stage() == SchemaStage::stage1_binary && row.size() == 1)
    return row[0] > 0.5 ? kDiseaseClass : kNormalClass;
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return schema.encoded_order().at(best);
}

}  // namespace cxr
