#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cxr/classifier.hpp"
#include "cxr/csv.hpp"
#include "cxr/errors.hpp"
#include "cxr/manifest.hpp"
#include "cxr/metrics.hpp"

namespace cxr {

/// How stage1's disease probability turns into a final label.
///  - hard: p(disease) <= threshold emits "normal" (ties stay normal);
///    anything above consults stage2 and emits its argmax.
///  - soft: the full composed distribution is argmax'd; the threshold is only
///    used for the stage-wise diagnostic report.
struct RoutingPolicy {
  enum class Mode { hard, soft };
  Mode mode = Mode::hard;
  double disease_threshold = 0.5;
};

/// P(normal) = 1 - p_disease, P(c) = p_disease * p2(c) for each disease
/// class; entries ordered by the output schema's encoded order.
inline std::vector<double> compose_probabilities(double p_disease, const std::vector<double>& p2,
                                                 const LabelSchema& stage2_schema,
                                                 const LabelSchema& output_schema) {
  if (!(p_disease >= 0.0 && p_disease <= 1.0))
    throw InvalidDistribution("p_disease outside [0,1]: " + std::to_string(p_disease));
  if (p2.size() != stage2_schema.size())
    throw InvalidDistribution("stage2 distribution has wrong arity");
  double sum = 0.0;
  for (double v : p2) {
    if (v < 0.0) throw InvalidDistribution("negative stage2 probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw InvalidDistribution("stage2 distribution sums to " + std::to_string(sum));
  std::vector<double> out(output_schema.size(), 0.0);
  out[static_cast<std::size_t>(output_schema.index_of(kNormalClass))] = 1.0 - p_disease;
  const auto& names = stage2_schema.encoded_order();
  for (std::size_t i = 0; i < names.size(); ++i)
    out[static_cast<std::size_t>(output_schema.index_of(names[i]))] = p_disease * p2[i];
  return out;
}

/// Canonical 4-class overload.
inline std::vector<double> compose_probabilities(double p_disease, const std::vector<double>& p2) {
  return compose_probabilities(p_disease, p2, LabelSchema::stage2_disease(),
                               LabelSchema::multiclass4());
}

/// Stage1 normal-vs-disease router plus stage2 disease classifier under one
/// routing policy. Immutable after construction.
class CascadeModel {
 public:
  CascadeModel(std::shared_ptr<const ProbabilityClassifier> stage1,
               std::shared_ptr<const ProbabilityClassifier> stage2, RoutingPolicy policy = {})
      : stage1_(std::move(stage1)), stage2_(std::move(stage2)), policy_(policy),
        output_schema_(make_output_schema(stage1_, stage2_)) {
    if (!(policy_.disease_threshold > 0.0 && policy_.disease_threshold < 1.0))
      throw ConfigInvalid("disease threshold must be in (0,1)");
  }

  const ProbabilityClassifier& stage1() const { return *stage1_; }
  const ProbabilityClassifier& stage2() const { return *stage2_; }
  const RoutingPolicy& policy() const { return policy_; }
  const LabelSchema& output_schema() const { return output_schema_; }

 private:
  static LabelSchema make_output_schema(const std::shared_ptr<const ProbabilityClassifier>& s1,
                                        const std::shared_ptr<const ProbabilityClassifier>& s2) {
    if (!s1 || !s2) throw UnfittedStage("cascade requires both fitted stages");
    if (s1->schema().stage() != SchemaStage::stage1_binary)
      throw SchemaMismatch("stage1 must use the normal/disease schema");
    if (s2->schema().stage() != SchemaStage::stage2_disease)
      throw SchemaMismatch("stage2 must use a 3-class disease schema");
    std::vector<std::string> classes = {kNormalClass};
    for (const auto& c : s2->schema().classes()) classes.push_back(c);
    return LabelSchema::multiclass4(classes);
  }

  std::shared_ptr<const ProbabilityClassifier> stage1_;
  std::shared_ptr<const ProbabilityClassifier> stage2_;
  RoutingPolicy policy_;
  LabelSchema output_schema_;
};

struct CascadePrediction {
  std::string label;
  std::vector<double> distribution;  // output schema encoded order
  double p_disease = 0.0;
  bool routed_disease = false;       // thresholded stage1 decision
};

namespace detail {

inline double disease_probability(const LabelSchema& schema, const std::vector<double>& row) {
  if (row.size() == 1) return row[0];
  return row.at(static_cast<std::size_t>(schema.index_of(kDiseaseClass)));
}

inline std::size_t argmax(const std::vector<double>& row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

}  // namespace detail

/// Runs the two-stage pipeline over a manifest. In hard mode stage2 is only
/// consulted for samples routed to disease; the emitted distribution for a
/// normal-routed sample spreads its (sub-threshold) disease mass uniformly
/// over the disease classes.
inline std::vector<CascadePrediction> cascade_predict(const CascadeModel& cascade,
                                                      const DatasetManifest& samples) {
  const LabelSchema& out_schema = cascade.output_schema();
  const LabelSchema& s2_schema = cascade.stage2().schema();
  const auto p1 = cascade.stage1().predict_proba(samples);

  std::vector<CascadePrediction> preds(samples.size());
  std::vector<std::size_t> stage2_idx;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    preds[i].p_disease = detail::disease_probability(cascade.stage1().schema(), p1[i]);
    preds[i].routed_disease = preds[i].p_disease > cascade.policy().disease_threshold;
    const bool needs_stage2 =
        cascade.policy().mode == RoutingPolicy::Mode::soft || preds[i].routed_disease;
    if (needs_stage2) stage2_idx.push_back(i);
  }

  std::vector<std::vector<double>> p2(samples.size());
  if (!stage2_idx.empty()) {
    auto rows = cascade.stage2().predict_proba(samples.subset(stage2_idx));
    for (std::size_t n = 0; n < stage2_idx.size(); ++n) p2[stage2_idx[n]] = std::move(rows[n]);
  }

  const std::vector<double> uniform(s2_schema.size(), 1.0 / static_cast<double>(s2_schema.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::vector<double>& dist2 = p2[i].empty() ? uniform : p2[i];
    preds[i].distribution =
        compose_probabilities(preds[i].p_disease, dist2, s2_schema, out_schema);
    if (cascade.policy().mode == RoutingPolicy::Mode::soft) {
      preds[i].label = out_schema.encoded_order()[detail::argmax(preds[i].distribution)];
    } else if (preds[i].routed_disease) {
      preds[i].label = s2_schema.encoded_order()[detail::argmax(p2[i])];
    } else {
      preds[i].label = kNormalClass;
    }
  }
  return preds;
}

struct CascadeEvaluation {
  ConfusionMatrix cm;                     // end-to-end, 4-class
  ClassificationReport report;
  ConfusionMatrix stage1_cm;              // thresholded routing vs relabeled truth
  ClassificationReport stage1_report;
  ConfusionMatrix stage2_oracle_cm;       // all truly diseased samples
  std::optional<ClassificationReport> stage2_oracle_report;
  ConfusionMatrix stage2_pipeline_cm;     // truly diseased samples the pipeline routed to stage2
  std::optional<ClassificationReport> stage2_pipeline_report;
  std::vector<CascadePrediction> predictions;
};

/// End-to-end 4-class evaluation plus the stage-wise views: a binary report
/// of the routing decisions, and the stage2 report in both the oracle-routed
/// variant (every truly diseased sample) and the pipeline-routed variant
/// (only those stage1 actually forwarded). Truly normal samples never enter
/// the stage-2 matrices.
inline CascadeEvaluation evaluate_cascade(const CascadeModel& cascade,
                                          const DatasetManifest& test) {
  if (test.empty()) throw EmptyTestSet("cascade evaluation needs a non-empty test manifest");
  if (test.schema().stage() != SchemaStage::multiclass4)
    throw SchemaMismatch("cascade evaluation expects a 4-class test manifest");
  for (const auto& c : cascade.output_schema().classes())
    if (!test.schema().contains(c))
      throw SchemaMismatch("test schema lacks cascade output class '" + c + "'");

  const LabelSchema& s2_schema = cascade.stage2().schema();
  auto predictions = cascade_predict(cascade, test);

  // Oracle-routed stage2 needs predictions for truly diseased samples the
  // pipeline may have skipped.
  std::vector<std::size_t> diseased_idx;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (test.samples()[i].label != kNormalClass) diseased_idx.push_back(i);
  std::vector<std::string> stage2_label(test.size());
  {
    std::vector<std::size_t> need;
    for (std::size_t i : diseased_idx) need.push_back(i);
    if (!need.empty()) {
      auto rows = cascade.stage2().predict_proba(test.subset(need));
      for (std::size_t n = 0; n < need.size(); ++n)
        stage2_label[need[n]] = s2_schema.encoded_order()[detail::argmax(rows[n])];
    }
  }

  CascadeEvaluation eval{ConfusionMatrix(cascade.output_schema()),
                         {},
                         ConfusionMatrix(LabelSchema::stage1_binary()),
                         {},
                         ConfusionMatrix(s2_schema),
                         std::nullopt,
                         ConfusionMatrix(s2_schema),
                         std::nullopt,
                         std::move(predictions)};

  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::string& truth = test.samples()[i].label;
    const CascadePrediction& pred = eval.predictions[i];
    eval.cm.add(truth, pred.label);
    const bool truly_diseased = truth != kNormalClass;
    eval.stage1_cm.add(truly_diseased ? kDiseaseClass : kNormalClass,
                       pred.routed_disease ? kDiseaseClass : kNormalClass);
    if (truly_diseased) {
      eval.stage2_oracle_cm.add(truth, stage2_label[i]);
      if (pred.routed_disease) eval.stage2_pipeline_cm.add(truth, stage2_label[i]);
    }
  }

  eval.report = classification_report(eval.cm);
  eval.stage1_report = classification_report(eval.stage1_cm);
  if (eval.stage2_oracle_cm.total() > 0)
    eval.stage2_oracle_report = classification_report(eval.stage2_oracle_cm);
  if (eval.stage2_pipeline_cm.total() > 0)
    eval.stage2_pipeline_report = classification_report(eval.stage2_pipeline_cm);
  return eval;
}

/// CSV `id,true_label,pred_label,p_normal,p_<disease>...`, disease columns in
/// stage2 encoded order (p_covid,p_opacity,p_pneumonia for the canonical
/// schema).
inline void write_predictions_csv(const DatasetManifest& test,
                                  const std::vector<CascadePrediction>& predictions,
                                  const LabelSchema& output_schema,
                                  const std::filesystem::path& path) {
  if (test.size() != predictions.size())
    throw LengthMismatch("prediction rows do not match manifest size");
  std::vector<std::string> names = {kNormalClass};
  for (const auto& c : output_schema.encoded_order())
    if (c != kNormalClass) names.push_back(c);
  std::vector<std::string> header = {"id", "true_label", "pred_label"};
  for (const auto& c : names) header.push_back("p_" + c);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::vector<std::string> row = {test.samples()[i].id, test.samples()[i].label,
                                    predictions[i].label};
    for (const auto& c : names)
      row.push_back(format_sig6(
          predictions[i].distribution[static_cast<std::size_t>(output_schema.index_of(c))]));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

}  // namespace cxr
