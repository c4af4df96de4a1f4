#include <gtest/gtest.h>

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cxr/cascade.hpp"
#include "cxr/rng.hpp"
#include "testutil.hpp"

using cxr::CascadeModel;
using cxr::LabelSchema;
using cxr::RoutingPolicy;
using cxrtest::synthetic_manifest;

namespace {

/// Deterministic stage oracle: a fixed prediction (or disease probability)
/// per sample id. Binary schemas emit one column, P(disease); multiclass
/// schemas emit a one-hot row.
class MapOracle final : public cxr::ProbabilityClassifier {
 public:
  MapOracle(LabelSchema schema, std::map<std::string, std::string> predictions)
      : schema_(std::move(schema)), predictions_(std::move(predictions)) {}

  MapOracle(LabelSchema schema, std::map<std::string, double> p_disease)
      : schema_(std::move(schema)), p_disease_(std::move(p_disease)) {}

  const LabelSchema& schema() const override { return schema_; }

  std::vector<std::vector<double>> predict_proba(
      const cxr::DatasetManifest& samples) const override {
    std::vector<std::vector<double>> rows;
    for (const auto& s : samples.samples()) {
      if (schema_.stage() == cxr::SchemaStage::stage1_binary) {
        if (!p_disease_.empty()) {
          rows.push_back({p_disease_.at(s.id)});
        } else {
          rows.push_back({predictions_.at(s.id) == cxr::kDiseaseClass ? 1.0 : 0.0});
        }
      } else {
        std::vector<double> row(schema_.size(), 0.0);
        row[static_cast<std::size_t>(schema_.index_of(predictions_.at(s.id)))] = 1.0;
        rows.push_back(std::move(row));
      }
    }
    return rows;
  }

 private:
  LabelSchema schema_;
  std::map<std::string, std::string> predictions_;
  std::map<std::string, double> p_disease_;
};

/// Emits the same probability row for every sample.
class ConstOracle final : public cxr::ProbabilityClassifier {
 public:
  ConstOracle(LabelSchema schema, std::vector<double> row)
      : schema_(std::move(schema)), row_(std::move(row)) {}
  const LabelSchema& schema() const override { return schema_; }
  std::vector<std::vector<double>> predict_proba(
      const cxr::DatasetManifest& samples) const override {
    return std::vector<std::vector<double>>(samples.size(), row_);
  }

 private:
  LabelSchema schema_;
  std::vector<double> row_;
};

/// Assigns stage predictions to a class's samples by position so the stage
/// confusion matrix hits given quotas exactly.
std::map<std::string, std::string> quota_predictions(
    const cxr::DatasetManifest& manifest,
    const std::map<std::string, std::vector<std::pair<std::string, std::size_t>>>& quotas) {
  std::map<std::string, std::string> pred;
  std::map<std::string, std::size_t> cursor;
  for (const auto& s : manifest.samples()) {
    auto it = quotas.find(s.label);
    if (it == quotas.end()) continue;
    std::size_t pos = cursor[s.label]++;
    for (const auto& [label, quota] : it->second) {
      if (pos < quota) {
        pred[s.id] = label;
        break;
      }
      pos -= quota;
    }
  }
  return pred;
}

cxr::DatasetManifest four_class_manifest(std::size_t covid, std::size_t normal,
                                         std::size_t opacity, std::size_t pneumonia) {
  return synthetic_manifest(LabelSchema::multiclass4(), {covid, normal, opacity, pneumonia});
}

}  // namespace

TEST(ComposeProbabilities, EndpointCases) {
  const auto out_schema = LabelSchema::multiclass4();
  auto at = [&](const std::vector<double>& dist, const std::string& cls) {
    return dist[static_cast<std::size_t>(out_schema.index_of(cls))];
  };

  auto all_normal = cxr::compose_probabilities(0.0, {0.3, 0.3, 0.4});
  EXPECT_DOUBLE_EQ(at(all_normal, "normal"), 1.0);
  EXPECT_DOUBLE_EQ(at(all_normal, "covid"), 0.0);
  EXPECT_DOUBLE_EQ(at(all_normal, "opacity"), 0.0);
  EXPECT_DOUBLE_EQ(at(all_normal, "pneumonia"), 0.0);

  auto all_disease = cxr::compose_probabilities(1.0, {0.2, 0.3, 0.5});
  EXPECT_DOUBLE_EQ(at(all_disease, "normal"), 0.0);
  EXPECT_DOUBLE_EQ(at(all_disease, "covid"), 0.2);
  EXPECT_DOUBLE_EQ(at(all_disease, "opacity"), 0.3);
  EXPECT_DOUBLE_EQ(at(all_disease, "pneumonia"), 0.5);

  auto mixed = cxr::compose_probabilities(0.6, {0.5, 0.25, 0.25});
  EXPECT_NEAR(at(mixed, "normal"), 0.4, 1e-12);
  EXPECT_NEAR(at(mixed, "covid"), 0.3, 1e-12);
  EXPECT_NEAR(at(mixed, "opacity"), 0.15, 1e-12);
  EXPECT_NEAR(at(mixed, "pneumonia"), 0.15, 1e-12);
}

TEST(ComposeProbabilities, RejectsInvalidInputs) {
  EXPECT_THROW(cxr::compose_probabilities(1.5, {0.3, 0.3, 0.4}), cxr::InvalidDistribution);
  EXPECT_THROW(cxr::compose_probabilities(-0.1, {0.3, 0.3, 0.4}), cxr::InvalidDistribution);
  EXPECT_THROW(cxr::compose_probabilities(0.5, {0.5, 0.5, 0.5}), cxr::InvalidDistribution);
  EXPECT_THROW(cxr::compose_probabilities(0.5, {1.2, -0.2, 0.0}), cxr::InvalidDistribution);
  EXPECT_THROW(cxr::compose_probabilities(0.5, {0.5, 0.5}), cxr::InvalidDistribution);
}

TEST(ComposeProbabilities, NormalizationOnRandomGrid) {
  cxr::Rng gen(451);
  for (int trial = 0; trial < 2000; ++trial) {
    const double p = gen.next_unit();
    double a = gen.next_unit(), b = gen.next_unit(), c = gen.next_unit();
    const double sum = a + b + c + 1e-12;
    auto dist = cxr::compose_probabilities(p, {a / sum, b / sum, c / sum});
    double total = 0.0;
    for (double v : dist) {
      EXPECT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(CascadeModel, ValidatesStages) {
  auto manifest = four_class_manifest(2, 2, 2, 2);
  auto stage2 = std::make_shared<ConstOracle>(LabelSchema::stage2_disease(),
                                              std::vector<double>{1.0, 0.0, 0.0});
  EXPECT_THROW(CascadeModel(nullptr, stage2), cxr::UnfittedStage);

  auto not_binary = std::make_shared<ConstOracle>(LabelSchema::stage2_disease(),
                                                  std::vector<double>{1.0, 0.0, 0.0});
  EXPECT_THROW(CascadeModel(not_binary, stage2), cxr::SchemaMismatch);
}

TEST(CascadePredict, HardRouting) {
  auto manifest = four_class_manifest(1, 1, 1, 1);
  std::map<std::string, double> p_disease;
  std::map<std::string, std::string> stage2_pred;
  for (const auto& s : manifest.samples()) {
    p_disease[s.id] = (s.label == "covid") ? 0.9 : 0.0;
    stage2_pred[s.id] = "covid";
  }
  auto stage1 = std::make_shared<MapOracle>(LabelSchema::stage1_binary(), p_disease);
  auto stage2 = std::make_shared<MapOracle>(LabelSchema::stage2_disease(), stage2_pred);
  CascadeModel cascade(stage1, stage2, RoutingPolicy{});

  auto preds = cxr::cascade_predict(cascade, manifest);
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (manifest.samples()[i].label == "covid") {
      EXPECT_EQ(preds[i].label, "covid");
      EXPECT_TRUE(preds[i].routed_disease);
    } else {
      EXPECT_EQ(preds[i].label, "normal");
      EXPECT_FALSE(preds[i].routed_disease);
    }
    double sum = 0.0;
    for (double v : preds[i].distribution) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(CascadePredict, ThresholdTieRoutesNormal) {
  auto manifest = four_class_manifest(1, 0, 0, 0);
  std::map<std::string, double> p_disease{{manifest.samples()[0].id, 0.5}};
  std::map<std::string, std::string> s2{{manifest.samples()[0].id, "covid"}};
  auto stage1 = std::make_shared<MapOracle>(LabelSchema::stage1_binary(), p_disease);
  auto stage2 = std::make_shared<MapOracle>(LabelSchema::stage2_disease(), s2);
  CascadeModel cascade(stage1, stage2, RoutingPolicy{});  // threshold 0.5
  auto preds = cxr::cascade_predict(cascade, manifest);
  EXPECT_EQ(preds[0].label, "normal");
}

TEST(CascadePredict, SoftVsHardAgainstIndependentRecomputation) {
  // one-sample manifold swept over a grid of (p_disease, p2)
  auto manifest = four_class_manifest(1, 0, 0, 0);
  const auto out_schema = LabelSchema::multiclass4();
  const auto s2_schema = LabelSchema::stage2_disease();
  int disagreements = 0, agreements = 0;

  for (int pi = 0; pi <= 50; ++pi) {
    const double p = pi / 50.0;
    for (int a10 = 0; a10 <= 10; ++a10)
      for (int b10 = 0; a10 + b10 <= 10; ++b10) {
        const double a = a10 / 10.0, b = b10 / 10.0, c = (10 - a10 - b10) / 10.0;
        auto stage1 = std::make_shared<ConstOracle>(LabelSchema::stage1_binary(),
                                                    std::vector<double>{p});
        auto stage2 =
            std::make_shared<ConstOracle>(s2_schema, std::vector<double>{a, b, c});

        RoutingPolicy hard;
        RoutingPolicy soft;
        soft.mode = RoutingPolicy::Mode::soft;
        auto hard_pred = cxr::cascade_predict(CascadeModel(stage1, stage2, hard), manifest)[0];
        auto soft_pred = cxr::cascade_predict(CascadeModel(stage1, stage2, soft), manifest)[0];

        // independent recomputation of both labels
        std::string expected_hard;
        if (p <= 0.5) {
          expected_hard = "normal";
        } else {
          const std::vector<double> p2 = {a, b, c};
          std::size_t best = 0;
          for (std::size_t i = 1; i < 3; ++i)
            if (p2[i] > p2[best]) best = i;
          expected_hard = s2_schema.encoded_order()[best];
        }
        std::vector<double> composed(4, 0.0);
        composed[static_cast<std::size_t>(out_schema.index_of("normal"))] = 1.0 - p;
        composed[static_cast<std::size_t>(out_schema.index_of("covid"))] = p * a;
        composed[static_cast<std::size_t>(out_schema.index_of("opacity"))] = p * b;
        composed[static_cast<std::size_t>(out_schema.index_of("pneumonia"))] = p * c;
        std::size_t best = 0;
        for (std::size_t i = 1; i < 4; ++i)
          if (composed[i] > composed[best]) best = i;
        const std::string expected_soft = out_schema.encoded_order()[best];

        EXPECT_EQ(hard_pred.label, expected_hard) << "p=" << p << " p2=(" << a << "," << b << ")";
        EXPECT_EQ(soft_pred.label, expected_soft) << "p=" << p << " p2=(" << a << "," << b << ")";
        (expected_hard == expected_soft ? agreements : disagreements)++;
      }
  }
  // the sweep must exercise both agreement and disagreement regions
  EXPECT_GT(agreements, 0);
  EXPECT_GT(disagreements, 0);
}

TEST(EvaluateCascade, PerfectOraclesGiveDiagonal) {
  auto manifest = four_class_manifest(10, 10, 10, 10);
  std::map<std::string, std::string> routing, subtype;
  for (const auto& s : manifest.samples()) {
    routing[s.id] = s.label == "normal" ? "normal" : "disease";
    subtype[s.id] = s.label == "normal" ? "covid" : s.label;  // never consulted for normals
  }
  auto stage1 = std::make_shared<MapOracle>(LabelSchema::stage1_binary(), routing);
  auto stage2 = std::make_shared<MapOracle>(LabelSchema::stage2_disease(), subtype);
  auto eval = cxr::evaluate_cascade(CascadeModel(stage1, stage2), manifest);

  EXPECT_DOUBLE_EQ(eval.report.accuracy, 1.0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_EQ(eval.cm.at(i, j), i == j ? 10 : 0);
}

TEST(EvaluateCascade, Stage2ConfusionEmbedsIntoFourClassGrid) {
  // stage1 perfect; stage2 with a fixed confusion matrix
  auto manifest = four_class_manifest(30, 40, 30, 30);
  std::map<std::string, std::string> routing;
  for (const auto& s : manifest.samples())
    routing[s.id] = s.label == "normal" ? "normal" : "disease";

  auto stage2_pred = quota_predictions(manifest, {
      {"covid", {{"covid", 24}, {"opacity", 3}, {"pneumonia", 3}}},
      {"opacity", {{"covid", 6}, {"opacity", 21}, {"pneumonia", 3}}},
      {"pneumonia", {{"opacity", 6}, {"pneumonia", 24}}},
  });
  auto stage1 = std::make_shared<MapOracle>(LabelSchema::stage1_binary(), routing);
  auto stage2 = std::make_shared<MapOracle>(LabelSchema::stage2_disease(), stage2_pred);
  auto eval = cxr::evaluate_cascade(CascadeModel(stage1, stage2), manifest);

  const auto& schema = eval.cm.schema();
  auto idx = [&](const std::string& c) { return static_cast<std::size_t>(schema.index_of(c)); };
  // normal row/column diagonal
  EXPECT_EQ(eval.cm.at(idx("normal"), idx("normal")), 40);
  EXPECT_EQ(eval.cm.col_sum(idx("normal")), 40);
  // embedded stage2 rows
  EXPECT_EQ(eval.cm.at(idx("covid"), idx("covid")), 24);
  EXPECT_EQ(eval.cm.at(idx("covid"), idx("opacity")), 3);
  EXPECT_EQ(eval.cm.at(idx("covid"), idx("pneumonia")), 3);
  EXPECT_EQ(eval.cm.at(idx("opacity"), idx("covid")), 6);
  EXPECT_EQ(eval.cm.at(idx("opacity"), idx("opacity")), 21);
  EXPECT_EQ(eval.cm.at(idx("pneumonia"), idx("opacity")), 6);
  EXPECT_EQ(eval.cm.at(idx("pneumonia"), idx("pneumonia")), 24);

  // with perfect routing, pipeline-routed and oracle-routed stage2 views agree
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      EXPECT_EQ(eval.stage2_oracle_cm.at(i, j), eval.stage2_pipeline_cm.at(i, j));
  EXPECT_DOUBLE_EQ(eval.stage1_report.accuracy, 1.0);
}

TEST(EvaluateCascade, RouteEverythingToDiseaseKillsNormalRecall) {
  auto manifest = four_class_manifest(5, 20, 5, 5);
  std::map<std::string, double> p_disease;
  std::map<std::string, std::string> subtype;
  for (const auto& s : manifest.samples()) {
    p_disease[s.id] = 1.0;
    subtype[s.id] = s.label == "normal" ? "covid" : s.label;
  }
  auto stage1 = std::make_shared<MapOracle>(LabelSchema::stage1_binary(), p_disease);
  auto stage2 = std::make_shared<MapOracle>(LabelSchema::stage2_disease(), subtype);
  auto eval = cxr::evaluate_cascade(CascadeModel(stage1, stage2), manifest);

  for (const auto& row : eval.report.rows)
    if (row.class_name == "normal") {
      EXPECT_DOUBLE_EQ(row.recall, 0.0);
      EXPECT_EQ(row.support, 20);
    }
}

TEST(EvaluateCascade, RaisingThresholdNeverShrinksNormalCount) {
  auto manifest = four_class_manifest(25, 25, 25, 25);
  std::map<std::string, double> p_disease;
  std::map<std::string, std::string> subtype;
  cxr::Rng gen(33);
  for (const auto& s : manifest.samples()) {
    p_disease[s.id] = gen.next_unit();
    subtype[s.id] = "covid";
  }
  auto stage1 = std::make_shared<MapOracle>(LabelSchema::stage1_binary(), p_disease);
  auto stage2 = std::make_shared<MapOracle>(LabelSchema::stage2_disease(), subtype);

  std::size_t previous = 0;
  for (double threshold : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    RoutingPolicy policy;
    policy.disease_threshold = threshold;
    auto preds = cxr::cascade_predict(CascadeModel(stage1, stage2, policy), manifest);
    std::size_t normals = 0;
    for (const auto& p : preds) {
      if (p.label == "normal") ++normals;
      EXPECT_EQ(p.label == "normal", p.p_disease <= threshold);  // routing consistency
    }
    EXPECT_GE(normals, previous);
    previous = normals;
  }
}

TEST(EvaluateCascade, EmptyTestSetRejected) {
  auto stage1 = std::make_shared<ConstOracle>(LabelSchema::stage1_binary(),
                                              std::vector<double>{1.0});
  auto stage2 = std::make_shared<ConstOracle>(LabelSchema::stage2_disease(),
                                              std::vector<double>{1.0, 0.0, 0.0});
  cxr::DatasetManifest empty(LabelSchema::multiclass4(), {});
  EXPECT_THROW(cxr::evaluate_cascade(CascadeModel(stage1, stage2), empty), cxr::EmptyTestSet);
}

TEST(PredictionsCsv, SpecHeaderAndRowCount) {
  cxrtest::TempDir dir;
  auto manifest = four_class_manifest(2, 2, 2, 2);
  std::map<std::string, double> p_disease;
  std::map<std::string, std::string> subtype;
  for (const auto& s : manifest.samples()) {
    p_disease[s.id] = s.label == "normal" ? 0.0 : 1.0;
    subtype[s.id] = s.label == "normal" ? "covid" : s.label;
  }
  auto stage1 = std::make_shared<MapOracle>(LabelSchema::stage1_binary(), p_disease);
  auto stage2 = std::make_shared<MapOracle>(LabelSchema::stage2_disease(), subtype);
  CascadeModel cascade(stage1, stage2);
  auto preds = cxr::cascade_predict(cascade, manifest);
  cxr::write_predictions_csv(manifest, preds, cascade.output_schema(), dir / "p.csv");

  auto table = cxr::read_csv(dir / "p.csv");
  EXPECT_EQ(table.header,
            (std::vector<std::string>{"id", "true_label", "pred_label", "p_normal", "p_covid",
                                      "p_opacity", "p_pneumonia"}));
  EXPECT_EQ(table.rows.size(), manifest.size());
}
