#include <gtest/gtest.h>

#include <map>
#include <string>
#include <vector>

#include "cxr/metrics.hpp"
#include "cxr/rng.hpp"
#include "testutil.hpp"

using cxr::ConfusionMatrix;
using cxr::LabelSchema;

namespace {

// Naive per-sample counting oracle, independent of the library code path.
struct OracleReport {
  std::map<std::string, double> precision, recall, f1;
  std::map<std::string, long long> support;
  double accuracy = 0.0;
};

OracleReport oracle_metrics(const std::vector<std::string>& y_true,
                            const std::vector<std::string>& y_pred,
                            const std::vector<std::string>& classes) {
  OracleReport out;
  long long correct = 0;
  for (const auto& cls : classes) {
    long long tp = 0, fp = 0, fn = 0, sup = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      if (y_true[i] == cls) ++sup;
      if (y_true[i] == cls && y_pred[i] == cls) ++tp;
      if (y_true[i] != cls && y_pred[i] == cls) ++fp;
      if (y_true[i] == cls && y_pred[i] != cls) ++fn;
    }
    const double p = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double r = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    out.precision[cls] = p;
    out.recall[cls] = r;
    out.f1[cls] = (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
    out.support[cls] = sup;
  }
  for (std::size_t i = 0; i < y_true.size(); ++i)
    if (y_true[i] == y_pred[i]) ++correct;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(y_true.size());
  return out;
}

LabelSchema schema_for_k(int k) {
  switch (k) {
    case 2: return LabelSchema::stage1_binary();
    case 3: return LabelSchema::stage2_disease({"alpha", "beta", "gamma"});
    default: return LabelSchema::multiclass4({"alpha", "beta", "delta", "gamma"});
  }
}

ConfusionMatrix make_cm_2x2(long long a, long long b, long long c, long long d) {
  // encoded order of the binary schema is (disease, normal)
  ConfusionMatrix cm(LabelSchema::stage1_binary());
  cm.at(0, 0) = a;
  cm.at(0, 1) = b;
  cm.at(1, 0) = c;
  cm.at(1, 1) = d;
  return cm;
}

}  // namespace

TEST(ConfusionMatrix, PerfectDiagonal) {
  std::vector<std::string> t = {"disease", "disease", "normal"};
  auto cm = cxr::confusion_matrix(t, t, LabelSchema::stage1_binary());
  EXPECT_EQ(cm.at(0, 0), 2);
  EXPECT_EQ(cm.at(0, 1), 0);
  EXPECT_EQ(cm.at(1, 0), 0);
  EXPECT_EQ(cm.at(1, 1), 1);
}

TEST(ConfusionMatrix, FullySwapped) {
  std::vector<std::string> t = {"disease", "normal"};
  std::vector<std::string> p = {"normal", "disease"};
  auto cm = cxr::confusion_matrix(t, p, LabelSchema::stage1_binary());
  EXPECT_EQ(cm.at(0, 0), 0);
  EXPECT_EQ(cm.at(0, 1), 1);
  EXPECT_EQ(cm.at(1, 0), 1);
  EXPECT_EQ(cm.at(1, 1), 0);
}

TEST(ConfusionMatrix, LengthMismatchRejected) {
  std::vector<std::string> t = {"normal"};
  std::vector<std::string> p = {"normal", "disease"};
  EXPECT_THROW(cxr::confusion_matrix(t, p, LabelSchema::stage1_binary()), cxr::LengthMismatch);
}

TEST(ConfusionMatrix, UnknownLabelRejected) {
  std::vector<std::string> t = {"weird"};
  EXPECT_THROW(cxr::confusion_matrix(t, t, LabelSchema::stage1_binary()), cxr::UnknownLabel);
}

TEST(ConfusionMatrix, RandomizedCountingOracle) {
  cxr::Rng gen(314);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 2 + static_cast<int>(gen.below(3));
    const auto schema = schema_for_k(k);
    const auto& names = schema.encoded_order();
    const std::size_t n = 1 + gen.below(200);
    std::vector<std::string> y_true, y_pred;
    for (std::size_t i = 0; i < n; ++i) {
      y_true.push_back(names[gen.below(names.size())]);
      y_pred.push_back(names[gen.below(names.size())]);
    }
    auto cm = cxr::confusion_matrix(y_true, y_pred, schema);
    // brute-force counting pass
    for (std::size_t i = 0; i < names.size(); ++i)
      for (std::size_t j = 0; j < names.size(); ++j) {
        long long expected = 0;
        for (std::size_t s = 0; s < n; ++s)
          if (y_true[s] == names[i] && y_pred[s] == names[j]) ++expected;
        EXPECT_EQ(cm.at(i, j), expected);
      }
  }
}

TEST(PrecisionRecall, DiagonalIsPerfect) {
  auto cm = make_cm_2x2(7, 0, 0, 5);
  for (const auto& row : cxr::precision_recall_f1_support(cm)) {
    EXPECT_DOUBLE_EQ(row.precision, 1.0);
    EXPECT_DOUBLE_EQ(row.recall, 1.0);
    EXPECT_DOUBLE_EQ(row.f1, 1.0);
    EXPECT_FALSE(row.zero_division);
  }
}

TEST(PrecisionRecall, HandArithmetic8219) {
  // [[8,2],[1,9]]: precision0 = 8/9, recall0 = 8/10, f1 = 2pr/(p+r)
  auto cm = make_cm_2x2(8, 2, 1, 9);
  auto rows = cxr::precision_recall_f1_support(cm);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NEAR(rows[0].precision, 8.0 / 9.0, 1e-12);
  EXPECT_NEAR(rows[0].recall, 0.8, 1e-12);
  EXPECT_NEAR(rows[0].f1, 2.0 * (8.0 / 9.0) * 0.8 / (8.0 / 9.0 + 0.8), 1e-12);
  EXPECT_NEAR(rows[0].f1, 0.8421, 5e-5);
  EXPECT_EQ(rows[0].support, 10);
}

TEST(PrecisionRecall, ZeroColumnPolicy) {
  // nothing ever predicted "disease": precision 0 by policy, recall unaffected
  auto cm = make_cm_2x2(0, 4, 0, 6);
  auto rows = cxr::precision_recall_f1_support(cm);
  EXPECT_DOUBLE_EQ(rows[0].precision, 0.0);
  EXPECT_DOUBLE_EQ(rows[0].recall, 0.0);
  EXPECT_TRUE(rows[0].zero_division);
  EXPECT_NEAR(rows[1].recall, 1.0, 1e-12);
}

TEST(Accuracy, Values) {
  EXPECT_DOUBLE_EQ(cxr::accuracy(make_cm_2x2(3, 0, 0, 2)), 1.0);
  EXPECT_DOUBLE_EQ(cxr::accuracy(make_cm_2x2(0, 5, 5, 0)), 0.0);
  EXPECT_DOUBLE_EQ(cxr::accuracy(make_cm_2x2(8, 2, 1, 9)), 0.85);
  EXPECT_THROW(cxr::accuracy(ConfusionMatrix(LabelSchema::stage1_binary())), cxr::EmptyMatrix);
}

TEST(ClassificationReport, MacroF1HandArithmetic) {
  auto report = cxr::classification_report(make_cm_2x2(8, 2, 1, 9));
  const double f1_0 = 2.0 * (8.0 / 9.0) * 0.8 / (8.0 / 9.0 + 0.8);
  const double f1_1 = 2.0 * (9.0 / 11.0) * 0.9 / (9.0 / 11.0 + 0.9);
  EXPECT_NEAR(report.macro_f1, (f1_0 + f1_1) / 2.0, 1e-12);
  EXPECT_NEAR(report.macro_f1, 0.8496, 5e-5);
  EXPECT_DOUBLE_EQ(report.accuracy, 0.85);
  EXPECT_EQ(report.total_support, 20);
}

TEST(ClassificationReport, WeightedDiffersFromMacroWhenImbalanced) {
  // supports {90, 10}, different per-class recalls
  auto cm = make_cm_2x2(80, 10, 2, 8);
  auto report = cxr::classification_report(cm);
  EXPECT_NE(report.weighted_recall, report.macro_recall);
  // weighted recall = sum(support_i/total * recall_i)
  const double expected = (90.0 / 100.0) * (80.0 / 90.0) + (10.0 / 100.0) * (8.0 / 10.0);
  EXPECT_NEAR(report.weighted_recall, expected, 1e-12);
}

TEST(ClassificationReport, RenderedTwoDecimals) {
  auto report = cxr::classification_report(make_cm_2x2(7, 0, 0, 5));
  const std::string text = report.render();
  EXPECT_NE(text.find("precision"), std::string::npos);
  EXPECT_NE(text.find("1.00"), std::string::npos);
  EXPECT_NE(text.find("macro avg"), std::string::npos);
  EXPECT_NE(text.find("weighted avg"), std::string::npos);
  EXPECT_EQ(text.find("0.999"), std::string::npos);  // nothing rendered beyond 2 decimals

  EXPECT_THROW(cxr::classification_report(ConfusionMatrix(LabelSchema::stage1_binary())),
               cxr::EmptyMatrix);
}

TEST(MetricsProperties, OracleEquivalenceRandomized) {
  cxr::Rng gen(2718);
  for (int trial = 0; trial < 500; ++trial) {
    const int k = 2 + static_cast<int>(gen.below(3));
    const auto schema = schema_for_k(k);
    const auto& names = schema.encoded_order();
    const std::size_t n = 1 + gen.below(120);
    std::vector<std::string> y_true, y_pred;
    for (std::size_t i = 0; i < n; ++i) {
      y_true.push_back(names[gen.below(names.size())]);
      y_pred.push_back(names[gen.below(names.size())]);
    }
    auto cm = cxr::confusion_matrix(y_true, y_pred, schema);
    auto report = cxr::classification_report(cm);
    auto oracle = oracle_metrics(y_true, y_pred, names);

    EXPECT_NEAR(report.accuracy, oracle.accuracy, 1e-12);
    long long support_sum = 0;
    for (const auto& row : report.rows) {
      EXPECT_NEAR(row.precision, oracle.precision[row.class_name], 1e-12);
      EXPECT_NEAR(row.recall, oracle.recall[row.class_name], 1e-12);
      EXPECT_NEAR(row.f1, oracle.f1[row.class_name], 1e-12);
      EXPECT_EQ(row.support, oracle.support[row.class_name]);
      support_sum += row.support;
    }
    EXPECT_EQ(support_sum, static_cast<long long>(n));  // support conservation

    // micro consistency: single-label micro precision = micro recall = accuracy
    long long tp_sum = 0, col_sum = 0, row_sum = 0;
    for (std::size_t i = 0; i < cm.k(); ++i) {
      tp_sum += cm.at(i, i);
      col_sum += cm.col_sum(i);
      row_sum += cm.row_sum(i);
    }
    EXPECT_EQ(col_sum, row_sum);
    EXPECT_NEAR(static_cast<double>(tp_sum) / static_cast<double>(col_sum), report.accuracy,
                1e-12);
  }
}

TEST(MetricsProperties, PermutationInvariance) {
  const auto schema = LabelSchema::stage2_disease({"alpha", "beta", "gamma"});
  cxr::Rng gen(99);
  std::vector<std::string> y_true, y_pred;
  const auto& names = schema.encoded_order();
  for (int i = 0; i < 300; ++i) {
    y_true.push_back(names[gen.below(3)]);
    y_pred.push_back(names[gen.below(3)]);
  }
  // cyclic relabeling alpha->beta->gamma->alpha
  std::map<std::string, std::string> sigma = {
      {"alpha", "beta"}, {"beta", "gamma"}, {"gamma", "alpha"}};
  std::vector<std::string> t2, p2;
  for (const auto& s : y_true) t2.push_back(sigma[s]);
  for (const auto& s : y_pred) p2.push_back(sigma[s]);

  auto cm1 = cxr::confusion_matrix(y_true, y_pred, schema);
  auto cm2 = cxr::confusion_matrix(t2, p2, schema);
  EXPECT_DOUBLE_EQ(cxr::accuracy(cm1), cxr::accuracy(cm2));

  auto r1 = cxr::classification_report(cm1);
  auto r2 = cxr::classification_report(cm2);
  for (const auto& row : r1.rows) {
    const std::string renamed = sigma[row.class_name];
    for (const auto& other : r2.rows) {
      if (other.class_name != renamed) continue;
      EXPECT_DOUBLE_EQ(row.precision, other.precision);
      EXPECT_DOUBLE_EQ(row.recall, other.recall);
      EXPECT_DOUBLE_EQ(row.f1, other.f1);
      EXPECT_EQ(row.support, other.support);
    }
  }
}

TEST(ConfusionMatrix, CsvHasClassNameHeaders) {
  cxrtest::TempDir dir;
  auto cm = make_cm_2x2(8, 2, 1, 9);
  cm.save_csv(dir / "cm.csv");
  auto table = cxr::read_csv(dir / "cm.csv");
  EXPECT_EQ(table.header, (std::vector<std::string>{"", "disease", "normal"}));
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.rows[0], (std::vector<std::string>{"disease", "8", "2"}));
  EXPECT_EQ(table.rows[1], (std::vector<std::string>{"normal", "1", "9"}));
}
