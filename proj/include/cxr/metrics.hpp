#pragma once

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxr/csv.hpp"
#include "cxr/errors.hpp"
#include "cxr/schema.hpp"

namespace cxr {

/// K x K integer count grid; rows are true classes, columns predictions,
/// both in the schema's encoded (alphabetical) order.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(LabelSchema schema)
      : schema_(std::move(schema)),
        counts_(schema_.size(), std::vector<std::int64_t>(schema_.size(), 0)) {}

  const LabelSchema& schema() const { return schema_; }
  std::size_t k() const { return counts_.size(); }

  std::int64_t at(std::size_t true_idx, std::size_t pred_idx) const {
    return counts_.at(true_idx).at(pred_idx);
  }
  std::int64_t& at(std::size_t true_idx, std::size_t pred_idx) {
    return counts_.at(true_idx).at(pred_idx);
  }

  void add(const std::string& true_label, const std::string& pred_label, std::int64_t n = 1) {
    counts_[schema_.index_of(true_label)][schema_.index_of(pred_label)] += n;
  }

  std::int64_t row_sum(std::size_t i) const {
    std::int64_t s = 0;
    for (std::int64_t v : counts_[i]) s += v;
    return s;
  }
  std::int64_t col_sum(std::size_t j) const {
    std::int64_t s = 0;
    for (const auto& row : counts_) s += row[j];
    return s;
  }
  std::int64_t trace() const {
    std::int64_t s = 0;
    for (std::size_t i = 0; i < k(); ++i) s += counts_[i][i];
    return s;
  }
  std::int64_t total() const {
    std::int64_t s = 0;
    for (std::size_t i = 0; i < k(); ++i) s += row_sum(i);
    return s;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    if (other.schema_ != schema_) throw SchemaMismatch("cannot add confusion matrices of different schemas");
    for (std::size_t i = 0; i < k(); ++i)
      for (std::size_t j = 0; j < k(); ++j) counts_[i][j] += other.counts_[i][j];
    return *this;
  }

  /// CSV with class names as both header row and leading column.
  void save_csv(const std::filesystem::path& path) const {
    const auto& names = schema_.encoded_order();
    std::vector<std::string> header = {""};
    header.insert(header.end(), names.begin(), names.end());
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < k(); ++i) {
      std::vector<std::string> row = {names[i]};
      for (std::size_t j = 0; j < k(); ++j) row.push_back(std::to_string(counts_[i][j]));
      rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
  }

 private:
  LabelSchema schema_;
  std::vector<std::vector<std::int64_t>> counts_;
};

/// counts[i][j] = #{n : true_n = class_i and pred_n = class_j}.
inline ConfusionMatrix confusion_matrix(const std::vector<std::string>& y_true,
                                        const std::vector<std::string>& y_pred,
                                        const LabelSchema& schema) {
  if (y_true.size() != y_pred.size())
    throw LengthMismatch("y_true has " + std::to_string(y_true.size()) + " labels, y_pred has " +
                         std::to_string(y_pred.size()));
  ConfusionMatrix cm(schema);
  for (std::size_t n = 0; n < y_true.size(); ++n) cm.add(y_true[n], y_pred[n]);
  return cm;
}

struct MetricRow {
  std::string class_name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t support = 0;
  bool zero_division = false;  // a denominator was 0 and the metric was defined as 0
};

/// Per-class precision/recall/F1/support from a confusion matrix.
/// Zero-division policy: a metric whose denominator is 0 is reported as 0 and
/// flagged.
inline std::vector<MetricRow> precision_recall_f1_support(const ConfusionMatrix& cm) {
  std::vector<MetricRow> rows;
  for (std::size_t i = 0; i < cm.k(); ++i) {
    MetricRow row;
    row.class_name = cm.schema().encoded_order()[i];
    const std::int64_t tp = cm.at(i, i);
    const std::int64_t col = cm.col_sum(i);
    const std::int64_t row_total = cm.row_sum(i);
    row.support = row_total;
    if (col > 0) {
      row.precision = static_cast<double>(tp) / static_cast<double>(col);
    } else {
      row.zero_division = true;
    }
    if (row_total > 0) {
      row.recall = static_cast<double>(tp) / static_cast<double>(row_total);
    } else {
      row.zero_division = true;
    }
    if (row.precision + row.recall > 0.0) {
      row.f1 = 2.0 * row.precision * row.recall / (row.precision + row.recall);
    } else {
      row.f1 = 0.0;
      row.zero_division = true;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline double accuracy(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw EmptyMatrix("accuracy of an empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

struct ClassificationReport {
  std::vector<MetricRow> rows;
  double accuracy = 0.0;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
  std::int64_t total_support = 0;
  bool zero_division = false;

  /// Fixed-point text table, 2 decimals, per-class rows then accuracy /
  /// macro avg / weighted avg.
  std::string render() const {
    std::size_t name_width = 12;
    for (const auto& r : rows) name_width = std::max(name_width, r.class_name.size());
    std::ostringstream os;
    auto pad = [&os, name_width](const std::string& name) {
      for (std::size_t i = name.size(); i < name_width; ++i) os << ' ';
      os << name;
    };
    auto cell = [&os](const std::string& s) {
      for (std::size_t i = s.size(); i < 10; ++i) os << ' ';
      os << s;
    };
    pad("");
    cell("precision");
    cell("recall");
    cell("f1-score");
    cell("support");
    os << "\n\n";
    for (const auto& r : rows) {
      pad(r.class_name);
      cell(format_fixed(r.precision, 2));
      cell(format_fixed(r.recall, 2));
      cell(format_fixed(r.f1, 2));
      cell(std::to_string(r.support));
      os << "\n";
    }
    os << "\n";
    pad("accuracy");
    cell("");
    cell("");
    cell(format_fixed(accuracy, 2));
    cell(std::to_string(total_support));
    os << "\n";
    pad("macro avg");
    cell(format_fixed(macro_precision, 2));
    cell(format_fixed(macro_recall, 2));
    cell(format_fixed(macro_f1, 2));
    cell(std::to_string(total_support));
    os << "\n";
    pad("weighted avg");
    cell(format_fixed(weighted_precision, 2));
    cell(format_fixed(weighted_recall, 2));
    cell(format_fixed(weighted_f1, 2));
    cell(std::to_string(total_support));
    os << "\n";
    if (zero_division) os << "\nnote: metrics with a zero denominator are reported as 0.00\n";
    return os.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& r : rows) {
      per_class[r.class_name] = {{"precision", r.precision},
                                 {"recall", r.recall},
                                 {"f1", r.f1},
                                 {"support", r.support},
                                 {"zero_division", r.zero_division}};
    }
    return nlohmann::json{
        {"classes", per_class},
        {"accuracy", accuracy},
        {"macro", {{"precision", macro_precision}, {"recall", macro_recall}, {"f1", macro_f1}}},
        {"weighted",
         {{"precision", weighted_precision}, {"recall", weighted_recall}, {"f1", weighted_f1}}},
        {"total_support", total_support},
        {"zero_division", zero_division}};
  }
};

/// Per-class rows plus accuracy, unweighted macro averages and
/// support-weighted averages.
inline ClassificationReport classification_report(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw EmptyMatrix("classification report of an empty confusion matrix");
  ClassificationReport report;
  report.rows = precision_recall_f1_support(cm);
  report.accuracy = accuracy(cm);
  report.total_support = cm.total();
  const double k = static_cast<double>(report.rows.size());
  for (const auto& r : report.rows) {
    report.macro_precision += r.precision / k;
    report.macro_recall += r.recall / k;
    report.macro_f1 += r.f1 / k;
    const double w = static_cast<double>(r.support) / static_cast<double>(report.total_support);
    report.weighted_precision += w * r.precision;
    report.weighted_recall += w * r.recall;
    report.weighted_f1 += w * r.f1;
    report.zero_division = report.zero_division || r.zero_division;
  }
  return report;
}

}  // namespace cxr
