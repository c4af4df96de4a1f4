#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxr/cascade.hpp"
#include "cxr/dataio.hpp"
#include "cxr/errors.hpp"
#include "cxr/features.hpp"
#include "cxr/manifest.hpp"
#include "cxr/metrics.hpp"
#include "cxr/modelspec.hpp"
#include "cxr/train.hpp"

namespace cxr {

enum class ExperimentMode { one_shot, stage1, stage2, cascade };

inline const char* to_string(ExperimentMode m) {
  switch (m) {
    case ExperimentMode::one_shot: return "one_shot";
    case ExperimentMode::stage1: return "stage1";
    case ExperimentMode::stage2: return "stage2";
    case ExperimentMode::cascade: return "cascade";
  }
  return "?";
}

/// Accepts both the CLI spelling ("one-shot") and the file spelling.
inline ExperimentMode experiment_mode_from_string(const std::string& s) {
  if (s == "one_shot" || s == "one-shot") return ExperimentMode::one_shot;
  if (s == "stage1") return ExperimentMode::stage1;
  if (s == "stage2") return ExperimentMode::stage2;
  if (s == "cascade") return ExperimentMode::cascade;
  throw ConfigInvalid("unknown experiment mode: " + s);
}

struct ModelChoice {
  enum class Type { baseline, transfer };
  Type type = Type::baseline;
  Shape3 input_shape{64, 64, 1};   // image-input models
  int hidden = 48;                 // transfer-head width
  nlohmann::json backbone;         // feature extractor description; null -> toy default
};

/// Everything one experiment run needs; fully serializable so runs are
/// archivable and reproducible from (config, seed).
struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::one_shot;
  std::string data_root;      // class-per-folder tree to scan, or
  std::string manifest_path;  // an existing manifest CSV
  std::string dataset_name = "dataset";
  int n_per_class = 0;        // 0 = keep every sample
  double test_fraction = 0.2;
  double val_fraction = 0.25;
  int stage1_per_side = 0;    // 0 = as many as the class counts allow
  ModelChoice model;
  TrainConfig train;          // seed field unused here; the root seed governs
  int k = 1;                  // 1 = plain train/val split, >= 2 = k-fold CV
  std::uint64_t seed = 0;
  std::string output_dir;

  void validate() const {
    if (data_root.empty() && manifest_path.empty())
      throw ConfigInvalid("config needs data_root or manifest");
    if (output_dir.empty()) throw ConfigInvalid("config needs output_dir");
    if (k < 1) throw ConfigInvalid("k must be >= 1");
    if (!(test_fraction > 0.0 && test_fraction < 1.0) ||
        !(val_fraction > 0.0 && val_fraction < 1.0))
      throw ConfigInvalid("fractions must be in (0,1)");
    if (train.epochs <= 0 || train.batch_size <= 0 || !(train.learning_rate > 0.0))
      throw ConfigInvalid("train config must have positive epochs, batch_size, learning_rate");
  }

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"mode", to_string(mode)},
        {"data_root", data_root},
        {"manifest", manifest_path},
        {"dataset_name", dataset_name},
        {"n_per_class", n_per_class},
        {"test_fraction", test_fraction},
        {"val_fraction", val_fraction},
        {"stage1_per_side", stage1_per_side},
        {"model",
         {{"type", model.type == ModelChoice::Type::baseline ? "baseline" : "transfer"},
          {"input_shape", {model.input_shape.h, model.input_shape.w, model.input_shape.c}},
          {"hidden", model.hidden},
          {"backbone", model.backbone}}},
        {"train",
         {{"epochs", train.epochs},
          {"batch_size", train.batch_size},
          {"learning_rate", train.learning_rate}}},
        {"k", k},
        {"seed", seed},
        {"output_dir", output_dir}};
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    try {
      ExperimentConfig c;
      c.mode = experiment_mode_from_string(j.value("mode", "one_shot"));
      c.data_root = j.value("data_root", "");
      c.manifest_path = j.value("manifest", "");
      c.dataset_name = j.value("dataset_name", "dataset");
      c.n_per_class = j.value("n_per_class", 0);
      c.test_fraction = j.value("test_fraction", 0.2);
      c.val_fraction = j.value("val_fraction", 0.25);
      c.stage1_per_side = j.value("stage1_per_side", 0);
      if (j.contains("model")) {
        const auto& m = j.at("model");
        const std::string type = m.value("type", "baseline");
        if (type == "baseline") {
          c.model.type = ModelChoice::Type::baseline;
        } else if (type == "transfer") {
          c.model.type = ModelChoice::Type::transfer;
        } else {
          throw ConfigInvalid("unknown model type: " + type);
        }
        if (m.contains("input_shape")) {
          c.model.input_shape = Shape3{m.at("input_shape").at(0).get<int>(),
                                       m.at("input_shape").at(1).get<int>(),
                                       m.at("input_shape").at(2).get<int>()};
        }
        c.model.hidden = m.value("hidden", 48);
        if (m.contains("backbone")) c.model.backbone = m.at("backbone");
      }
      if (j.contains("train")) {
        const auto& t = j.at("train");
        c.train.epochs = t.value("epochs", 10);
        c.train.batch_size = t.value("batch_size", 32);
        c.train.learning_rate = t.value("learning_rate", 0.05);
      }
      c.k = j.value("k", 1);
      c.seed = j.value("seed", std::uint64_t{0});
      c.output_dir = j.value("output_dir", "");
      return c;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigInvalid(std::string("malformed experiment config: ") + e.what());
    }
  }

  static ExperimentConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigInvalid("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigInvalid("config is not valid JSON: " + path.string() + " (" + e.what() + ")");
    }
    return from_json(j);
  }
};

struct FoldOutcome {
  int fold = 1;
  double test_accuracy = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  TrainingHistory history;         // single-model modes; stage1 history for cascade
  TrainingHistory history_stage2;  // cascade only
  std::vector<FoldOutcome> folds;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  std::int64_t params_total = 0;
  std::int64_t params_trainable = 0;
  double duration_seconds = 0.0;

  std::string method_name() const {
    std::string model = config.model.type == ModelChoice::Type::baseline ? "baseline_cnn"
                                                                         : "transfer_head";
    return std::string(to_string(config.mode)) + "/" + model;
  }
};

/// Bit-exact history CSV: header `fold,epoch,loss,accuracy,val_loss,
/// val_accuracy`, floats at 6 significant digits, LF endings.
inline void write_history_csv(const TrainingHistory& history, const std::filesystem::path& path) {
  if (history.rows.empty()) throw ConfigInvalid("refusing to write an empty training history");
  std::vector<std::vector<std::string>> rows;
  rows.reserve(history.rows.size());
  for (const auto& r : history.rows) {
    rows.push_back({std::to_string(r.fold), std::to_string(r.epoch), format_sig6(r.loss),
                    format_sig6(r.accuracy), format_sig6(r.val_loss),
                    format_sig6(r.val_accuracy)});
  }
  write_csv(path, {"fold", "epoch", "loss", "accuracy", "val_loss", "val_accuracy"}, rows);
}

inline TrainingHistory read_history_csv(const std::filesystem::path& path) {
  CsvTable table = read_csv(path);
  const std::vector<std::string> expected = {"fold",     "epoch",    "loss",
                                             "accuracy", "val_loss", "val_accuracy"};
  if (table.header != expected) throw ParseFailure("unexpected history header in " + path.string());
  TrainingHistory history;
  for (const auto& row : table.rows) {
    history.rows.push_back(HistoryRow{static_cast<int>(parse_int(row[0])),
                                      static_cast<int>(parse_int(row[1])), parse_double(row[2]),
                                      parse_double(row[3]), parse_double(row[4]),
                                      parse_double(row[5])});
  }
  return history;
}

/// Exclusive-output-directory guard: a `.cxrpipe.lock` file created O_EXCL.
/// A second writer aiming at the same directory fails fast instead of
/// interleaving artifacts.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    path_ = dir / ".cxrpipe.lock";
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw IoFailure("output directory is locked by another run (remove " + path_.string() +
                      " if stale)");
  }
  ~OutputLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      std::filesystem::remove(path_, ec);
    }
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

namespace detail {

struct TaskData {
  DatasetManifest pool;  // training pool for the task's schema
  DatasetManifest test;  // holdout remapped to the task's schema
};

inline std::size_t auto_stage1_per_side(const DatasetManifest& pool) {
  std::size_t normal_n = 0, min_disease = SIZE_MAX;
  for (const auto& [cls, n] : pool.class_counts()) {
    if (cls == kNormalClass) normal_n = n;
    else min_disease = std::min(min_disease, n);
  }
  return std::min(normal_n, 3 * min_disease);
}

inline void assert_no_leakage(const DatasetManifest& pool, const DatasetManifest& test) {
  auto test_ids = test.id_set();
  for (const auto& s : pool.samples())
    if (test_ids.count(s.id))
      throw Error("holdout leakage detected: sample '" + s.id + "' is in a training pool");
}

inline std::shared_ptr<const FeatureExtractor> make_extractor(const ModelChoice& model) {
  if (model.type != ModelChoice::Type::transfer) return nullptr;
  if (model.backbone.is_null() || model.backbone.empty())
    return std::make_shared<ToyBackbone>();
  return FeatureExtractor::from_json(model.backbone);
}

inline ModelSpec make_spec(const ModelChoice& model, const LabelSchema& schema, HeadMode head,
                           const std::shared_ptr<const FeatureExtractor>& extractor) {
  if (model.type == ModelChoice::Type::baseline)
    return build_baseline_cnn(schema, head, model.input_shape);
  return build_transfer_head(extractor->feature_dim(), schema, head, model.hidden);
}

struct TrainedStage {
  std::vector<TrainedModel> fold_models;
  TrainingHistory history;
};

/// Fits one model per fold (one model total when k == 1); fold f trains on
/// the other folds and validates on fold f.
inline TrainedStage train_stage(const DatasetManifest& pool, const ExperimentConfig& config,
                                const ModelSpec& spec,
                                const std::shared_ptr<const FeatureExtractor>& extractor,
                                LossKind loss, std::uint64_t stage_seed) {
  TrainedStage stage;
  TrainConfig tc = config.train;
  tc.loss = loss;
  if (config.k == 1) {
    SplitResult split = split_train_val(pool, config.val_fraction, derive_seed(stage_seed, "trainval"));
    tc.seed = derive_seed(stage_seed, "fit", 1);
    auto [model, history] = fit(spec, split.train, split.held_out, tc, extractor, 1);
    stage.fold_models.push_back(std::move(model));
    stage.history = std::move(history);
    return stage;
  }
  FoldPlan plan = make_folds(pool, config.k, derive_seed(stage_seed, "folds"));
  for (int f = 0; f < config.k; ++f) {
    DatasetManifest train_f = fold_training_slice(pool, plan, f);
    DatasetManifest val_f = fold_validation_slice(pool, plan, f);
    tc.seed = derive_seed(stage_seed, "fit", static_cast<std::uint64_t>(f + 1));
    auto [model, history] = fit(spec, train_f, val_f, tc, extractor, f + 1);
    stage.fold_models.push_back(std::move(model));
    stage.history.append(history);
  }
  return stage;
}

inline void write_report_files(const ConfusionMatrix& cm, const ClassificationReport& report,
                               const std::filesystem::path& dir, const std::string& tag) {
  cm.save_csv(dir / ("confusion_" + tag + ".csv"));
  std::ofstream out(dir / ("report_" + tag + ".txt"), std::ios::binary);
  if (!out) throw IoFailure("cannot write report_" + tag + ".txt");
  out << report.render();
  std::ofstream js(dir / ("report_" + tag + ".json"), std::ios::binary);
  js << report.to_json().dump(2) << "\n";
}

inline void write_single_model_predictions(const TrainedModel& model, const DatasetManifest& test,
                                           const std::filesystem::path& path) {
  auto proba = model.predict_proba(test);
  const LabelSchema& schema = model.schema();
  std::vector<std::string> header = {"id", "true_label", "pred_label"};
  if (schema.stage() == SchemaStage::stage1_binary) {
    header.push_back("p_disease");
  } else {
    for (const auto& c : schema.encoded_order()) header.push_back("p_" + c);
  }
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::vector<std::string> row = {test.samples()[i].id, test.samples()[i].label,
                                    label_from_proba(schema, proba[i])};
    for (double v : proba[i]) row.push_back(format_sig6(v));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

}  // namespace detail

struct ComparisonRow {
  std::string method;
  std::string dataset;
  std::string time_seconds;  // preformatted; annotation rows pass through
  std::string accuracy;      // percent, 1 decimal
  std::string parameters;
};

inline ComparisonRow comparison_row(const ExperimentResult& result) {
  return ComparisonRow{result.method_name(), result.config.dataset_name,
                       format_fixed(result.duration_seconds, 2),
                       format_fixed(result.accuracy_mean * 100.0, 1),
                       std::to_string(result.params_total)};
}

/// Text table in the resources/attributes style: method, dataset, wall-clock
/// seconds, accuracy (percent, 1 decimal) and parameter count.
inline std::string render_comparison_table(const std::vector<ComparisonRow>& rows) {
  std::vector<std::vector<std::string>> cells = {
      {"method", "dataset", "time_s", "accuracy", "parameters"}};
  for (const auto& r : rows) cells.push_back({r.method, r.dataset, r.time_seconds, r.accuracy, r.parameters});
  std::vector<std::size_t> width(5, 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 5; ++c) {
      out += row[c];
      if (c + 1 < 5) out.append(width[c] - row[c].size() + 2, ' ');
    }
    out += '\n';
  }
  return out;
}

inline void write_comparison_csv(const std::vector<ComparisonRow>& rows,
                                 const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) cells.push_back({r.method, r.dataset, r.time_seconds, r.accuracy, r.parameters});
  write_csv(path, {"method", "dataset", "time_s", "accuracy", "parameters"}, cells);
}

inline std::vector<ComparisonRow> read_comparison_csv(const std::filesystem::path& path) {
  CsvTable table = read_csv(path);
  const std::vector<std::string> expected = {"method", "dataset", "time_s", "accuracy",
                                             "parameters"};
  if (table.header != expected)
    throw ParseFailure("unexpected comparison header in " + path.string());
  std::vector<ComparisonRow> rows;
  for (const auto& r : table.rows) rows.push_back(ComparisonRow{r[0], r[1], r[2], r[3], r[4]});
  return rows;
}

/// Runs one experiment end to end: ingest -> sample -> holdout split ->
/// (CV or plain) training -> holdout evaluation -> artifacts. Every random
/// decision derives from config.seed; every artifact except timing.json and
/// comparison.csv is byte-identical across reruns.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  namespace fs = std::filesystem;
  const fs::path out_dir(config.output_dir);
  OutputLock lock(out_dir);

  // Base 4-class manifest.
  DatasetManifest base = config.manifest_path.empty()
                             ? scan_directory(config.data_root, LabelSchema::multiclass4())
                             : DatasetManifest::load_csv(config.manifest_path);
  if (base.schema().stage() != SchemaStage::multiclass4)
    throw ConfigInvalid("experiments start from a 4-class manifest");
  if (config.n_per_class > 0)
    base = sample_balanced(base, static_cast<std::size_t>(config.n_per_class),
                           derive_seed(config.seed, "sample"));

  SplitResult holdout = split_holdout(base, config.test_fraction, derive_seed(config.seed, "holdout"));

  ExperimentResult result;
  result.config = config;

  const bool is_cascade = config.mode == ExperimentMode::cascade;
  const bool is_stage1 = config.mode == ExperimentMode::stage1;

  // Task datasets under the mode's schema.
  std::optional<detail::TaskData> task;
  std::optional<detail::TaskData> task2;  // cascade: stage2
  switch (config.mode) {
    case ExperimentMode::one_shot:
      task = detail::TaskData{holdout.train, holdout.held_out};
      break;
    case ExperimentMode::stage1: {
      const std::size_t per_side = config.stage1_per_side > 0
                                       ? static_cast<std::size_t>(config.stage1_per_side)
                                       : detail::auto_stage1_per_side(holdout.train);
      task = detail::TaskData{
          build_stage1_dataset(holdout.train, per_side, derive_seed(config.seed, "stage1")),
          relabel_binary(holdout.held_out)};
      break;
    }
    case ExperimentMode::stage2:
      task = detail::TaskData{filter_stage2(holdout.train), filter_stage2(holdout.held_out)};
      break;
    case ExperimentMode::cascade: {
      const std::size_t per_side = config.stage1_per_side > 0
                                       ? static_cast<std::size_t>(config.stage1_per_side)
                                       : detail::auto_stage1_per_side(holdout.train);
      task = detail::TaskData{
          build_stage1_dataset(holdout.train, per_side, derive_seed(config.seed, "stage1")),
          holdout.held_out};
      task2 = detail::TaskData{filter_stage2(holdout.train), filter_stage2(holdout.held_out)};
      break;
    }
  }
  detail::assert_no_leakage(task->pool, holdout.held_out);
  if (task2) detail::assert_no_leakage(task2->pool, holdout.held_out);

  auto extractor = detail::make_extractor(config.model);

  if (!is_cascade) {
    const HeadMode head = is_stage1 ? HeadMode::binary : HeadMode::multiclass;
    const LossKind loss =
        is_stage1 ? LossKind::binary_cross_entropy : LossKind::categorical_cross_entropy;
    ModelSpec spec = detail::make_spec(config.model, task->pool.schema(), head, extractor);
    const ParamCount params = count_parameters(spec);
    result.params_total = params.total;
    result.params_trainable = params.trainable;

    detail::TrainedStage stage =
        detail::train_stage(task->pool, config, spec, extractor, loss, config.seed);
    result.history = std::move(stage.history);

    ConfusionMatrix pooled(task->test.schema());
    for (std::size_t f = 0; f < stage.fold_models.size(); ++f) {
      std::vector<std::string> truth;
      for (const auto& s : task->test.samples()) truth.push_back(s.label);
      ConfusionMatrix cm = confusion_matrix(
          truth, stage.fold_models[f].predict_labels(task->test), task->test.schema());
      result.folds.push_back(FoldOutcome{static_cast<int>(f) + 1, accuracy(cm)});
      pooled += cm;
    }
    write_history_csv(result.history, out_dir / "history.csv");
    detail::write_report_files(pooled, classification_report(pooled), out_dir,
                               to_string(config.mode));
    stage.fold_models.back().save(out_dir / "model.json");
    detail::write_single_model_predictions(stage.fold_models.back(), task->test,
                                           out_dir / "predictions.csv");
  } else {
    ModelSpec spec1 =
        detail::make_spec(config.model, task->pool.schema(), HeadMode::binary, extractor);
    ModelSpec spec2 =
        detail::make_spec(config.model, task2->pool.schema(), HeadMode::multiclass, extractor);
    const ParamCount p1 = count_parameters(spec1), p2 = count_parameters(spec2);
    result.params_total = p1.total + p2.total;
    result.params_trainable = p1.trainable + p2.trainable;

    detail::TrainedStage stage1 =
        detail::train_stage(task->pool, config, spec1, extractor, LossKind::binary_cross_entropy,
                            derive_seed(config.seed, "cascade_stage1"));
    detail::TrainedStage stage2 =
        detail::train_stage(task2->pool, config, spec2, extractor,
                            LossKind::categorical_cross_entropy,
                            derive_seed(config.seed, "cascade_stage2"));
    result.history = std::move(stage1.history);
    result.history_stage2 = std::move(stage2.history);

    ConfusionMatrix pooled(holdout.held_out.schema());
    ConfusionMatrix pooled_s1(LabelSchema::stage1_binary());
    ConfusionMatrix pooled_s2_oracle(task2->pool.schema());
    ConfusionMatrix pooled_s2_pipeline(task2->pool.schema());
    std::optional<CascadeEvaluation> last_eval;
    for (std::size_t f = 0; f < stage1.fold_models.size(); ++f) {
      auto s1 = std::make_shared<TrainedModel>(std::move(stage1.fold_models[f]));
      auto s2 = std::make_shared<TrainedModel>(std::move(stage2.fold_models[f]));
      CascadeModel cascade(s1, s2, RoutingPolicy{});
      CascadeEvaluation eval = evaluate_cascade(cascade, holdout.held_out);
      result.folds.push_back(FoldOutcome{static_cast<int>(f) + 1, eval.report.accuracy});
      pooled += eval.cm;
      pooled_s1 += eval.stage1_cm;
      pooled_s2_oracle += eval.stage2_oracle_cm;
      pooled_s2_pipeline += eval.stage2_pipeline_cm;
      if (f + 1 == stage1.fold_models.size()) {
        s1->save(out_dir / "model_stage1.json");
        s2->save(out_dir / "model_stage2.json");
        last_eval = std::move(eval);
      }
    }
    write_history_csv(result.history, out_dir / "history_stage1.csv");
    write_history_csv(result.history_stage2, out_dir / "history_stage2.csv");
    detail::write_report_files(pooled, classification_report(pooled), out_dir, "cascade");
    detail::write_report_files(pooled_s1, classification_report(pooled_s1), out_dir, "stage1");
    if (pooled_s2_oracle.total() > 0)
      detail::write_report_files(pooled_s2_oracle, classification_report(pooled_s2_oracle),
                                 out_dir, "stage2_oracle");
    if (pooled_s2_pipeline.total() > 0)
      detail::write_report_files(pooled_s2_pipeline, classification_report(pooled_s2_pipeline),
                                 out_dir, "stage2_pipeline");
    write_predictions_csv(holdout.held_out, last_eval->predictions,
                          last_eval->cm.schema(), out_dir / "predictions.csv");
  }

  double mean = 0.0;
  for (const auto& f : result.folds) mean += f.test_accuracy;
  mean /= static_cast<double>(result.folds.size());
  double var = 0.0;
  for (const auto& f : result.folds) var += (f.test_accuracy - mean) * (f.test_accuracy - mean);
  result.accuracy_mean = mean;
  result.accuracy_std = std::sqrt(var / static_cast<double>(result.folds.size()));
  result.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // config.snapshot + machine-readable result; wall clock kept out of
  // result.json so the deterministic artifact set stays byte-stable.
  {
    std::ofstream snap(out_dir / "config.snapshot", std::ios::binary);
    snap << config.to_json().dump(2) << "\n";
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : result.folds)
      folds.push_back({{"fold", f.fold}, {"test_accuracy", f.test_accuracy}});
    nlohmann::json rj{{"method", result.method_name()},
                      {"dataset", config.dataset_name},
                      {"mode", to_string(config.mode)},
                      {"folds", folds},
                      {"accuracy_mean", result.accuracy_mean},
                      {"accuracy_std", result.accuracy_std},
                      {"params_total", result.params_total},
                      {"params_trainable", result.params_trainable}};
    std::ofstream rf(out_dir / "result.json", std::ios::binary);
    rf << rj.dump(2) << "\n";
    std::ofstream tf(out_dir / "timing.json", std::ios::binary);
    tf << nlohmann::json{{"duration_seconds", result.duration_seconds}}.dump(2) << "\n";
    write_comparison_csv({comparison_row(result)}, out_dir / "comparison.csv");
  }
  return result;
}

/// Explicit-CV entry point: requires k >= 2 and otherwise behaves exactly
/// like run_experiment.
inline ExperimentResult run_cross_validation(const ExperimentConfig& config) {
  if (config.k < 2) throw InvalidK("cross-validation needs k >= 2");
  return run_experiment(config);
}

/// Rebuilds a comparison row from a finished run's output directory.
inline ComparisonRow load_result_row(const std::filesystem::path& dir) {
  std::ifstream rf(dir / "result.json");
  if (!rf) throw ParseFailure("no result.json under " + dir.string());
  nlohmann::json rj;
  try {
    rf >> rj;
  } catch (const nlohmann::json::exception& e) {
    throw ParseFailure("malformed result.json under " + dir.string() + ": " + e.what());
  }
  double duration = 0.0;
  std::ifstream tf(dir / "timing.json");
  if (tf) {
    nlohmann::json tj;
    try {
      tf >> tj;
      duration = tj.value("duration_seconds", 0.0);
    } catch (const nlohmann::json::exception&) {
      duration = 0.0;
    }
  }
  try {
    return ComparisonRow{rj.at("method").get<std::string>(), rj.at("dataset").get<std::string>(),
                         format_fixed(duration, 2),
                         format_fixed(rj.at("accuracy_mean").get<double>() * 100.0, 1),
                         std::to_string(rj.at("params_total").get<std::int64_t>())};
  } catch (const nlohmann::json::exception& e) {
    throw ParseFailure("incomplete result.json under " + dir.string() + ": " + e.what());
  }
}

}  // namespace cxr
