// cxrpipe: one-shot vs two-stage cascade X-ray classification pipelines.
//
// Exit codes: 0 success, 2 usage/config/input errors, 3 runtime computation
// failures (diverged training, inference failures).

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "cxr/cxr.hpp"

namespace fs = std::filesystem;

namespace {

/// Relative output paths resolve under $CXRPIPE_OUTPUT_ROOT when it is set.
fs::path resolve_out(const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("CXRPIPE_OUTPUT_ROOT")) return fs::path(root) / p;
  return p;
}

void print_class_counts(const cxr::DatasetManifest& manifest) {
  for (const auto& [cls, n] : manifest.class_counts())
    std::cout << "  " << cls << ": " << n << "\n";
  std::cout << "  total: " << manifest.size() << "\n";
}

struct TrainCli {
  std::string config_path;
  std::string mode;
  std::string out;
  std::string data_root;
  std::string manifest;
  int k = -1;
  long long seed = -1;
  int epochs = -1;
  int batch_size = -1;
  double learning_rate = -1.0;
  int n_per_class = -1;
};

cxr::ExperimentConfig resolve_train_config(const TrainCli& cli) {
  cxr::ExperimentConfig config = cxr::ExperimentConfig::load(cli.config_path);
  // flags win over config-file values
  if (!cli.mode.empty()) config.mode = cxr::experiment_mode_from_string(cli.mode);
  if (!cli.out.empty()) config.output_dir = resolve_out(cli.out).string();
  if (!cli.data_root.empty()) config.data_root = cli.data_root;
  if (!cli.manifest.empty()) config.manifest_path = cli.manifest;
  if (cli.k >= 0) config.k = cli.k;
  if (cli.seed >= 0) config.seed = static_cast<std::uint64_t>(cli.seed);
  if (cli.epochs > 0) config.train.epochs = cli.epochs;
  if (cli.batch_size > 0) config.train.batch_size = cli.batch_size;
  if (cli.learning_rate > 0) config.train.learning_rate = cli.learning_rate;
  if (cli.n_per_class >= 0) config.n_per_class = cli.n_per_class;
  if (!config.output_dir.empty()) config.output_dir = resolve_out(config.output_dir).string();
  return config;
}

int run(CLI::App& app, int argc, char** argv) {
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic pattern-stamped corpus");
  auto synth_cfg = std::make_shared<cxr::SynthConfig>();
  std::string synth_out;
  synth->add_option("--out", synth_out, "Corpus root directory")->required();
  synth->add_option("--per-class", synth_cfg->per_class, "Images per class (default 500)");
  synth->add_option("--size", synth_cfg->size, "Image side length (default 64)");
  synth->add_option("--noise", synth_cfg->noise, "Uniform pixel noise amplitude (default 0.1)");
  synth->add_option("--seed", synth_cfg->seed, "Corpus seed (default 7)");
  synth->callback([synth_cfg, &synth_out]() {
    const fs::path root = resolve_out(synth_out);
    cxr::generate_synthetic_corpus(root, *synth_cfg);
    std::cout << "wrote " << synth_cfg->classes.size() * synth_cfg->per_class << " images under "
              << root.string() << "\n";
  });

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Scan a class-per-folder tree into a manifest CSV");
  auto ingest_opts = std::make_shared<std::tuple<std::string, std::string, int, long long>>(
      "", "", 0, 0);
  ingest->add_option("--root", std::get<0>(*ingest_opts), "Dataset root directory")->required();
  ingest->add_option("--out", std::get<1>(*ingest_opts), "Output manifest CSV")->required();
  ingest->add_option("--n-per-class", std::get<2>(*ingest_opts),
                     "Balanced subsample size per class (0 = keep all)");
  ingest->add_option("--seed", std::get<3>(*ingest_opts), "Sampling seed");
  ingest->callback([ingest_opts]() {
    const auto& [root, out, n_per_class, seed] = *ingest_opts;
    std::vector<std::string> warnings;
    cxr::DatasetManifest manifest =
        cxr::scan_directory(root, cxr::LabelSchema::multiclass4(), &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    if (n_per_class > 0)
      manifest = cxr::sample_balanced(manifest, static_cast<std::size_t>(n_per_class),
                                      static_cast<std::uint64_t>(seed));
    const fs::path out_path = resolve_out(out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    manifest.save_csv(out_path);
    std::cout << "manifest: " << out_path.string() << "\n";
    print_class_counts(manifest);
  });

  // stats
  auto* stats = app.add_subcommand("stats", "Per-image channel stats and class distribution");
  auto stats_opts = std::make_shared<std::pair<std::string, std::string>>();
  stats->add_option("--manifest", stats_opts->first, "Manifest CSV")->required();
  stats->add_option("--out-dir", stats_opts->second, "Output directory")->required();
  stats->callback([stats_opts]() {
    cxr::DatasetManifest manifest = cxr::DatasetManifest::load_csv(stats_opts->first);
    const fs::path dir = resolve_out(stats_opts->second);
    fs::create_directories(dir);
    auto rows = cxr::scatter_table(manifest);
    cxr::write_scatter_csv(rows, dir / "stats.csv");
    cxr::write_distribution_csv(cxr::class_distribution(manifest), dir / "distribution.csv");
    std::cout << "wrote " << (dir / "stats.csv").string() << " (" << rows.size() << " rows) and "
              << (dir / "distribution.csv").string() << "\n";
  });

  // train
  auto* train = app.add_subcommand("train", "Run a training experiment from a config file");
  auto train_cli = std::make_shared<TrainCli>();
  train->add_option("--config", train_cli->config_path, "Experiment config JSON")->required();
  train->add_option("--mode", train_cli->mode, "one-shot | stage1 | stage2 | cascade");
  train->add_option("--k", train_cli->k, "Fold count (1 = plain split, >=2 = k-fold CV)");
  train->add_option("--seed", train_cli->seed, "Root seed");
  train->add_option("--out", train_cli->out, "Output directory");
  train->add_option("--data-root", train_cli->data_root, "Dataset root override");
  train->add_option("--manifest", train_cli->manifest, "Manifest CSV override");
  train->add_option("--epochs", train_cli->epochs, "Training epochs");
  train->add_option("--batch-size", train_cli->batch_size, "Minibatch size");
  train->add_option("--learning-rate", train_cli->learning_rate, "SGD learning rate");
  train->add_option("--n-per-class", train_cli->n_per_class, "Balanced subsample per class");
  train->callback([train_cli]() {
    cxr::ExperimentConfig config = resolve_train_config(*train_cli);
    cxr::ExperimentResult result = cxr::run_experiment(config);
    std::cout << "artifacts: " << config.output_dir << "\n";
    std::cout << "holdout accuracy: " << cxr::format_fixed(result.accuracy_mean, 4) << " (mean over "
              << result.folds.size() << (result.folds.size() == 1 ? " fold" : " folds")
              << ", std " << cxr::format_fixed(result.accuracy_std, 4) << ")\n";
  });

  // cascade
  auto* cascade = app.add_subcommand("cascade", "Evaluate a two-stage cascade from saved models");
  struct CascadeCli {
    std::string stage1, stage2, test, out;
    double threshold = 0.5;
    bool soft = false;
  };
  auto cascade_cli = std::make_shared<CascadeCli>();
  cascade->add_option("--stage1", cascade_cli->stage1, "Stage1 model JSON")->required();
  cascade->add_option("--stage2", cascade_cli->stage2, "Stage2 model JSON")->required();
  cascade->add_option("--test", cascade_cli->test, "4-class test manifest CSV")->required();
  cascade->add_option("--out", cascade_cli->out, "Output directory")->required();
  cascade->add_option("--threshold", cascade_cli->threshold,
                      "Disease routing threshold (default 0.5)");
  cascade->add_flag("--soft", cascade_cli->soft,
                    "Label by argmax of the composed distribution instead of hard routing");
  cascade->callback([cascade_cli]() {
    auto stage1 = std::make_shared<cxr::TrainedModel>(cxr::TrainedModel::load(cascade_cli->stage1));
    auto stage2 = std::make_shared<cxr::TrainedModel>(cxr::TrainedModel::load(cascade_cli->stage2));
    cxr::DatasetManifest test = cxr::DatasetManifest::load_csv(cascade_cli->test);
    cxr::RoutingPolicy policy;
    policy.mode = cascade_cli->soft ? cxr::RoutingPolicy::Mode::soft : cxr::RoutingPolicy::Mode::hard;
    policy.disease_threshold = cascade_cli->threshold;
    cxr::CascadeModel model(stage1, stage2, policy);

    const fs::path dir = resolve_out(cascade_cli->out);
    cxr::OutputLock lock(dir);
    cxr::CascadeEvaluation eval = cxr::evaluate_cascade(model, test);
    cxr::write_predictions_csv(test, eval.predictions, eval.cm.schema(), dir / "predictions.csv");
    eval.cm.save_csv(dir / "confusion_cascade.csv");
    eval.stage1_cm.save_csv(dir / "confusion_stage1.csv");
    eval.stage2_oracle_cm.save_csv(dir / "confusion_stage2_oracle.csv");
    eval.stage2_pipeline_cm.save_csv(dir / "confusion_stage2_pipeline.csv");
    auto dump_report = [&dir](const std::string& name, const cxr::ClassificationReport& report) {
      std::ofstream out(dir / name, std::ios::binary);
      out << report.render();
    };
    dump_report("report_cascade.txt", eval.report);
    dump_report("report_stage1.txt", eval.stage1_report);
    if (eval.stage2_oracle_report) dump_report("report_stage2_oracle.txt", *eval.stage2_oracle_report);
    if (eval.stage2_pipeline_report)
      dump_report("report_stage2_pipeline.txt", *eval.stage2_pipeline_report);
    std::cout << "artifacts: " << dir.string() << "\n";
    std::cout << "cascade accuracy: " << cxr::format_fixed(eval.report.accuracy, 4) << "\n";
  });

  // compare
  auto* compare = app.add_subcommand("compare", "Tabulate finished runs side by side");
  struct CompareCli {
    std::vector<std::string> result_dirs;
    std::string out;
    std::string annotations;
  };
  auto compare_cli = std::make_shared<CompareCli>();
  compare->add_option("dirs", compare_cli->result_dirs, "Experiment output directories")
      ->required()
      ->expected(-1);
  compare->add_option("--out", compare_cli->out, "Directory for comparison.csv")->required();
  compare->add_option("--annotations", compare_cli->annotations,
                      "Extra comparison rows (same CSV schema) appended to the table");
  compare->callback([compare_cli]() {
    std::vector<cxr::ComparisonRow> rows;
    for (const auto& dir : compare_cli->result_dirs)
      rows.push_back(cxr::load_result_row(dir));
    if (!compare_cli->annotations.empty())
      for (auto& row : cxr::read_comparison_csv(compare_cli->annotations))
        rows.push_back(std::move(row));
    const fs::path dir = resolve_out(compare_cli->out);
    fs::create_directories(dir);
    cxr::write_comparison_csv(rows, dir / "comparison.csv");
    std::cout << cxr::render_comparison_table(rows);
  });

  // report <kind>
  auto* report = app.add_subcommand("report", "Render figures from CSV artifacts");
  report->require_subcommand(1);
  struct ReportCli {
    std::string in, out, format = "png";
    bool per_class = false;
  };
  auto make_report_sub = [&](const char* name, const char* help) {
    auto* sub = report->add_subcommand(name, help);
    auto cli = std::make_shared<ReportCli>();
    sub->add_option("--in", cli->in, "Input CSV")->required();
    sub->add_option("--out", cli->out, "Output image path")->required();
    sub->add_option("--format", cli->format, "png (default) or svg");
    return std::make_pair(sub, cli);
  };
  auto [curves, curves_cli] = make_report_sub("curves", "Accuracy/loss curves from a history CSV");
  curves->callback([cli = curves_cli]() {
    cxr::render_curves(cli->in, resolve_out(cli->out), cxr::figure_format_from_string(cli->format));
    std::cout << "wrote " << resolve_out(cli->out).string() << "\n";
  });
  auto [heatmap, heatmap_cli] =
      make_report_sub("heatmap", "Annotated heatmap from a confusion-matrix CSV");
  heatmap->callback([cli = heatmap_cli]() {
    cxr::render_confusion_heatmap(cli->in, resolve_out(cli->out),
                                  cxr::figure_format_from_string(cli->format));
    std::cout << "wrote " << resolve_out(cli->out).string() << "\n";
  });
  auto [bars, bars_cli] = make_report_sub("bars", "Class-distribution bars from a label,count CSV");
  bars->callback([cli = bars_cli]() {
    cxr::render_distribution(cli->in, resolve_out(cli->out),
                             cxr::figure_format_from_string(cli->format));
    std::cout << "wrote " << resolve_out(cli->out).string() << "\n";
  });
  auto [scatter, scatter_cli] = make_report_sub("scatter", "Mean-vs-std scatter from a stats CSV");
  scatter->add_flag("--per-class", scatter_cli->per_class, "One panel per class");
  scatter->callback([cli = scatter_cli]() {
    cxr::render_scatter(cli->in, resolve_out(cli->out), cli->per_class,
                        cxr::figure_format_from_string(cli->format));
    std::cout << "wrote " << resolve_out(cli->out).string() << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-shot vs two-stage cascade X-ray classification pipelines"};
  try {
    return run(app, argc, argv);
  } catch (const cxr::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const cxr::ComputeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
