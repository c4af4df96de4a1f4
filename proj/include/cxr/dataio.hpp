#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cxr/errors.hpp"
#include "cxr/image.hpp"
#include "cxr/manifest.hpp"
#include "cxr/rng.hpp"

namespace cxr {

/// Outcome of a disjoint/exhaustive stratified split.
struct SplitResult {
  DatasetManifest train;
  DatasetManifest held_out;
  std::uint64_t seed = 0;
  double fraction = 0.0;
};

/// Stratified k-fold assignment, sample id -> fold index in [0, k).
struct FoldPlan {
  int k = 0;
  std::unordered_map<std::string, int> assignments;

  int fold_of(const std::string& id) const {
    auto it = assignments.find(id);
    if (it == assignments.end()) throw UnknownLabel("sample id not in fold plan: " + id);
    return it->second;
  }

  /// CSV `id,fold`, rows in manifest order.
  void save_csv(const std::filesystem::path& path, const DatasetManifest& manifest) const {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(manifest.size());
    for (const auto& s : manifest.samples())
      rows.push_back({s.id, std::to_string(fold_of(s.id))});
    write_csv(path, {"id", "fold"}, rows);
  }

  static FoldPlan load_csv(const std::filesystem::path& path) {
    CsvTable table = read_csv(path);
    if (table.header != std::vector<std::string>{"id", "fold"})
      throw ParseFailure("unexpected fold plan header in " + path.string());
    FoldPlan plan;
    int max_fold = -1;
    for (const auto& row : table.rows) {
      int fold = static_cast<int>(parse_int(row[1]));
      plan.assignments[row[0]] = fold;
      max_fold = std::max(max_fold, fold);
    }
    plan.k = max_fold + 1;
    return plan;
  }
};

namespace detail {

/// Round-half-up, the documented stratified-count rule: round(1500 * 0.2) = 300.
inline std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

inline std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace detail

/// Builds a manifest from a class-per-folder image tree. Every schema class
/// must have a directory named after it directly under `root`; decodable
/// png/jpg/jpeg files become samples labeled by their folder, ordered
/// lexicographically by path. Undecodable files are skipped and reported
/// through `warnings` when given.
inline DatasetManifest scan_directory(const std::filesystem::path& root, const LabelSchema& schema,
                                      std::vector<std::string>* warnings = nullptr) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root))
    throw MissingClassDirectory("dataset root is not a directory: " + root.string());
  std::vector<Sample> samples;
  for (const auto& cls : schema.classes()) {
    fs::path class_dir = root / cls;
    if (!fs::is_directory(class_dir))
      throw MissingClassDirectory("no directory for class '" + cls + "' under " + root.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dir)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      if (!try_decode_image(file.string())) {
        if (warnings) warnings->push_back("skipped undecodable file: " + file.string());
        continue;
      }
      samples.push_back(Sample{fs::relative(file, root).generic_string(), file.string(), cls, ""});
    }
  }
  if (samples.empty()) throw EmptyDataset("no decodable images under " + root.string());
  return DatasetManifest(schema, std::move(samples));
}

/// Draws exactly `n_per_class` samples per class without replacement,
/// deterministic for a fixed seed; output keeps manifest order.
inline DatasetManifest sample_balanced(const DatasetManifest& manifest, std::size_t n_per_class,
                                       std::uint64_t seed) {
  std::vector<std::size_t> chosen;
  for (const auto& cls : manifest.schema().classes()) {
    auto pool = manifest.indices_of(cls);
    if (pool.size() < n_per_class)
      throw InsufficientSamples("class '" + cls + "' has " + std::to_string(pool.size()) +
                                " samples, requested " + std::to_string(n_per_class));
    Rng rng(derive_seed(seed, "sample_balanced:" + cls));
    for (std::size_t pick : rng.choose(pool.size(), n_per_class)) chosen.push_back(pool[pick]);
  }
  return manifest.subset(detail::sorted(std::move(chosen)));
}

namespace detail {

inline SplitResult stratified_split(const DatasetManifest& manifest, double fraction,
                                    std::uint64_t seed, const char* tag) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw InvalidFraction("split fraction must be in (0,1), got " + std::to_string(fraction));
  std::vector<std::size_t> held;
  std::vector<bool> is_held(manifest.size(), false);
  for (const auto& cls : manifest.schema().classes()) {
    auto pool = manifest.indices_of(cls);
    if (pool.size() < 2)
      throw ClassTooSmall("class '" + cls + "' has " + std::to_string(pool.size()) +
                          " samples; need at least 2 to split");
    std::size_t take = round_half_up(static_cast<double>(pool.size()) * fraction);
    Rng rng(derive_seed(seed, std::string(tag) + ":" + cls));
    for (std::size_t pick : rng.choose(pool.size(), take)) is_held[pool[pick]] = true;
  }
  std::vector<std::size_t> train_idx, held_idx;
  for (std::size_t i = 0; i < manifest.size(); ++i)
    (is_held[i] ? held_idx : train_idx).push_back(i);
  return SplitResult{manifest.subset(train_idx), manifest.subset(held_idx), seed, fraction};
}

}  // namespace detail

/// Reserves a stratified test fraction. Held-out count per class is
/// round-half-up(class_count * test_fraction); parts are disjoint and
/// exhaustive by id and keep manifest order.
inline SplitResult split_holdout(const DatasetManifest& manifest, double test_fraction,
                                 std::uint64_t seed) {
  return detail::stratified_split(manifest, test_fraction, seed, "holdout");
}

/// Same contract as split_holdout, used for the 75/25 train/validation split.
inline SplitResult split_train_val(const DatasetManifest& train, double val_fraction,
                                   std::uint64_t seed) {
  return detail::stratified_split(train, val_fraction, seed, "trainval");
}

/// Stratified k-fold plan: per class, shuffled samples are dealt round-robin,
/// so per-class fold sizes differ by at most 1 and every sample lands in
/// exactly one fold.
inline FoldPlan make_folds(const DatasetManifest& manifest, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidK("fold count must be >= 2, got " + std::to_string(k));
  FoldPlan plan;
  plan.k = k;
  for (const auto& cls : manifest.schema().classes()) {
    auto pool = manifest.indices_of(cls);
    if (pool.size() < static_cast<std::size_t>(k))
      throw ClassTooSmall("class '" + cls + "' has " + std::to_string(pool.size()) +
                          " samples; need at least k=" + std::to_string(k));
    Rng rng(derive_seed(seed, "folds:" + cls));
    rng.shuffle(pool);
    for (std::size_t j = 0; j < pool.size(); ++j)
      plan.assignments[manifest.samples()[pool[j]].id] = static_cast<int>(j % k);
  }
  return plan;
}

/// Manifest rows whose fold equals / differs from `fold`, in manifest order.
inline DatasetManifest fold_validation_slice(const DatasetManifest& manifest, const FoldPlan& plan,
                                             int fold) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < manifest.size(); ++i)
    if (plan.fold_of(manifest.samples()[i].id) == fold) idx.push_back(i);
  return manifest.subset(idx);
}

inline DatasetManifest fold_training_slice(const DatasetManifest& manifest, const FoldPlan& plan,
                                           int fold) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < manifest.size(); ++i)
    if (plan.fold_of(manifest.samples()[i].id) != fold) idx.push_back(i);
  return manifest.subset(idx);
}

/// Balanced normal-vs-disease dataset: `n_per_side` normal samples plus
/// `n_per_side` relabeled disease samples drawn equally from the disease
/// classes (remainder goes to the earliest classes in schema order). The
/// original class is kept as sample metadata.
inline DatasetManifest build_stage1_dataset(const DatasetManifest& manifest,
                                            std::size_t n_per_side, std::uint64_t seed) {
  if (manifest.schema().stage() != SchemaStage::multiclass4)
    throw SchemaMismatch("stage1 dataset must be built from a 4-class manifest");
  if (!manifest.schema().contains(kNormalClass))
    throw SchemaMismatch("source schema has no '" + kNormalClass + "' class");

  std::vector<std::string> disease_classes;
  for (const auto& cls : manifest.schema().classes())
    if (cls != kNormalClass) disease_classes.push_back(cls);

  std::map<std::string, std::size_t> quota;
  quota[kNormalClass] = n_per_side;
  const std::size_t base = n_per_side / disease_classes.size();
  std::size_t remainder = n_per_side % disease_classes.size();
  for (const auto& cls : disease_classes) {
    quota[cls] = base + (remainder > 0 ? 1 : 0);
    if (remainder > 0) --remainder;
  }

  std::vector<std::size_t> chosen;
  for (const auto& cls : manifest.schema().classes()) {
    auto pool = manifest.indices_of(cls);
    if (pool.size() < quota[cls])
      throw InsufficientSamples("class '" + cls + "' has " + std::to_string(pool.size()) +
                                " samples, stage1 needs " + std::to_string(quota[cls]));
    Rng rng(derive_seed(seed, "stage1:" + cls));
    for (std::size_t pick : rng.choose(pool.size(), quota[cls])) chosen.push_back(pool[pick]);
  }

  std::vector<Sample> rows;
  rows.reserve(chosen.size());
  for (std::size_t i : detail::sorted(std::move(chosen))) {
    Sample s = manifest.samples()[i];
    s.orig_label = s.label;
    s.label = (s.label == kNormalClass) ? kNormalClass : kDiseaseClass;
    rows.push_back(std::move(s));
  }
  return DatasetManifest(LabelSchema::stage1_binary(), std::move(rows));
}

/// Relabels every sample of a 4-class manifest to normal/disease without
/// sampling; used to score stage1 models on an untouched holdout.
inline DatasetManifest relabel_binary(const DatasetManifest& manifest) {
  if (manifest.schema().stage() != SchemaStage::multiclass4)
    throw SchemaMismatch("binary relabeling expects a 4-class manifest");
  std::vector<Sample> rows;
  rows.reserve(manifest.size());
  for (Sample s : manifest.samples()) {
    s.orig_label = s.label;
    s.label = (s.label == kNormalClass) ? kNormalClass : kDiseaseClass;
    rows.push_back(std::move(s));
  }
  return DatasetManifest(LabelSchema::stage1_binary(), std::move(rows));
}

/// Keeps only disease-class samples, under the 3-class schema, order preserved.
inline DatasetManifest filter_stage2(const DatasetManifest& manifest) {
  if (manifest.schema().stage() != SchemaStage::multiclass4)
    throw SchemaMismatch("stage2 filter expects a 4-class manifest");
  std::vector<std::string> disease_classes;
  for (const auto& cls : manifest.schema().classes())
    if (cls != kNormalClass) disease_classes.push_back(cls);
  std::vector<Sample> rows;
  for (const auto& s : manifest.samples())
    if (s.label != kNormalClass) rows.push_back(s);
  return DatasetManifest(LabelSchema::stage2_disease(disease_classes), std::move(rows));
}

}  // namespace cxr
