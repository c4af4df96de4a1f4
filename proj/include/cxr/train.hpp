#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxr/classifier.hpp"
#include "cxr/errors.hpp"
#include "cxr/features.hpp"
#include "cxr/image.hpp"
#include "cxr/manifest.hpp"
#include "cxr/modelspec.hpp"
#include "cxr/nn.hpp"
#include "cxr/rng.hpp"

namespace cxr {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 0.05;
  LossKind loss = LossKind::categorical_cross_entropy;
  std::uint64_t seed = 0;
};

struct HistoryRow {
  int fold = 1;
  int epoch = 1;
  double loss = 0.0;
  double accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

/// Per-epoch training log; one row per (fold, epoch).
struct TrainingHistory {
  std::vector<HistoryRow> rows;

  void append(const TrainingHistory& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  }
};

namespace detail {

inline const char* kBase64Chars =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const unsigned char* data, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    unsigned int v = data[i] << 16;
    if (i + 1 < len) v |= data[i + 1] << 8;
    if (i + 2 < len) v |= data[i + 2];
    out.push_back(kBase64Chars[(v >> 18) & 63]);
    out.push_back(kBase64Chars[(v >> 12) & 63]);
    out.push_back(i + 1 < len ? kBase64Chars[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < len ? kBase64Chars[v & 63] : '=');
  }
  return out;
}

inline std::vector<unsigned char> base64_decode(const std::string& text) {
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  unsigned int v = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    int d = value_of(c);
    if (d < 0) throw ParseFailure("invalid base64 payload");
    v = (v << 6) | static_cast<unsigned int>(d);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((v >> bits) & 0xff));
    }
  }
  return out;
}

inline nlohmann::json schema_to_json(const LabelSchema& schema) {
  return {{"stage", to_string(schema.stage())}, {"classes", schema.classes()}};
}

inline LabelSchema schema_from_json(const nlohmann::json& j) {
  return LabelSchema(schema_stage_from_string(j.at("stage").get<std::string>()),
                     j.at("classes").get<std::vector<std::string>>());
}

}  // namespace detail

/// An opaque fitted predictor: compiled network + schema + (for transfer
/// heads) the frozen feature source. Inference is deterministic and
/// reentrant; nothing here mutates after fit returns.
class TrainedModel final : public ProbabilityClassifier {
 public:
  TrainedModel(ModelSpec spec, LabelSchema schema,
               std::shared_ptr<const FeatureExtractor> extractor = nullptr)
      : spec_(std::move(spec)), schema_(std::move(schema)), net_(spec_),
        extractor_(std::move(extractor)) {
    validate_head(spec_, schema_);
    if (extractor_ && extractor_->feature_dim() != spec_.input_shape.c)
      throw ShapeMismatch("feature extractor dim " + std::to_string(extractor_->feature_dim()) +
                          " does not match model input width " +
                          std::to_string(spec_.input_shape.c));
  }

  const LabelSchema& schema() const override { return schema_; }
  const ModelSpec& spec() const { return spec_; }
  Network<float>& network() { return net_; }
  const Network<float>& network() const { return net_; }
  const std::shared_ptr<const FeatureExtractor>& extractor() const { return extractor_; }

  /// Decoded inputs for a manifest slice, one column per sample.
  MatX<float> input_matrix(const DatasetManifest& manifest) const {
    std::vector<Image> images;
    std::vector<std::string> ids;
    images.reserve(manifest.size());
    for (const auto& s : manifest.samples()) {
      try {
        images.push_back(extractor_ ? decode_image(s.filepath)
                                    : load_for_input(s.filepath, spec_.input_shape.h,
                                                     spec_.input_shape.w, spec_.input_shape.c));
      } catch (const DecodeFailure& e) {
        throw DecodeFailure("sample '" + s.id + "': " + e.what());
      }
      ids.push_back(s.id);
    }
    return to_columns(images, ids);
  }

  MatX<float> to_columns(const std::vector<Image>& images,
                         const std::vector<std::string>& ids) const {
    if (extractor_) {
      MatX<float> feats = extractor_->extract(images, ids);
      if (feats.rows() != spec_.input_shape.volume())
        throw ShapeMismatch("extractor produced " + std::to_string(feats.rows()) +
                            "-dim features, model expects " +
                            std::to_string(spec_.input_shape.volume()));
      return feats;
    }
    MatX<float> cols(spec_.input_shape.volume(), static_cast<Eigen::Index>(images.size()));
    for (std::size_t n = 0; n < images.size(); ++n) {
      const Image& img = images[n];
      if (img.height != spec_.input_shape.h || img.width != spec_.input_shape.w ||
          img.channels != spec_.input_shape.c)
        throw ShapeMismatch("image batch does not match model input shape");
      for (std::size_t i = 0; i < img.data.size(); ++i)
        cols(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n)) = img.data[i];
    }
    return cols;
  }

  /// Probability rows in manifest order. Multiclass: one column per class in
  /// encoded order, summing to 1. Binary: a single column, P(disease).
  std::vector<std::vector<double>> predict_proba(const DatasetManifest& samples) const override {
    return predict_columns(input_matrix(samples));
  }

  std::vector<std::vector<double>> predict_proba_images(
      const std::vector<Image>& images, const std::vector<std::string>& ids = {}) const {
    return predict_columns(to_columns(images, ids));
  }

  std::vector<std::string> predict_labels(const DatasetManifest& samples) const {
    std::vector<std::string> labels;
    for (const auto& row : predict_proba(samples)) labels.push_back(label_from_proba(schema_, row));
    return labels;
  }

  void save(const std::filesystem::path& path) const {
    std::vector<float> params = net_.parameters();
    nlohmann::json j{
        {"format", "cxr-model/1"},
        {"schema", detail::schema_to_json(schema_)},
        {"spec", spec_to_json(spec_)},
        {"extractor", extractor_ ? extractor_->describe() : nlohmann::json(nullptr)},
        {"weights_dtype", "f32le"},
        {"weights", detail::base64_encode(reinterpret_cast<const unsigned char*>(params.data()),
                                          params.size() * sizeof(float))}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot write model file: " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoFailure("model write failed: " + path.string());
  }

  static TrainedModel load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open model file: " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseFailure("model file is not valid JSON: " + path.string() + " (" + e.what() + ")");
    }
    try {
      if (j.at("format").get<std::string>() != "cxr-model/1")
        throw ParseFailure("unsupported model format in " + path.string());
      TrainedModel model(spec_from_json(j.at("spec")), detail::schema_from_json(j.at("schema")),
                         FeatureExtractor::from_json(j.at("extractor")));
      auto bytes = detail::base64_decode(j.at("weights").get<std::string>());
      if (bytes.size() != static_cast<std::size_t>(model.net_.parameter_count()) * sizeof(float))
        throw ParseFailure("weight payload size mismatch in " + path.string());
      std::vector<float> params(bytes.size() / sizeof(float));
      std::memcpy(params.data(), bytes.data(), bytes.size());
      model.net_.set_parameters(params);
      return model;
    } catch (const nlohmann::json::exception& e) {
      throw ParseFailure("malformed model file " + path.string() + ": " + e.what());
    }
  }

 private:
  std::vector<std::vector<double>> predict_columns(const MatX<float>& cols) const {
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(cols.cols()));
    const Eigen::Index chunk = 64;  // bounds conv activation memory
    const bool binary = spec_.head_mode == HeadMode::binary;
    for (Eigen::Index start = 0; start < cols.cols(); start += chunk) {
      const Eigen::Index n = std::min(chunk, cols.cols() - start);
      MatX<float> probs = net_.predict(cols.middleCols(start, n));
      for (Eigen::Index s = 0; s < n; ++s) {
        std::vector<double> row;
        if (binary) {
          row.push_back(static_cast<double>(probs(0, s)));
        } else {
          for (Eigen::Index i = 0; i < probs.rows(); ++i)
            row.push_back(static_cast<double>(probs(i, s)));
        }
        rows.push_back(std::move(row));
      }
    }
    return rows;
  }

  ModelSpec spec_;
  LabelSchema schema_;
  mutable Network<float> net_;
  std::shared_ptr<const FeatureExtractor> extractor_;
};

namespace detail {

inline void check_train_config(const ModelSpec& spec, const TrainConfig& config) {
  if (config.epochs <= 0 || config.batch_size <= 0)
    throw ConfigInvalid("epochs and batch_size must be positive");
  if (!(config.learning_rate > 0.0)) throw ConfigInvalid("learning_rate must be positive");
  const bool multiclass = spec.head_mode == HeadMode::multiclass;
  const bool cce = config.loss == LossKind::categorical_cross_entropy;
  if (multiclass != cce)
    throw ConfigInvalid(std::string("loss ") + to_string(config.loss) +
                        " does not match head mode " + to_string(spec.head_mode));
}

struct EpochEval {
  double loss = 0.0;
  double accuracy = 0.0;
};

template <typename TargetsM, typename TargetsB>
EpochEval evaluate_split(Network<float>& net, const MatX<float>& inputs, const TargetsM& targets_m,
                         const TargetsB& targets_b, LossKind loss) {
  double loss_sum = 0.0, correct = 0.0;
  const Eigen::Index n = inputs.cols();
  const Eigen::Index chunk = 64;
  for (Eigen::Index start = 0; start < n; start += chunk) {
    const Eigen::Index b = std::min(chunk, n - start);
    MatX<float> logits = net.forward_logits(inputs.middleCols(start, b), false);
    if (loss == LossKind::categorical_cross_entropy) {
      std::vector<int> slice(targets_m.begin() + start, targets_m.begin() + start + b);
      auto out = nn::softmax_cross_entropy(logits, slice);
      loss_sum += out.loss_sum;
      correct += out.correct;
    } else {
      std::vector<float> slice(targets_b.begin() + start, targets_b.begin() + start + b);
      auto out = nn::sigmoid_cross_entropy(logits, slice);
      loss_sum += out.loss_sum;
      correct += out.correct;
    }
  }
  return EpochEval{loss_sum / static_cast<double>(n), correct / static_cast<double>(n)};
}

}  // namespace detail

/// Trains a spec on `train`, validating on `val` after every epoch, with
/// plain minibatch gradient descent at a fixed learning rate. The history has
/// exactly config.epochs rows. All randomness (weight init, epoch shuffles)
/// derives from config.seed, so reruns are bit-identical.
inline std::pair<TrainedModel, TrainingHistory> fit(
    const ModelSpec& spec, const DatasetManifest& train, const DatasetManifest& val,
    const TrainConfig& config, std::shared_ptr<const FeatureExtractor> extractor = nullptr,
    int fold = 1) {
  if (train.empty()) throw EmptyTrainingSet("training manifest is empty");
  if (val.empty()) throw EmptyTrainingSet("validation manifest is empty");
  if (train.schema() != val.schema())
    throw SchemaMismatch("training and validation manifests use different schemas");
  detail::check_train_config(spec, config);

  TrainedModel model(spec, train.schema(), std::move(extractor));
  Network<float>& net = model.network();
  net.init_weights(derive_seed(config.seed, "init"));

  const MatX<float> train_inputs = model.input_matrix(train);
  const MatX<float> val_inputs = model.input_matrix(val);

  std::vector<int> train_m, val_m;
  std::vector<float> train_b, val_b;
  const bool multiclass = spec.head_mode == HeadMode::multiclass;
  for (const auto& s : train.samples()) {
    if (multiclass) train_m.push_back(train.schema().index_of(s.label));
    else train_b.push_back(s.label == kDiseaseClass ? 1.0f : 0.0f);
  }
  for (const auto& s : val.samples()) {
    if (multiclass) val_m.push_back(val.schema().index_of(s.label));
    else val_b.push_back(s.label == kDiseaseClass ? 1.0f : 0.0f);
  }

  const Eigen::Index n = train_inputs.cols();
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  TrainingHistory history;
  MatX<float> batch(train_inputs.rows(), std::min<Eigen::Index>(config.batch_size, n));
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(config.seed, "epoch", static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0, correct = 0.0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, n - start);
      batch.resize(train_inputs.rows(), b);
      std::vector<int> tm;
      std::vector<float> tb;
      for (Eigen::Index i = 0; i < b; ++i) {
        const std::size_t src = order[static_cast<std::size_t>(start + i)];
        batch.col(i) = train_inputs.col(static_cast<Eigen::Index>(src));
        if (multiclass) tm.push_back(train_m[src]);
        else tb.push_back(train_b[src]);
      }
      MatX<float> logits = net.forward_logits(batch, true);
      nn::BatchLoss<float> out = multiclass ? nn::softmax_cross_entropy(logits, tm)
                                            : nn::sigmoid_cross_entropy(logits, tb);
      if (!std::isfinite(out.loss_sum))
        throw NonFiniteLoss("training loss diverged at epoch " + std::to_string(epoch));
      loss_sum += out.loss_sum;
      correct += out.correct;
      net.backward(out.dlogits);
      net.sgd_step(static_cast<float>(config.learning_rate));
    }

    detail::EpochEval val_eval =
        detail::evaluate_split(net, val_inputs, val_m, val_b, config.loss);
    if (!std::isfinite(val_eval.loss))
      throw NonFiniteLoss("validation loss diverged at epoch " + std::to_string(epoch));
    history.rows.push_back(HistoryRow{fold, epoch, loss_sum / static_cast<double>(n),
                                      correct / static_cast<double>(n), val_eval.loss,
                                      val_eval.accuracy});
  }
  return {std::move(model), std::move(history)};
}

}  // namespace cxr
