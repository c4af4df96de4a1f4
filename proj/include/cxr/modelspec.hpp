#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxr/errors.hpp"
#include "cxr/schema.hpp"

namespace cxr {

enum class LayerKind { conv2d, maxpool, flatten, global_pool, dense, activation };
enum class ActivationKind { relu, softmax, sigmoid };
enum class HeadMode { multiclass, binary };
enum class LossKind { categorical_cross_entropy, binary_cross_entropy };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::flatten: return "flatten";
    case LayerKind::global_pool: return "global_pool";
    case LayerKind::dense: return "dense";
    case LayerKind::activation: return "activation";
  }
  return "?";
}

inline const char* to_string(ActivationKind a) {
  switch (a) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::softmax: return "softmax";
    case ActivationKind::sigmoid: return "sigmoid";
  }
  return "?";
}

inline const char* to_string(HeadMode m) {
  return m == HeadMode::multiclass ? "multiclass" : "binary";
}

inline const char* to_string(LossKind l) {
  return l == LossKind::categorical_cross_entropy ? "categorical_cross_entropy"
                                                  : "binary_cross_entropy";
}

struct Shape3 {
  int h = 0, w = 0, c = 0;
  std::int64_t volume() const {
    return static_cast<std::int64_t>(h) * w * c;
  }
  bool operator==(const Shape3&) const = default;
};

/// One layer of a declarative classifier description. Only the fields of the
/// active kind are meaningful.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int filters = 0, kernel_h = 0, kernel_w = 0;  // conv2d
  int pool_h = 0, pool_w = 0;                   // maxpool
  int units = 0;                                // dense
  ActivationKind activation = ActivationKind::relu;

  static LayerSpec Conv2d(int filters, int kh, int kw) {
    LayerSpec l;
    l.kind = LayerKind::conv2d;
    l.filters = filters;
    l.kernel_h = kh;
    l.kernel_w = kw;
    return l;
  }
  static LayerSpec MaxPool(int ph, int pw) {
    LayerSpec l;
    l.kind = LayerKind::maxpool;
    l.pool_h = ph;
    l.pool_w = pw;
    return l;
  }
  static LayerSpec Flatten() {
    LayerSpec l;
    l.kind = LayerKind::flatten;
    return l;
  }
  static LayerSpec GlobalPool() {
    LayerSpec l;
    l.kind = LayerKind::global_pool;
    return l;
  }
  static LayerSpec Dense(int units) {
    LayerSpec l;
    l.kind = LayerKind::dense;
    l.units = units;
    return l;
  }
  static LayerSpec Act(ActivationKind a) {
    LayerSpec l;
    l.kind = LayerKind::activation;
    l.activation = a;
    return l;
  }
};

/// Declarative model description: input shape, ordered layers, head mode and
/// the count of leading layers excluded from training.
struct ModelSpec {
  Shape3 input_shape;
  std::vector<LayerSpec> layers;
  HeadMode head_mode = HeadMode::multiclass;
  int frozen_prefix = 0;
};

/// Shape of every layer boundary: result[0] is the input shape, result[i+1]
/// the output of layer i. Dense/flatten/global_pool outputs use h=w=1 with c
/// holding the width. Throws ShapeMismatch on inconsistent chains.
inline std::vector<Shape3> infer_shapes(const ModelSpec& spec) {
  if (spec.input_shape.h <= 0 || spec.input_shape.w <= 0 || spec.input_shape.c <= 0)
    throw ShapeMismatch("input shape must be positive in all dimensions");
  std::vector<Shape3> shapes = {spec.input_shape};
  Shape3 cur = spec.input_shape;
  bool spatial = true;  // until flattened/pooled to a vector
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    switch (l.kind) {
      case LayerKind::conv2d: {
        if (!spatial) throw ShapeMismatch("conv2d after the tensor was flattened (layer " + std::to_string(i) + ")");
        if (l.filters <= 0 || l.kernel_h <= 0 || l.kernel_w <= 0)
          throw ShapeMismatch("conv2d needs positive filters and kernel size");
        if (l.kernel_h > cur.h || l.kernel_w > cur.w)
          throw ShapeMismatch("conv2d kernel larger than its input (layer " + std::to_string(i) + ")");
        cur = Shape3{cur.h - l.kernel_h + 1, cur.w - l.kernel_w + 1, l.filters};
        break;
      }
      case LayerKind::maxpool: {
        if (!spatial) throw ShapeMismatch("maxpool after the tensor was flattened (layer " + std::to_string(i) + ")");
        if (l.pool_h <= 0 || l.pool_w <= 0) throw ShapeMismatch("maxpool needs positive pool size");
        if (l.pool_h > cur.h || l.pool_w > cur.w)
          throw ShapeMismatch("maxpool window larger than its input (layer " + std::to_string(i) + ")");
        cur = Shape3{cur.h / l.pool_h, cur.w / l.pool_w, cur.c};
        break;
      }
      case LayerKind::flatten: {
        if (!spatial) throw ShapeMismatch("flatten applied twice (layer " + std::to_string(i) + ")");
        cur = Shape3{1, 1, static_cast<int>(cur.volume())};
        spatial = false;
        break;
      }
      case LayerKind::global_pool: {
        if (!spatial) throw ShapeMismatch("global_pool after the tensor was flattened (layer " + std::to_string(i) + ")");
        cur = Shape3{1, 1, cur.c};
        spatial = false;
        break;
      }
      case LayerKind::dense: {
        if (spatial) throw ShapeMismatch("dense needs a flattened input (layer " + std::to_string(i) + ")");
        if (l.units <= 0) throw ShapeMismatch("dense needs positive units");
        cur = Shape3{1, 1, l.units};
        break;
      }
      case LayerKind::activation:
        break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

struct ParamCount {
  std::int64_t total = 0;
  std::int64_t trainable = 0;
};

/// Exact parameter accounting: conv2d = (kh*kw*in_c + 1)*filters, dense =
/// (in + 1)*out, everything else 0. Layers before frozen_prefix count toward
/// total only.
inline ParamCount count_parameters(const ModelSpec& spec) {
  const auto shapes = infer_shapes(spec);
  ParamCount count;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    std::int64_t params = 0;
    if (l.kind == LayerKind::conv2d) {
      params = (static_cast<std::int64_t>(l.kernel_h) * l.kernel_w * shapes[i].c + 1) * l.filters;
    } else if (l.kind == LayerKind::dense) {
      params = (static_cast<std::int64_t>(shapes[i].c) + 1) * l.units;
    }
    count.total += params;
    if (static_cast<int>(i) >= spec.frozen_prefix) count.trainable += params;
  }
  return count;
}

/// Checks that the spec ends in the head its mode requires: dense(K)+softmax
/// for multiclass, dense(1)+sigmoid for binary. Throws SchemaMismatch.
inline void validate_head(const ModelSpec& spec, const LabelSchema& schema) {
  if (spec.layers.size() < 2) throw SchemaMismatch("model spec has no head layers");
  const LayerSpec& act = spec.layers.back();
  const LayerSpec& out = spec.layers[spec.layers.size() - 2];
  if (act.kind != LayerKind::activation || out.kind != LayerKind::dense)
    throw SchemaMismatch("model spec must end in dense + activation");
  if (spec.head_mode == HeadMode::multiclass) {
    if (act.activation != ActivationKind::softmax)
      throw SchemaMismatch("multiclass head must end in softmax");
    if (out.units != static_cast<int>(schema.size()))
      throw SchemaMismatch("multiclass head width " + std::to_string(out.units) +
                           " does not match schema size " + std::to_string(schema.size()));
  } else {
    if (act.activation != ActivationKind::sigmoid)
      throw SchemaMismatch("binary head must end in sigmoid");
    if (out.units != 1) throw SchemaMismatch("binary head must be dense(1)");
    if (schema.stage() != SchemaStage::stage1_binary)
      throw SchemaMismatch("binary head requires the normal/disease schema");
  }
  infer_shapes(spec);  // chain consistency
}

/// Two conv+pool blocks (32 then 64 filters, 3x3 kernels, 2x2 pools), flatten,
/// dense(128), and the mode's output head. Desk-scale default widths.
inline ModelSpec build_baseline_cnn(const LabelSchema& schema, HeadMode head_mode,
                                    Shape3 input_shape) {
  if (input_shape.h < 32 || input_shape.w < 32)
    throw InvalidShape("baseline CNN needs input of at least 32x32");
  if (input_shape.c != 1 && input_shape.c != 3)
    throw InvalidShape("baseline CNN supports 1- or 3-channel input");
  ModelSpec spec;
  spec.input_shape = input_shape;
  spec.head_mode = head_mode;
  spec.layers = {
      LayerSpec::Conv2d(32, 3, 3), LayerSpec::Act(ActivationKind::relu), LayerSpec::MaxPool(2, 2),
      LayerSpec::Conv2d(64, 3, 3), LayerSpec::Act(ActivationKind::relu), LayerSpec::MaxPool(2, 2),
      LayerSpec::Flatten(),        LayerSpec::Dense(128),                LayerSpec::Act(ActivationKind::relu),
  };
  if (head_mode == HeadMode::multiclass) {
    spec.layers.push_back(LayerSpec::Dense(static_cast<int>(schema.size())));
    spec.layers.push_back(LayerSpec::Act(ActivationKind::softmax));
  } else {
    spec.layers.push_back(LayerSpec::Dense(1));
    spec.layers.push_back(LayerSpec::Act(ActivationKind::sigmoid));
  }
  validate_head(spec, schema);
  return spec;
}

/// Small trainable head over a frozen feature extractor: pooled features ->
/// dense(hidden) -> relu -> output head. The pooling layer is the frozen
/// backbone boundary (frozen_prefix = 1). With feature_dim 512 and hidden 48
/// the multiclass-4 head trains 24,820 parameters.
inline ModelSpec build_transfer_head(int feature_dim, const LabelSchema& schema,
                                     HeadMode head_mode, int hidden = 48) {
  if (feature_dim <= 0) throw InvalidShape("feature_dim must be positive");
  if (hidden <= 0) throw InvalidShape("hidden width must be positive");
  ModelSpec spec;
  spec.input_shape = Shape3{1, 1, feature_dim};
  spec.head_mode = head_mode;
  spec.frozen_prefix = 1;
  spec.layers = {LayerSpec::GlobalPool(), LayerSpec::Dense(hidden),
                 LayerSpec::Act(ActivationKind::relu)};
  if (head_mode == HeadMode::multiclass) {
    spec.layers.push_back(LayerSpec::Dense(static_cast<int>(schema.size())));
    spec.layers.push_back(LayerSpec::Act(ActivationKind::softmax));
  } else {
    spec.layers.push_back(LayerSpec::Dense(1));
    spec.layers.push_back(LayerSpec::Act(ActivationKind::sigmoid));
  }
  validate_head(spec, schema);
  return spec;
}

// --- serialization -----------------------------------------------------------

inline nlohmann::json layer_to_json(const LayerSpec& l) {
  nlohmann::json j{{"kind", to_string(l.kind)}};
  switch (l.kind) {
    case LayerKind::conv2d:
      j["filters"] = l.filters;
      j["kernel"] = {l.kernel_h, l.kernel_w};
      break;
    case LayerKind::maxpool:
      j["pool"] = {l.pool_h, l.pool_w};
      break;
    case LayerKind::dense:
      j["units"] = l.units;
      break;
    case LayerKind::activation:
      j["activation"] = to_string(l.activation);
      break;
    default:
      break;
  }
  return j;
}

inline LayerSpec layer_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "conv2d")
    return LayerSpec::Conv2d(j.at("filters").get<int>(), j.at("kernel").at(0).get<int>(),
                             j.at("kernel").at(1).get<int>());
  if (kind == "maxpool")
    return LayerSpec::MaxPool(j.at("pool").at(0).get<int>(), j.at("pool").at(1).get<int>());
  if (kind == "flatten") return LayerSpec::Flatten();
  if (kind == "global_pool") return LayerSpec::GlobalPool();
  if (kind == "dense") return LayerSpec::Dense(j.at("units").get<int>());
  if (kind == "activation") {
    const std::string a = j.at("activation").get<std::string>();
    if (a == "relu") return LayerSpec::Act(ActivationKind::relu);
    if (a == "softmax") return LayerSpec::Act(ActivationKind::softmax);
    if (a == "sigmoid") return LayerSpec::Act(ActivationKind::sigmoid);
    throw ParseFailure("unknown activation: " + a);
  }
  throw ParseFailure("unknown layer kind: " + kind);
}

/// Keys: input_shape, layers[], head_mode, frozen_prefix.
inline nlohmann::json spec_to_json(const ModelSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) layers.push_back(layer_to_json(l));
  return nlohmann::json{{"input_shape", {spec.input_shape.h, spec.input_shape.w, spec.input_shape.c}},
                        {"layers", layers},
                        {"head_mode", to_string(spec.head_mode)},
                        {"frozen_prefix", spec.frozen_prefix}};
}

inline ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  spec.input_shape = Shape3{j.at("input_shape").at(0).get<int>(),
                            j.at("input_shape").at(1).get<int>(),
                            j.at("input_shape").at(2).get<int>()};
  for (const auto& l : j.at("layers")) spec.layers.push_back(layer_from_json(l));
  const std::string mode = j.at("head_mode").get<std::string>();
  if (mode == "multiclass") {
    spec.head_mode = HeadMode::multiclass;
  } else if (mode == "binary") {
    spec.head_mode = HeadMode::binary;
  } else {
    throw ParseFailure("unknown head mode: " + mode);
  }
  spec.frozen_prefix = j.at("frozen_prefix").get<int>();
  return spec;
}

}  // namespace cxr
