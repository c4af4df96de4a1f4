#include <gtest/gtest.h>

#include "cxr/modelspec.hpp"
#include "cxr/rng.hpp"

using cxr::ActivationKind;
using cxr::HeadMode;
using cxr::LabelSchema;
using cxr::LayerSpec;
using cxr::ModelSpec;
using cxr::Shape3;

namespace {

// Independent closed-form parameter oracle: walks the layer list tracking
// shapes with its own arithmetic.
std::int64_t oracle_param_total(const ModelSpec& spec) {
  std::int64_t h = spec.input_shape.h, w = spec.input_shape.w, c = spec.input_shape.c;
  std::int64_t total = 0;
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case cxr::LayerKind::conv2d:
        total += (static_cast<std::int64_t>(l.kernel_h) * l.kernel_w * c + 1) * l.filters;
        h = h - l.kernel_h + 1;
        w = w - l.kernel_w + 1;
        c = l.filters;
        break;
      case cxr::LayerKind::maxpool:
        h /= l.pool_h;
        w /= l.pool_w;
        break;
      case cxr::LayerKind::flatten:
        c = h * w * c;
        h = w = 1;
        break;
      case cxr::LayerKind::global_pool:
        h = w = 1;
        break;
      case cxr::LayerKind::dense:
        total += (c + 1) * l.units;
        c = l.units;
        break;
      case cxr::LayerKind::activation:
        break;
    }
  }
  return total;
}

}  // namespace

TEST(CountParameters, DenseThreeByTwo) {
  ModelSpec spec;
  spec.input_shape = {1, 1, 3};
  spec.layers = {LayerSpec::Flatten(), LayerSpec::Dense(2)};
  EXPECT_EQ(cxr::count_parameters(spec).total, 8);
}

TEST(CountParameters, ConvThreeByThree) {
  ModelSpec spec;
  spec.input_shape = {8, 8, 1};
  spec.layers = {LayerSpec::Conv2d(8, 3, 3)};
  EXPECT_EQ(cxr::count_parameters(spec).total, 80);  // (3*3*1+1)*8
}

TEST(CountParameters, EmptySpecIsZero) {
  ModelSpec spec;
  spec.input_shape = {4, 4, 1};
  auto count = cxr::count_parameters(spec);
  EXPECT_EQ(count.total, 0);
  EXPECT_EQ(count.trainable, 0);
}

TEST(CountParameters, RandomizedSpecsMatchOracle) {
  cxr::Rng gen(606);
  for (int trial = 0; trial < 25; ++trial) {
    ModelSpec spec;
    spec.input_shape = {16 + static_cast<int>(gen.below(17)),
                        16 + static_cast<int>(gen.below(17)),
                        1 + static_cast<int>(gen.below(3))};
    int h = spec.input_shape.h, w = spec.input_shape.w;
    const int conv_blocks = 1 + static_cast<int>(gen.below(2));
    for (int b = 0; b < conv_blocks && h > 6 && w > 6; ++b) {
      const int kernel = 2 + static_cast<int>(gen.below(2));
      spec.layers.push_back(LayerSpec::Conv2d(4 + static_cast<int>(gen.below(12)), kernel, kernel));
      h -= kernel - 1;
      w -= kernel - 1;
      spec.layers.push_back(LayerSpec::Act(ActivationKind::relu));
      spec.layers.push_back(LayerSpec::MaxPool(2, 2));
      h /= 2;
      w /= 2;
    }
    spec.layers.push_back(LayerSpec::Flatten());
    spec.layers.push_back(LayerSpec::Dense(3 + static_cast<int>(gen.below(20))));
    spec.layers.push_back(LayerSpec::Act(ActivationKind::relu));
    spec.layers.push_back(LayerSpec::Dense(2 + static_cast<int>(gen.below(4))));

    EXPECT_EQ(cxr::count_parameters(spec).total, oracle_param_total(spec));
  }
}

TEST(BuildBaselineCnn, MulticlassHead) {
  auto spec = cxr::build_baseline_cnn(LabelSchema::multiclass4(), HeadMode::multiclass,
                                      {64, 64, 1});
  const auto& out = spec.layers[spec.layers.size() - 2];
  const auto& act = spec.layers.back();
  EXPECT_EQ(out.kind, cxr::LayerKind::dense);
  EXPECT_EQ(out.units, 4);
  EXPECT_EQ(act.activation, ActivationKind::softmax);
  EXPECT_EQ(cxr::count_parameters(spec).total, oracle_param_total(spec));
}

TEST(BuildBaselineCnn, BinaryHead) {
  auto spec = cxr::build_baseline_cnn(LabelSchema::stage1_binary(), HeadMode::binary, {64, 64, 1});
  const auto& out = spec.layers[spec.layers.size() - 2];
  EXPECT_EQ(out.units, 1);
  EXPECT_EQ(spec.layers.back().activation, ActivationKind::sigmoid);
}

TEST(BuildBaselineCnn, DeskScaleWidths) {
  auto spec = cxr::build_baseline_cnn(LabelSchema::multiclass4(), HeadMode::multiclass,
                                      {64, 64, 1});
  // conv 32 -> 64, dense 128: 320 + 18,496 + 1,605,760 + 516
  EXPECT_EQ(cxr::count_parameters(spec).total, 1625092);
}

TEST(BuildBaselineCnn, RejectsTinyInput) {
  EXPECT_THROW(cxr::build_baseline_cnn(LabelSchema::multiclass4(), HeadMode::multiclass,
                                       {16, 64, 1}),
               cxr::InvalidShape);
}

TEST(BuildTransferHead, TrainableParamsMatchReducedBudget) {
  auto spec = cxr::build_transfer_head(512, LabelSchema::multiclass4(), HeadMode::multiclass, 48);
  auto count = cxr::count_parameters(spec);
  // 512*48+48 + 48*4+4
  EXPECT_EQ(count.trainable, 24820);

  auto binary = cxr::build_transfer_head(512, LabelSchema::stage1_binary(), HeadMode::binary, 48);
  EXPECT_EQ(cxr::count_parameters(binary).trainable, 24673);  // 24624 + 48+1
}

TEST(BuildTransferHead, RejectsBadDims) {
  EXPECT_THROW(cxr::build_transfer_head(0, LabelSchema::multiclass4(), HeadMode::multiclass),
               cxr::InvalidShape);
  EXPECT_THROW(cxr::build_transfer_head(512, LabelSchema::multiclass4(), HeadMode::multiclass, 0),
               cxr::InvalidShape);
}

TEST(FrozenPrefix, ExcludedFromTrainableCount) {
  auto spec = cxr::build_baseline_cnn(LabelSchema::multiclass4(), HeadMode::multiclass,
                                      {64, 64, 1});
  auto full = cxr::count_parameters(spec);
  spec.frozen_prefix = 3;  // conv(32) + relu + pool
  auto frozen = cxr::count_parameters(spec);
  EXPECT_EQ(frozen.total, full.total);
  EXPECT_EQ(frozen.trainable, full.total - 320);
}

TEST(InferShapes, ChainsAndRejects) {
  ModelSpec spec;
  spec.input_shape = {64, 64, 1};
  spec.layers = {LayerSpec::Conv2d(32, 3, 3), LayerSpec::MaxPool(2, 2), LayerSpec::Flatten(),
                 LayerSpec::Dense(10)};
  auto shapes = cxr::infer_shapes(spec);
  EXPECT_EQ(shapes[1].h, 62);
  EXPECT_EQ(shapes[2].h, 31);
  EXPECT_EQ(shapes[3].c, 31 * 31 * 32);
  EXPECT_EQ(shapes[4].c, 10);

  ModelSpec bad = spec;
  bad.layers.insert(bad.layers.begin(), LayerSpec::Dense(4));  // dense before flatten
  EXPECT_THROW(cxr::infer_shapes(bad), cxr::ShapeMismatch);

  ModelSpec huge_kernel;
  huge_kernel.input_shape = {4, 4, 1};
  huge_kernel.layers = {LayerSpec::Conv2d(2, 5, 5)};
  EXPECT_THROW(cxr::infer_shapes(huge_kernel), cxr::ShapeMismatch);
}

TEST(ValidateHead, LossHeadPairingEnforced) {
  auto spec = cxr::build_baseline_cnn(LabelSchema::multiclass4(), HeadMode::multiclass,
                                      {64, 64, 1});
  // schema arity mismatch
  EXPECT_THROW(cxr::validate_head(spec, LabelSchema::stage2_disease()), cxr::SchemaMismatch);

  ModelSpec wrong = spec;
  wrong.head_mode = HeadMode::binary;  // claims binary but ends in dense(4)+softmax
  EXPECT_THROW(cxr::validate_head(wrong, LabelSchema::stage1_binary()), cxr::SchemaMismatch);
}

TEST(SpecJson, RoundTrip) {
  auto spec = cxr::build_transfer_head(256, LabelSchema::multiclass4(), HeadMode::multiclass, 32);
  auto json = cxr::spec_to_json(spec);
  EXPECT_TRUE(json.contains("input_shape"));
  EXPECT_TRUE(json.contains("layers"));
  EXPECT_TRUE(json.contains("head_mode"));
  EXPECT_TRUE(json.contains("frozen_prefix"));

  auto back = cxr::spec_from_json(json);
  EXPECT_EQ(back.input_shape, spec.input_shape);
  EXPECT_EQ(back.frozen_prefix, spec.frozen_prefix);
  EXPECT_EQ(back.head_mode, spec.head_mode);
  ASSERT_EQ(back.layers.size(), spec.layers.size());
  EXPECT_EQ(cxr::count_parameters(back).trainable, cxr::count_parameters(spec).trainable);
}
