#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxr/csv.hpp"
#include "cxr/errors.hpp"
#include "cxr/image.hpp"
#include "cxr/nn.hpp"
#include "cxr/rng.hpp"

namespace cxr {

/// Frozen feature source for transfer-mode heads: an image batch in, a
/// fixed-width feature vector per image out. Implementations may wrap real
/// pretrained backbones; this repo ships a toy random projection for desk
/// scale and a file-backed source for externally computed features.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual int feature_dim() const = 0;

  /// One feature column per image, (feature_dim x N). `ids` parallels the
  /// batch; pixel-based extractors ignore it, file-backed ones key on it.
  virtual MatX<float> extract(const std::vector<Image>& images,
                              const std::vector<std::string>& ids) const = 0;

  virtual nlohmann::json describe() const = 0;

  static std::shared_ptr<const FeatureExtractor> from_json(const nlohmann::json& j);
};

/// Desk-scale stand-in for a pretrained backbone: grayscale 16x16 thumbnail
/// through a fixed seeded random projection with relu. The projection never
/// trains, so it behaves exactly like a frozen backbone.
class ToyBackbone final : public FeatureExtractor {
 public:
  explicit ToyBackbone(int dim = 512, std::uint64_t seed = 17, int patch = 16)
      : dim_(dim), seed_(seed), patch_(patch), proj_(dim, patch * patch) {
    if (dim <= 0 || patch <= 0) throw InvalidShape("toy backbone needs positive dim and patch");
    Rng rng(derive_seed(seed, "toy_backbone"));
    const double scale = 1.0 / std::sqrt(static_cast<double>(patch * patch));
    for (Eigen::Index i = 0; i < proj_.size(); ++i)
      proj_.data()[i] = static_cast<float>((rng.next_unit() * 2.0 - 1.0) * scale);
  }

  int feature_dim() const override { return dim_; }

  MatX<float> extract(const std::vector<Image>& images,
                      const std::vector<std::string>&) const override {
    MatX<float> out(dim_, static_cast<Eigen::Index>(images.size()));
    VecX<float> pixels(patch_ * patch_);
    for (std::size_t n = 0; n < images.size(); ++n) {
      Image thumb = convert_channels(resize_image(images[n], patch_, patch_), 1);
      for (int i = 0; i < patch_ * patch_; ++i) pixels(i) = thumb.data[static_cast<std::size_t>(i)];
      out.col(static_cast<Eigen::Index>(n)) = (proj_ * pixels).cwiseMax(0.0f);
    }
    return out;
  }

  nlohmann::json describe() const override {
    return {{"type", "toy"}, {"dim", dim_}, {"seed", seed_}, {"patch", patch_}};
  }

 private:
  int dim_;
  std::uint64_t seed_;
  int patch_;
  MatX<float> proj_;
};

/// Features precomputed elsewhere, one CSV row per sample:
/// `id,f0,f1,...,f{D-1}`. Lets an external backbone feed the training head
/// without this process touching the backbone at all.
class FeatureFileSource final : public FeatureExtractor {
 public:
  explicit FeatureFileSource(const std::filesystem::path& path) : path_(path.string()) {
    CsvTable table = read_csv(path);
    if (table.header.size() < 2 || table.header[0] != "id")
      throw ParseFailure("feature file must have header id,f0,...: " + path.string());
    dim_ = static_cast<int>(table.header.size()) - 1;
    for (const auto& row : table.rows) {
      std::vector<float> vec(static_cast<std::size_t>(dim_));
      for (int i = 0; i < dim_; ++i)
        vec[static_cast<std::size_t>(i)] =
            static_cast<float>(parse_double(row[static_cast<std::size_t>(i) + 1]));
      features_[row[0]] = std::move(vec);
    }
  }

  int feature_dim() const override { return dim_; }

  MatX<float> extract(const std::vector<Image>& images,
                      const std::vector<std::string>& ids) const override {
    if (ids.size() != images.size() && !images.empty() && !ids.empty())
      throw LengthMismatch("feature lookup needs one id per image");
    MatX<float> out(dim_, static_cast<Eigen::Index>(ids.size()));
    for (std::size_t n = 0; n < ids.size(); ++n) {
      auto it = features_.find(ids[n]);
      if (it == features_.end())
        throw InsufficientSamples("no precomputed features for sample id: " + ids[n]);
      for (int i = 0; i < dim_; ++i) out(i, static_cast<Eigen::Index>(n)) = it->second[static_cast<std::size_t>(i)];
    }
    return out;
  }

  nlohmann::json describe() const override {
    return {{"type", "feature_file"}, {"path", path_}};
  }

 private:
  std::string path_;
  int dim_ = 0;
  std::map<std::string, std::vector<float>> features_;
};

inline std::shared_ptr<const FeatureExtractor> FeatureExtractor::from_json(const nlohmann::json& j) {
  if (j.is_null()) return nullptr;
  const std::string type = j.at("type").get<std::string>();
  if (type == "toy") {
    return std::make_shared<ToyBackbone>(j.value("dim", 512), j.value("seed", std::uint64_t{17}),
                                         j.value("patch", 16));
  }
  if (type == "feature_file") {
    return std::make_shared<FeatureFileSource>(j.at("path").get<std::string>());
  }
  throw ConfigInvalid("unknown feature extractor type: " + type);
}

}  // namespace cxr
