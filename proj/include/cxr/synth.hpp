#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>

#include "cxr/errors.hpp"
#include "cxr/image.hpp"
#include "cxr/rng.hpp"
#include "cxr/schema.hpp"

namespace cxr {

/// Synthetic pattern-stamped corpus: each class gets a distinct geometric
/// stamp (disc, ring, cross, stripes) with jittered position, scale and
/// intensity plus uniform pixel noise. Separable enough for a small CNN to
/// learn, noisy enough that it has to.
struct SynthConfig {
  int per_class = 500;
  int size = 64;
  double noise = 0.10;
  std::uint64_t seed = 7;
  std::vector<std::string> classes = {"covid", "normal", "opacity", "pneumonia"};
};

namespace detail {

inline void stamp_disc(Image& img, int cx, int cy, int r, float fg) {
  for (int y = std::max(0, cy - r); y <= std::min(img.height - 1, cy + r); ++y)
    for (int x = std::max(0, cx - r); x <= std::min(img.width - 1, cx + r); ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) img.at(0, y, x) = fg;
}

inline void stamp_ring(Image& img, int cx, int cy, int r, float fg) {
  const int thickness = std::max(2, r / 3);
  for (int y = std::max(0, cy - r); y <= std::min(img.height - 1, cy + r); ++y)
    for (int x = std::max(0, cx - r); x <= std::min(img.width - 1, cx + r); ++x) {
      const int dx = std::abs(x - cx), dy = std::abs(y - cy);
      const int d = std::max(dx, dy);
      if (d <= r && d >= r - thickness) img.at(0, y, x) = fg;
    }
}

inline void stamp_cross(Image& img, int cx, int cy, int r, float fg) {
  const int arm = std::max(2, r / 3);
  for (int y = std::max(0, cy - r); y <= std::min(img.height - 1, cy + r); ++y)
    for (int x = std::max(0, cx - r); x <= std::min(img.width - 1, cx + r); ++x)
      if (std::abs(x - cx) <= arm || std::abs(y - cy) <= arm) img.at(0, y, x) = fg;
}

inline void stamp_stripes(Image& img, int cx, int cy, int r, float fg) {
  for (int y = std::max(0, cy - r); y <= std::min(img.height - 1, cy + r); ++y)
    for (int x = std::max(0, cx - r); x <= std::min(img.width - 1, cx + r); ++x)
      if (((x - cx) + (y - cy) + 4 * r) % 6 < 3) img.at(0, y, x) = fg;
}

}  // namespace detail

/// One synthetic grayscale sample; `stamp_index` selects the shape family.
inline Image make_stamp_image(int stamp_index, int size, double noise, Rng& rng) {
  Image img;
  img.height = size;
  img.width = size;
  img.channels = 1;
  const float bg = static_cast<float>(0.05 + rng.next_unit() * 0.15);
  img.data.assign(static_cast<std::size_t>(size) * size, bg);

  const float fg = static_cast<float>(0.60 + rng.next_unit() * 0.35);
  const int r = static_cast<int>(size * (0.18 + rng.next_unit() * 0.10));
  const int margin = r + 2;
  const int cx = margin + static_cast<int>(rng.below(static_cast<std::uint64_t>(
                              std::max(1, size - 2 * margin))));
  const int cy = margin + static_cast<int>(rng.below(static_cast<std::uint64_t>(
                              std::max(1, size - 2 * margin))));

  switch (stamp_index % 4) {
    case 0: detail::stamp_disc(img, cx, cy, r, fg); break;
    case 1: detail::stamp_ring(img, cx, cy, r, fg); break;
    case 2: detail::stamp_cross(img, cx, cy, r, fg); break;
    default: detail::stamp_stripes(img, cx, cy, r, fg); break;
  }

  for (auto& v : img.data) {
    v += static_cast<float>((rng.next_unit() * 2.0 - 1.0) * noise);
    v = std::clamp(v, 0.0f, 1.0f);
  }
  return img;
}

/// Writes `per_class` 8-bit PNGs per class under root/<class>/; fully
/// determined by the config seed.
inline void generate_synthetic_corpus(const std::filesystem::path& root,
                                      const SynthConfig& config) {
  namespace fs = std::filesystem;
  if (config.per_class <= 0 || config.size < 8) throw ConfigInvalid("bad synthetic corpus config");
  for (std::size_t ci = 0; ci < config.classes.size(); ++ci) {
    const std::string& cls = config.classes[ci];
    fs::create_directories(root / cls);
    for (int n = 0; n < config.per_class; ++n) {
      Rng rng(derive_seed(derive_seed(config.seed, "synth:" + cls), "img",
                          static_cast<std::uint64_t>(n)));
      Image img = make_stamp_image(static_cast<int>(ci), config.size, config.noise, rng);
      cv::Mat mat(img.height, img.width, CV_8UC1);
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
          mat.at<unsigned char>(y, x) =
              static_cast<unsigned char>(std::lround(img.at(0, y, x) * 255.0f));
      char name[32];
      std::snprintf(name, sizeof(name), "img_%05d.png", n);
      if (!cv::imwrite((root / cls / name).string(), mat))
        throw IoFailure("cannot write synthetic image under " + (root / cls).string());
    }
  }
}

}  // namespace cxr
