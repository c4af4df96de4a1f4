#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cxr/csv.hpp"
#include "cxr/errors.hpp"
#include "cxr/image.hpp"
#include "cxr/manifest.hpp"

namespace cxr {

/// Per-image channel statistics over [0,1]-normalized intensities, computed
/// at native resolution. Population (divide-by-N) standard deviation, so a
/// value can never exceed 0.5 for data bounded in [0,1].
struct ImageStats {
  std::string sample_id;
  std::string label;
  std::vector<double> channel_mean;
  std::vector<double> channel_std;
};

struct ClassDistribution {
  std::map<std::string, std::size_t> counts;

  std::size_t total() const {
    std::size_t sum = 0;
    for (const auto& [cls, n] : counts) sum += n;
    return sum;
  }
};

inline ImageStats image_channel_stats(const Image& image) {
  if (image.pixel_count() == 0 || image.channels == 0)
    throw EmptyImage("cannot compute channel stats of an empty image");
  ImageStats stats;
  const double n = static_cast<double>(image.pixel_count());
  for (int c = 0; c < image.channels; ++c) {
    double sum = 0.0;
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) sum += image.at(c, y, x);
    const double mean = sum / n;
    double sq = 0.0;
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) {
        const double d = image.at(c, y, x) - mean;
        sq += d * d;
      }
    stats.channel_mean.push_back(mean);
    stats.channel_std.push_back(std::sqrt(sq / n));
  }
  return stats;
}

inline ClassDistribution class_distribution(const DatasetManifest& manifest) {
  ClassDistribution dist;
  for (const auto& [cls, n] : manifest.class_counts()) dist.counts[cls] = n;
  return dist;
}

/// One ImageStats row per manifest sample, manifest order. Decode failures
/// are rethrown with the sample id attached.
inline std::vector<ImageStats> scatter_table(const DatasetManifest& manifest) {
  std::vector<ImageStats> rows;
  rows.reserve(manifest.size());
  for (const auto& s : manifest.samples()) {
    Image img;
    if (!try_decode_image(s.filepath, &img))
      throw ParseFailure("sample '" + s.id + "': cannot decode " + s.filepath);
    ImageStats stats = image_channel_stats(img);
    stats.sample_id = s.id;
    stats.label = s.label;
    rows.push_back(std::move(stats));
  }
  return rows;
}

/// CSV `id,label,mean_c0[,mean_c1,mean_c2],std_c0[,...]`. Column count follows
/// the widest channel count present; narrower rows repeat their last channel.
inline void write_scatter_csv(const std::vector<ImageStats>& rows,
                              const std::filesystem::path& path) {
  std::size_t channels = 1;
  for (const auto& r : rows) channels = std::max(channels, r.channel_mean.size());
  std::vector<std::string> header = {"id", "label"};
  for (std::size_t c = 0; c < channels; ++c) header.push_back("mean_c" + std::to_string(c));
  for (std::size_t c = 0; c < channels; ++c) header.push_back("std_c" + std::to_string(c));
  std::vector<std::vector<std::string>> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    std::vector<std::string> row = {r.sample_id, r.label};
    for (std::size_t c = 0; c < channels; ++c)
      row.push_back(format_sig6(r.channel_mean[std::min(c, r.channel_mean.size() - 1)]));
    for (std::size_t c = 0; c < channels; ++c)
      row.push_back(format_sig6(r.channel_std[std::min(c, r.channel_std.size() - 1)]));
    out.push_back(std::move(row));
  }
  write_csv(path, header, out);
}

/// CSV `label,count`, classes sorted by name.
inline void write_distribution_csv(const ClassDistribution& dist,
                                   const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& [cls, n] : dist.counts) rows.push_back({cls, std::to_string(n)});
  write_csv(path, {"label", "count"}, rows);
}

}  // namespace cxr
