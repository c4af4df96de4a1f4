#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cxr/manifest.hpp"
#include "cxr/rng.hpp"
#include "cxr/schema.hpp"

namespace cxrtest {

/// Self-cleaning unique temp directory.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix = "cxr_test") {
    std::random_device rd;
    for (int attempt = 0; attempt < 64; ++attempt) {
      auto candidate = std::filesystem::temp_directory_path() /
                       (prefix + "_" + std::to_string(rd()) + std::to_string(rd()));
      std::error_code ec;
      if (std::filesystem::create_directories(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("could not create temp directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

/// Manifest with the given per-class counts and fake file paths (for code
/// paths that never decode pixels).
inline cxr::DatasetManifest synthetic_manifest(const cxr::LabelSchema& schema,
                                               const std::vector<std::size_t>& per_class) {
  std::vector<cxr::Sample> samples;
  for (std::size_t c = 0; c < schema.classes().size(); ++c) {
    const std::string& cls = schema.classes()[c];
    for (std::size_t i = 0; i < per_class.at(c); ++i) {
      const std::string id = cls + "/" + std::to_string(i);
      samples.push_back(cxr::Sample{id, "/nonexistent/" + id + ".png", cls, ""});
    }
  }
  return cxr::DatasetManifest(schema, std::move(samples));
}

}  // namespace cxrtest
