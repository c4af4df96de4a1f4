#pragma once

#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cxr/errors.hpp"

namespace cxr {

/// Decoded pixel grid, planar channel-major float storage, intensities in
/// [0,1]. Grayscale files stay 1-channel; color files are RGB (3 channels).
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;  // data[c*H*W + y*W + x]

  float at(int c, int y, int x) const { return data[(c * height + y) * width + x]; }
  float& at(int c, int y, int x) { return data[(c * height + y) * width + x]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
};

namespace detail {

inline Image from_cv(const cv::Mat& mat) {
  Image img;
  img.height = mat.rows;
  img.width = mat.cols;
  img.channels = mat.channels();
  img.data.resize(static_cast<std::size_t>(img.channels) * img.height * img.width);
  cv::Mat f32;
  mat.convertTo(f32, CV_32F, 1.0 / 255.0);
  for (int y = 0; y < img.height; ++y) {
    const float* row = f32.ptr<float>(y);
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        img.at(c, y, x) = row[x * img.channels + c];
  }
  return img;
}

inline cv::Mat to_cv(const Image& img) {
  cv::Mat mat(img.height, img.width, CV_32FC(img.channels));
  for (int y = 0; y < img.height; ++y) {
    float* row = mat.ptr<float>(y);
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        row[x * img.channels + c] = img.at(c, y, x);
  }
  return mat;
}

}  // namespace detail

/// Returns false for files OpenCV cannot decode (used by directory scans to
/// skip corrupt entries instead of failing).
inline bool try_decode_image(const std::string& path, Image* out = nullptr) {
  cv::Mat mat = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (mat.empty()) return false;
  if (mat.channels() == 4) cv::cvtColor(mat, mat, cv::COLOR_BGRA2BGR);
  if (mat.channels() == 3) cv::cvtColor(mat, mat, cv::COLOR_BGR2RGB);
  if (mat.depth() != CV_8U) mat.convertTo(mat, CV_8U);
  if (out) *out = detail::from_cv(mat);
  return true;
}

inline Image decode_image(const std::string& path) {
  Image img;
  if (!try_decode_image(path, &img)) throw DecodeFailure("cannot decode image: " + path);
  return img;
}

/// Bilinear resize to (h, w); no-op when already that size.
inline Image resize_image(const Image& img, int h, int w) {
  if (img.height == h && img.width == w) return img;
  cv::Mat src = detail::to_cv(img);
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(w, h), 0, 0, cv::INTER_AREA);
  Image out;
  out.height = h;
  out.width = w;
  out.channels = img.channels;
  out.data.resize(static_cast<std::size_t>(out.channels) * h * w);
  for (int y = 0; y < h; ++y) {
    const float* row = dst.ptr<float>(y);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < out.channels; ++c)
        out.at(c, y, x) = row[x * out.channels + c];
  }
  return out;
}

/// Grayscale is replicated up to 3 channels; color collapses to the channel
/// mean when a 1-channel input is required.
inline Image convert_channels(const Image& img, int channels) {
  if (img.channels == channels) return img;
  Image out;
  out.height = img.height;
  out.width = img.width;
  out.channels = channels;
  out.data.resize(static_cast<std::size_t>(channels) * img.height * img.width);
  if (img.channels == 1 && channels == 3) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(0, y, x);
  } else if (img.channels == 3 && channels == 1) {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.at(0, y, x) = (img.at(0, y, x) + img.at(1, y, x) + img.at(2, y, x)) / 3.0f;
  } else {
    throw DecodeFailure("unsupported channel conversion " + std::to_string(img.channels) +
                        " -> " + std::to_string(channels));
  }
  return out;
}

/// Decode + resize + channel conversion in one step, the model input pipeline.
inline Image load_for_input(const std::string& path, int h, int w, int channels) {
  return convert_channels(resize_image(decode_image(path), h, w), channels);
}

}  // namespace cxr
