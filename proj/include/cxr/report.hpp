#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cxr/csv.hpp"
#include "cxr/errors.hpp"
#include "cxr/harness.hpp"

namespace cxr {

enum class FigureFormat { png, svg };

inline FigureFormat figure_format_from_string(const std::string& s) {
  if (s == "png") return FigureFormat::png;
  if (s == "svg") return FigureFormat::svg;
  throw ConfigInvalid("unknown figure format: " + s);
}

namespace plot {

struct Color {
  int r = 0, g = 0, b = 0;
};

inline const std::vector<Color>& palette() {
  static const std::vector<Color> colors = {
      {31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},  {148, 103, 189},
      {140, 86, 75},  {227, 119, 194}, {127, 127, 127}, {188, 189, 34}, {23, 190, 207},
  };
  return colors;
}

inline Color lighten(const Color& c, double amount = 0.55) {
  auto mix = [amount](int v) { return static_cast<int>(v + (255 - v) * amount); };
  return {mix(c.r), mix(c.g), mix(c.b)};
}

inline const Color kBlack{0, 0, 0};
inline const Color kGrid{225, 225, 225};

/// Drawing surface; raster (PNG via OpenCV) and vector (SVG) backends share
/// it so every figure renders identically in both formats.
class Canvas {
 public:
  Canvas(int width, int height) : width_(width), height_(height) {}
  virtual ~Canvas() = default;
  virtual void line(double x1, double y1, double x2, double y2, Color c, double w = 1.0) = 0;
  virtual void rect(double x, double y, double w, double h, Color c, bool fill) = 0;
  virtual void circle(double cx, double cy, double r, Color c) = 0;
  virtual void text(double x, double y, const std::string& s, Color c, double size = 12.0) = 0;
  virtual void save(const std::filesystem::path& out) const = 0;
  int width() const { return width_; }
  int height() const { return height_; }

 protected:
  int width_, height_;
};

class RasterCanvas final : public Canvas {
 public:
  RasterCanvas(int width, int height)
      : Canvas(width, height), img_(height, width, CV_8UC3, cv::Scalar(255, 255, 255)) {}

  void line(double x1, double y1, double x2, double y2, Color c, double w) override {
    cv::line(img_, pt(x1, y1), pt(x2, y2), bgr(c), std::max(1, static_cast<int>(w)), cv::LINE_AA);
  }
  void rect(double x, double y, double w, double h, Color c, bool fill) override {
    cv::rectangle(img_, pt(x, y), pt(x + w, y + h), bgr(c), fill ? cv::FILLED : 1);
  }
  void circle(double cx, double cy, double r, Color c) override {
    cv::circle(img_, pt(cx, cy), std::max(1, static_cast<int>(r)), bgr(c), cv::FILLED,
               cv::LINE_AA);
  }
  void text(double x, double y, const std::string& s, Color c, double size) override {
    cv::putText(img_, s, pt(x, y), cv::FONT_HERSHEY_SIMPLEX, size / 28.0, bgr(c), 1, cv::LINE_AA);
  }
  void save(const std::filesystem::path& out) const override {
    if (!cv::imwrite(out.string(), img_)) throw IoFailure("cannot write figure: " + out.string());
  }

 private:
  static cv::Point pt(double x, double y) {
    return {static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y))};
  }
  static cv::Scalar bgr(Color c) { return {static_cast<double>(c.b), static_cast<double>(c.g),
                                           static_cast<double>(c.r)}; }
  cv::Mat img_;
};

class SvgCanvas final : public Canvas {
 public:
  SvgCanvas(int width, int height) : Canvas(width, height) {}

  void line(double x1, double y1, double x2, double y2, Color c, double w) override {
    body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
             num(y2) + "\" stroke=\"" + hex(c) + "\" stroke-width=\"" + num(w) + "\"/>\n";
  }
  void rect(double x, double y, double w, double h, Color c, bool fill) override {
    body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) +
             "\" height=\"" + num(h) + "\" " +
             (fill ? "fill=\"" + hex(c) + "\"" : "fill=\"none\" stroke=\"" + hex(c) + "\"") +
             "/>\n";
  }
  void circle(double cx, double cy, double r, Color c) override {
    body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) +
             "\" fill=\"" + hex(c) + "\"/>\n";
  }
  void text(double x, double y, const std::string& s, Color c, double size) override {
    std::string escaped;
    for (char ch : s) {
      if (ch == '&') escaped += "&amp;";
      else if (ch == '<') escaped += "&lt;";
      else if (ch == '>') escaped += "&gt;";
      else escaped += ch;
    }
    body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" +
             num(size) + "\" fill=\"" + hex(c) + "\">" + escaped + "</text>\n";
  }
  void save(const std::filesystem::path& out) const override {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw IoFailure("cannot write figure: " + out.string());
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\""
      << height_ << "\" viewBox=\"0 0 " << width_ << " " << height_ << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
      << body_ << "</svg>\n";
    if (!f) throw IoFailure("figure write failed: " + out.string());
  }

 private:
  static std::string num(double v) { return format_sig6(v); }
  static std::string hex(Color c) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
  }
  std::string body_;
};

inline std::unique_ptr<Canvas> make_canvas(FigureFormat format, int width, int height) {
  if (format == FigureFormat::svg) return std::make_unique<SvgCanvas>(width, height);
  return std::make_unique<RasterCanvas>(width, height);
}

/// Pixel rectangle with a data-space mapping; y grows upward in data space.
struct Area {
  double x0, y0, x1, y1;  // pixel corners (y0 = top)
  double xmin, xmax, ymin, ymax;

  double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * (x1 - x0); }
  double py(double y) const { return y1 - (y - ymin) / (ymax - ymin) * (y1 - y0); }
};

inline double nice_step(double range) {
  if (!(range > 0.0)) return 1.0;
  const double raw = range / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (m * mag >= raw) return m * mag;
  return 10.0 * mag;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

inline void expand_if_flat(double& lo, double& hi, double pad) {
  if (hi - lo < 1e-12) {
    lo -= pad;
    hi += pad;
  }
}

inline void draw_axes(Canvas& canvas, const Area& a, const std::string& xlabel,
                      const std::string& ylabel) {
  const double xstep = nice_step(a.xmax - a.xmin);
  for (double v = std::ceil(a.xmin / xstep) * xstep; v <= a.xmax + 1e-9; v += xstep) {
    canvas.line(a.px(v), a.y0, a.px(v), a.y1, kGrid);
    canvas.line(a.px(v), a.y1, a.px(v), a.y1 + 4, kBlack);
    canvas.text(a.px(v) - 10, a.y1 + 18, tick_label(v), kBlack, 10);
  }
  const double ystep = nice_step(a.ymax - a.ymin);
  for (double v = std::ceil(a.ymin / ystep) * ystep; v <= a.ymax + 1e-9; v += ystep) {
    canvas.line(a.x0, a.py(v), a.x1, a.py(v), kGrid);
    canvas.line(a.x0 - 4, a.py(v), a.x0, a.py(v), kBlack);
    canvas.text(a.x0 - 44, a.py(v) + 4, tick_label(v), kBlack, 10);
  }
  canvas.rect(a.x0, a.y0, a.x1 - a.x0, a.y1 - a.y0, kBlack, false);
  if (!xlabel.empty())
    canvas.text((a.x0 + a.x1) / 2 - 18, a.y1 + 34, xlabel, kBlack, 11);
  if (!ylabel.empty()) canvas.text(a.x0 - 48, a.y0 - 10, ylabel, kBlack, 11);
}

inline void draw_series(Canvas& canvas, const Area& a, const std::vector<double>& xs,
                        const std::vector<double>& ys, Color color) {
  for (std::size_t i = 0; i + 1 < xs.size(); ++i)
    canvas.line(a.px(xs[i]), a.py(ys[i]), a.px(xs[i + 1]), a.py(ys[i + 1]), color);
  for (std::size_t i = 0; i < xs.size(); ++i) canvas.circle(a.px(xs[i]), a.py(ys[i]), 2, color);
}

}  // namespace plot

/// Two-panel accuracy/loss figure from a history CSV; one train and one
/// validation series per fold.
inline void render_curves(const std::filesystem::path& history_csv,
                          const std::filesystem::path& out,
                          FigureFormat format = FigureFormat::png) {
  TrainingHistory history = read_history_csv(history_csv);
  if (history.rows.empty()) throw ParseFailure("history has no rows: " + history_csv.string());

  std::map<int, std::vector<HistoryRow>> by_fold;
  for (const auto& r : history.rows) by_fold[r.fold].push_back(r);

  auto canvas = plot::make_canvas(format, 1040, 430);
  double max_epoch = 1.0, max_loss = 0.0;
  double acc_lo = 1.0, acc_hi = 0.0;
  for (const auto& r : history.rows) {
    max_epoch = std::max(max_epoch, static_cast<double>(r.epoch));
    max_loss = std::max({max_loss, r.loss, r.val_loss});
    acc_lo = std::min({acc_lo, r.accuracy, r.val_accuracy});
    acc_hi = std::max({acc_hi, r.accuracy, r.val_accuracy});
  }
  plot::expand_if_flat(acc_lo, acc_hi, 0.05);
  const double acc_pad = (acc_hi - acc_lo) * 0.08;

  plot::Area acc_area{70, 40, 480, 360, 1.0, std::max(2.0, max_epoch),
                      std::max(0.0, acc_lo - acc_pad), std::min(1.0, acc_hi + acc_pad)};
  plot::Area loss_area{600, 40, 1010, 360, 1.0, std::max(2.0, max_epoch), 0.0,
                       std::max(max_loss * 1.08, 0.1)};
  plot::expand_if_flat(acc_area.ymin, acc_area.ymax, 0.05);

  plot::draw_axes(*canvas, acc_area, "epoch", "accuracy");
  plot::draw_axes(*canvas, loss_area, "epoch", "loss");
  canvas->text(230, 24, "accuracy", plot::kBlack, 14);
  canvas->text(780, 24, "loss", plot::kBlack, 14);

  int color_idx = 0;
  double legend_y = 52;
  for (const auto& [fold, rows] : by_fold) {
    const plot::Color train_color = plot::palette()[color_idx % plot::palette().size()];
    const plot::Color val_color = plot::lighten(train_color);
    std::vector<double> xs, train_acc, val_acc, train_loss, val_loss;
    for (const auto& r : rows) {
      xs.push_back(r.epoch);
      train_acc.push_back(r.accuracy);
      val_acc.push_back(r.val_accuracy);
      train_loss.push_back(r.loss);
      val_loss.push_back(r.val_loss);
    }
    plot::draw_series(*canvas, acc_area, xs, train_acc, train_color);
    plot::draw_series(*canvas, acc_area, xs, val_acc, val_color);
    plot::draw_series(*canvas, loss_area, xs, train_loss, train_color);
    plot::draw_series(*canvas, loss_area, xs, val_loss, val_color);
    canvas->line(488, legend_y - 4, 506, legend_y - 4, train_color, 2);
    canvas->text(510, legend_y, "f" + std::to_string(fold) + " train", plot::kBlack, 9);
    legend_y += 14;
    canvas->line(488, legend_y - 4, 506, legend_y - 4, val_color, 2);
    canvas->text(510, legend_y, "f" + std::to_string(fold) + " val", plot::kBlack, 9);
    legend_y += 14;
    ++color_idx;
  }
  canvas->save(out);
}

/// Annotated K x K heatmap from a confusion CSV (class-name header row and
/// leading column).
inline void render_confusion_heatmap(const std::filesystem::path& cm_csv,
                                     const std::filesystem::path& out,
                                     FigureFormat format = FigureFormat::png) {
  CsvTable table = read_csv(cm_csv);
  if (table.header.size() < 2 || !table.header[0].empty())
    throw ParseFailure("confusion CSV must start with an empty header cell: " + cm_csv.string());
  const std::size_t k = table.header.size() - 1;
  if (table.rows.size() != k)
    throw NonSquareMatrix("confusion CSV has " + std::to_string(table.rows.size()) + " rows for " +
                          std::to_string(k) + " columns");
  std::vector<std::string> names(table.header.begin() + 1, table.header.end());
  std::vector<std::vector<long long>> counts(k, std::vector<long long>(k));
  long long max_count = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (table.rows[i][0] != names[i])
      throw ParseFailure("confusion CSV row label mismatch: " + table.rows[i][0]);
    for (std::size_t j = 0; j < k; ++j) {
      counts[i][j] = parse_int(table.rows[i][j + 1]);
      if (counts[i][j] < 0) throw ParseFailure("negative confusion count");
      max_count = std::max(max_count, counts[i][j]);
    }
  }

  const int cell = 84, left = 120, top = 70, bottom = 50;
  auto canvas = plot::make_canvas(format, left + cell * static_cast<int>(k) + 40,
                                  top + cell * static_cast<int>(k) + bottom);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double f = max_count > 0 ? static_cast<double>(counts[i][j]) / max_count : 0.0;
      // white -> deep blue
      const plot::Color fill{static_cast<int>(255 - f * (255 - 31)),
                             static_cast<int>(255 - f * (255 - 119)),
                             static_cast<int>(255 - f * (255 - 180))};
      const double x = left + static_cast<double>(j) * cell;
      const double y = top + static_cast<double>(i) * cell;
      canvas->rect(x, y, cell - 1, cell - 1, fill, true);
      canvas->rect(x, y, cell - 1, cell - 1, {200, 200, 200}, false);
      const std::string text = std::to_string(counts[i][j]);
      const plot::Color ink = f > 0.55 ? plot::Color{255, 255, 255} : plot::kBlack;
      canvas->text(x + cell / 2.0 - 4.0 * static_cast<double>(text.size()), y + cell / 2.0 + 5,
                   text, ink, 13);
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    canvas->text(8, top + static_cast<double>(i) * cell + cell / 2.0 + 4, names[i], plot::kBlack,
                 11);
    canvas->text(left + static_cast<double>(i) * cell + 6,
                 top + static_cast<double>(k) * cell + 22, names[i], plot::kBlack, 11);
  }
  canvas->text(left + cell * static_cast<double>(k) / 2 - 30,
               top + cell * static_cast<double>(k) + 42, "predicted", plot::kBlack, 12);
  canvas->text(10, top - 16, "true", plot::kBlack, 12);
  canvas->save(out);
}

/// Bar chart from a `label,count` CSV, counts annotated above each bar.
inline void render_distribution(const std::filesystem::path& dist_csv,
                                const std::filesystem::path& out,
                                FigureFormat format = FigureFormat::png) {
  CsvTable table = read_csv(dist_csv);
  if (table.header != std::vector<std::string>{"label", "count"})
    throw ParseFailure("distribution CSV must have header label,count: " + dist_csv.string());
  std::vector<std::pair<std::string, long long>> bars;
  long long max_count = 1;
  for (const auto& row : table.rows) {
    long long n = parse_int(row[1]);
    if (n < 0) throw ParseFailure("negative count in distribution CSV");
    bars.push_back({row[0], n});
    max_count = std::max(max_count, n);
  }
  if (bars.empty()) throw ParseFailure("distribution CSV has no rows: " + dist_csv.string());

  const int width = std::max(420, 120 + 110 * static_cast<int>(bars.size()));
  auto canvas = plot::make_canvas(format, width, 420);
  plot::Area area{70, 40, width - 30.0, 350, 0.0, static_cast<double>(bars.size()), 0.0,
                  max_count * 1.12};
  plot::draw_axes(*canvas, area, "", "count");
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const plot::Color color = plot::palette()[i % plot::palette().size()];
    const double x_left = area.px(i + 0.18), x_right = area.px(i + 0.82);
    const double y_top = area.py(static_cast<double>(bars[i].second)), y_base = area.py(0.0);
    canvas->rect(x_left, y_top, x_right - x_left, y_base - y_top, color, true);
    canvas->text(x_left, y_top - 6, std::to_string(bars[i].second), plot::kBlack, 11);
    canvas->text(x_left, 372, bars[i].first, plot::kBlack, 11);
  }
  canvas->save(out);
}

namespace detail {

struct ScatterPoint {
  std::string label;
  double mean;
  double std_dev;
};

inline std::vector<ScatterPoint> read_scatter_points(const std::filesystem::path& stats_csv) {
  CsvTable table = read_csv(stats_csv);
  if (table.header.size() < 4 || table.header[0] != "id" || table.header[1] != "label")
    throw ParseFailure("stats CSV must have header id,label,mean_c*,std_c*: " +
                       stats_csv.string());
  std::size_t mean_cols = 0, std_cols = 0;
  for (std::size_t c = 2; c < table.header.size(); ++c) {
    if (table.header[c].rfind("mean_c", 0) == 0) ++mean_cols;
    else if (table.header[c].rfind("std_c", 0) == 0) ++std_cols;
    else throw ParseFailure("unexpected stats column: " + table.header[c]);
  }
  if (mean_cols == 0 || mean_cols != std_cols)
    throw ParseFailure("stats CSV needs matching mean_c*/std_c* columns");
  std::vector<ScatterPoint> points;
  for (const auto& row : table.rows) {
    double mean = 0.0, sd = 0.0;
    for (std::size_t c = 0; c < mean_cols; ++c) mean += parse_double(row[2 + c]);
    for (std::size_t c = 0; c < std_cols; ++c) sd += parse_double(row[2 + mean_cols + c]);
    points.push_back({row[1], mean / static_cast<double>(mean_cols),
                      sd / static_cast<double>(std_cols)});
  }
  return points;
}

}  // namespace detail

/// Mean-vs-std scatter colored per class; `per_class` lays one panel per
/// class out in a grid instead of overlaying everything.
inline void render_scatter(const std::filesystem::path& stats_csv,
                           const std::filesystem::path& out, bool per_class = false,
                           FigureFormat format = FigureFormat::png) {
  auto points = detail::read_scatter_points(stats_csv);
  std::map<std::string, int> class_color;
  for (const auto& p : points)
    if (!class_color.count(p.label)) class_color[p.label] = static_cast<int>(class_color.size());

  double xlo = 1e30, xhi = -1e30, ylo = 1e30, yhi = -1e30;
  for (const auto& p : points) {
    xlo = std::min(xlo, p.mean);
    xhi = std::max(xhi, p.mean);
    ylo = std::min(ylo, p.std_dev);
    yhi = std::max(yhi, p.std_dev);
  }
  if (points.empty()) {
    xlo = 0.0; xhi = 1.0; ylo = 0.0; yhi = 0.5;
  }
  plot::expand_if_flat(xlo, xhi, 0.05);
  plot::expand_if_flat(ylo, yhi, 0.05);
  const double xpad = (xhi - xlo) * 0.06, ypad = (yhi - ylo) * 0.06;
  xlo -= xpad; xhi += xpad; ylo -= ypad; yhi += ypad;

  auto draw_panel = [&](plot::Canvas& canvas, const plot::Area& area,
                        const std::string& only_class) {
    plot::draw_axes(canvas, area, "mean", "std");
    for (const auto& p : points) {
      if (!only_class.empty() && p.label != only_class) continue;
      canvas.circle(area.px(p.mean), area.py(p.std_dev), 2,
                    plot::palette()[class_color[p.label] % plot::palette().size()]);
    }
  };

  if (!per_class) {
    auto canvas = plot::make_canvas(format, 640, 480);
    plot::Area area{70, 40, 600, 410, xlo, xhi, ylo, yhi};
    draw_panel(*canvas, area, "");
    double ly = 52;
    for (const auto& [cls, idx] : class_color) {
      canvas->circle(78, ly - 4, 3, plot::palette()[idx % plot::palette().size()]);
      canvas->text(88, ly, cls, plot::kBlack, 10);
      ly += 16;
    }
    canvas->save(out);
    return;
  }

  const int n = std::max<int>(1, static_cast<int>(class_color.size()));
  const int cols = 2, rows = (n + 1) / 2;
  const int pw = 470, ph = 360;
  auto canvas = plot::make_canvas(format, cols * pw, 60 + rows * ph);
  int idx = 0;
  for (const auto& [cls, color_idx] : class_color) {
    const int r = idx / cols, c = idx % cols;
    plot::Area area{c * pw + 70.0, 40.0 + r * ph, c * pw + pw - 30.0, r * ph + ph - 20.0,
                    xlo, xhi, ylo, yhi};
    draw_panel(*canvas, area, cls);
    canvas->text(c * pw + 70, 28 + r * ph, cls, plot::kBlack, 13);
    ++idx;
  }
  canvas->save(out);
}

}  // namespace cxr
