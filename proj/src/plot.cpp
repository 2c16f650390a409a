#include "strata/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "strata/error.hpp"

namespace strata {

namespace {

struct Rgb {
  unsigned char r, g, b;
};

constexpr Rgb kVoid{128, 128, 128};

// C1 (dark blue, strong heave) ... C5 (cream) ... C7 (dark red, strong thaw).
constexpr Rgb kClassPalette[7] = {
    {33, 62, 119}, {70, 116, 174}, {146, 185, 219}, {216, 230, 240},
    {247, 238, 214}, {227, 133, 93}, {166, 33, 38},
};

Rgb continuous_color(double v, double scale) {
  if (!std::isfinite(v)) return kVoid;
  const double t = scale > 0.0 ? std::clamp(v / scale, -1.0, 1.0) : 0.0;
  // 0 -> white; positive (heave) -> blue; negative (thaw) -> red.
  if (t >= 0.0) {
    const double u = t;
    return Rgb{static_cast<unsigned char>(255.0 * (1.0 - u * 0.87)),
               static_cast<unsigned char>(255.0 * (1.0 - u * 0.62)),
               255};
  }
  const double u = -t;
  return Rgb{255,
             static_cast<unsigned char>(255.0 * (1.0 - u * 0.75)),
             static_cast<unsigned char>(255.0 * (1.0 - u * 0.85))};
}

Rgb class_color(double v) {
  if (!std::isfinite(v)) return kVoid;
  const int c = static_cast<int>(v);
  if (c < 0 || c >= 7) return kVoid;
  return kClassPalette[c];
}

void write_ppm(const std::string& path, const std::vector<Rgb>& px, std::size_t w,
               std::size_t h) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path);
  f << "P6\n" << w << " " << h << "\n255\n";
  for (const Rgb& p : px) {
    f.put(static_cast<char>(p.r));
    f.put(static_cast<char>(p.g));
    f.put(static_cast<char>(p.b));
  }
  if (!f) throw IoError("write failed: " + path);
}

std::size_t upscale_factor(std::size_t w, std::size_t h) {
  const std::size_t m = std::max(w, h);
  if (m >= 512) return 1;
  return std::max<std::size_t>(1, 512 / m);
}

double abs_scale(const Raster& r) {
  double m = 0.0;
  for (const double v : r.values)
    if (std::isfinite(v)) m = std::max(m, std::abs(v));
  return m;
}

void render(const Raster& raster, bool classes, double scale, std::size_t s,
            std::vector<Rgb>& px, std::size_t stride, std::size_t x_off) {
  for (std::size_t i = 0; i < raster.height; ++i)
    for (std::size_t j = 0; j < raster.width; ++j) {
      const double v = raster.at(i, j);
      const Rgb c = classes ? class_color(v) : continuous_color(v, scale);
      for (std::size_t di = 0; di < s; ++di)
        for (std::size_t dj = 0; dj < s; ++dj)
          px[(i * s + di) * stride + x_off + j * s + dj] = c;
    }
}

} // namespace

void plot_raster(const Raster& raster, bool classes, const std::string& path) {
  if (raster.values.empty()) throw DegenerateInputError("plot_raster: empty raster");
  const std::size_t s = upscale_factor(raster.width, raster.height);
  const std::size_t w = raster.width * s, h = raster.height * s;
  std::vector<Rgb> px(w * h, kVoid);
  render(raster, classes, abs_scale(raster), s, px, w, 0);
  write_ppm(path, px, w, h);
}

void plot_pair(const Raster& truth, const Raster& pred, bool classes,
               const std::string& path) {
  if (truth.height != pred.height || truth.width != pred.width)
    throw DimensionError("plot_pair: raster shapes differ");
  const std::size_t s = upscale_factor(truth.width * 2, truth.height);
  const std::size_t gap = 4;
  const std::size_t w = truth.width * s * 2 + gap, h = truth.height * s;
  std::vector<Rgb> px(w * h, kVoid);
  const double scale = std::max(abs_scale(truth), abs_scale(pred));
  render(truth, classes, scale, s, px, w, 0);
  render(pred, classes, scale, s, px, w, truth.width * s + gap);
  write_ppm(path, px, w, h);
}

} // namespace strata
