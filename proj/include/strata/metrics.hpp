#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "strata/dataio.hpp"

namespace strata {

/// K x K counts, rows = truth, cols = prediction.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts; // row-major

  explicit ConfusionMatrix(std::size_t k = kNumSeverityClasses)
      : classes(k), counts(k * k, 0) {}
  std::uint64_t& at(std::size_t truth, std::size_t pred) {
    return counts[truth * classes + pred];
  }
  std::uint64_t at(std::size_t truth, std::size_t pred) const {
    return counts[truth * classes + pred];
  }
  std::uint64_t total() const;
  void add(const std::vector<int>& truth, const std::vector<int>& pred);
};

struct RegressionMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
};

/// Over shared-valid pixels of (pred, truth); both rasters in cm.
/// Requires >= 2 valid pixels and nonzero truth variance (for R^2).
RegressionMetrics regression_metrics(const Raster& pred, const Raster& truth);

struct IouMetrics {
  std::vector<double> per_class; // NaN when the class is absent on both sides
  double miou = 0.0;
};

IouMetrics iou_metrics(const ConfusionMatrix& cm);

/// Quadratic weighted kappa: w_ij = (i-j)^2/(K-1)^2, E = outer(row, col)/total,
/// QWK = 1 - sum(wO)/sum(wE).
double qwk(const ConfusionMatrix& cm);

/// Mean |pred - truth| in class-index units over valid pixels.
double maecu(const std::vector<int>& pred_classes, const std::vector<int>& true_classes,
             const std::vector<std::uint8_t>& mask);

/// Moran's I with binary rook (4-neighbor) weights; void pixels are excluded
/// from N and from adjacency.
double morans_i(const Raster& raster);

/// Flat key=value report, also echoed to stdout by the CLI.
using MetricsReport = std::map<std::string, double>;
std::string format_report(const MetricsReport& report, const std::string& header);
void write_report(const MetricsReport& report, const std::string& header,
                  const std::string& path);

} // namespace strata
