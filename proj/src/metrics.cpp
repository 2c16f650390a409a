#include "strata/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "strata/error.hpp"

namespace strata {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (const std::uint64_t c : counts) t += c;
  return t;
}

void ConfusionMatrix::add(const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.size() != pred.size())
    throw DimensionError("ConfusionMatrix::add: size mismatch");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || pred[i] < 0) continue; // void
    if (truth[i] >= static_cast<int>(classes) || pred[i] >= static_cast<int>(classes))
      throw DataError("ConfusionMatrix::add: class out of range");
    ++at(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(pred[i]));
  }
}

RegressionMetrics regression_metrics(const Raster& pred, const Raster& truth) {
  if (pred.height != truth.height || pred.width != truth.width)
    throw DimensionError("regression_metrics: raster shapes differ");
  double se = 0.0, ae = 0.0, tsum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    if (!std::isfinite(pred.values[i]) || !std::isfinite(truth.values[i])) continue;
    const double d = pred.values[i] - truth.values[i];
    se += d * d;
    ae += std::abs(d);
    tsum += truth.values[i];
    ++n;
  }
  if (n < 2) throw DegenerateInputError("regression_metrics: needs >= 2 valid pixels");
  const double mean = tsum / static_cast<double>(n);
  double sstot = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    if (!std::isfinite(pred.values[i]) || !std::isfinite(truth.values[i])) continue;
    const double d = truth.values[i] - mean;
    sstot += d * d;
  }
  if (!(sstot > 0.0))
    throw UndefinedError("regression_metrics: zero truth variance, R^2 undefined");
  RegressionMetrics m;
  m.rmse = std::sqrt(se / static_cast<double>(n));
  m.mae = ae / static_cast<double>(n);
  m.r2 = 1.0 - se / sstot;
  return m;
}

IouMetrics iou_metrics(const ConfusionMatrix& cm) {
  const std::size_t k = cm.classes;
  IouMetrics out;
  out.per_class.assign(k, std::nan(""));
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    if (row + col == 0) continue; // absent from truth and prediction
    const std::uint64_t tp = cm.at(c, c);
    const double denom = static_cast<double>(row + col - tp);
    out.per_class[c] = static_cast<double>(tp) / denom;
    sum += out.per_class[c];
    ++defined;
  }
  if (defined == 0) throw UndefinedError("iou_metrics: all classes absent");
  out.miou = sum / static_cast<double>(defined);
  return out;
}

double qwk(const ConfusionMatrix& cm) {
  const std::size_t k = cm.classes;
  const double total = static_cast<double>(cm.total());
  if (total <= 0.0) throw UndefinedError("qwk: empty confusion matrix");
  std::vector<double> row(k, 0.0), col(k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      row[i] += static_cast<double>(cm.at(i, j));
      col[j] += static_cast<double>(cm.at(i, j));
    }
  const double denom_w = static_cast<double>((k - 1) * (k - 1));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double w = static_cast<double>((i - j) * (i - j)) / denom_w;
      num += w * static_cast<double>(cm.at(i, j));
      den += w * row[i] * col[j] / total;
    }
  if (!(den > 0.0))
    throw UndefinedError("qwk: zero expected disagreement (single class marginals)");
  return 1.0 - num / den;
}

double maecu(const std::vector<int>& pred_classes, const std::vector<int>& true_classes,
             const std::vector<std::uint8_t>& mask) {
  if (pred_classes.size() != true_classes.size() || mask.size() != pred_classes.size())
    throw DimensionError("maecu: size mismatch");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    acc += std::abs(pred_classes[i] - true_classes[i]);
    ++n;
  }
  if (n == 0) throw DegenerateInputError("maecu: empty mask");
  return acc / static_cast<double>(n);
}

double morans_i(const Raster& raster) {
  const std::size_t h = raster.height, w = raster.width;
  double sum = 0.0;
  std::size_t n = 0;
  for (const double v : raster.values) {
    if (!std::isfinite(v)) continue;
    sum += v;
    ++n;
  }
  if (n < 2) throw DegenerateInputError("morans_i: needs >= 2 valid pixels");
  const double mean = sum / static_cast<double>(n);

  double cross = 0.0, wsum = 0.0, var = 0.0;
  const auto valid = [&](std::size_t i, std::size_t j) {
    return std::isfinite(raster.at(i, j));
  };
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      if (!valid(i, j)) continue;
      const double di = raster.at(i, j) - mean;
      var += di * di;
      // Ordered rook neighbors; both directions contribute.
      const std::ptrdiff_t off[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
      for (const auto& o : off) {
        const std::ptrdiff_t ni = static_cast<std::ptrdiff_t>(i) + o[0];
        const std::ptrdiff_t nj = static_cast<std::ptrdiff_t>(j) + o[1];
        if (ni < 0 || nj < 0 || ni >= static_cast<std::ptrdiff_t>(h) ||
            nj >= static_cast<std::ptrdiff_t>(w))
          continue;
        if (!valid(static_cast<std::size_t>(ni), static_cast<std::size_t>(nj))) continue;
        cross += di * (raster.at(static_cast<std::size_t>(ni), static_cast<std::size_t>(nj)) - mean);
        wsum += 1.0;
      }
    }
  if (!(var > 0.0)) throw UndefinedError("morans_i: zero variance");
  if (!(wsum > 0.0)) throw DegenerateInputError("morans_i: no valid adjacencies");
  return (static_cast<double>(n) / wsum) * (cross / var);
}

std::string format_report(const MetricsReport& report, const std::string& header) {
  std::ostringstream out;
  if (!header.empty()) out << "# " << header << "\n";
  out.precision(17);
  for (const auto& [key, value] : report) out << key << "=" << value << "\n";
  return out.str();
}

void write_report(const MetricsReport& report, const std::string& header,
                  const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path);
  f << format_report(report, header);
}

} // namespace strata
