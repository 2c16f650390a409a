#include "strata/baselines.hpp"

#include <cmath>

#include "strata/error.hpp"

namespace strata {

std::int64_t cell_of_xy(double x, double y, const QueryGrid& grid) {
  const auto axis = [](double v, std::size_t n) {
    std::ptrdiff_t c = static_cast<std::ptrdiff_t>(
        std::floor((v + 1.0) * 0.5 * static_cast<double>(n)));
    if (c < 0) c = 0;
    if (c >= static_cast<std::ptrdiff_t>(n)) c = static_cast<std::ptrdiff_t>(n) - 1;
    return static_cast<std::size_t>(c);
  };
  return static_cast<std::int64_t>(axis(y, grid.height) * grid.width + axis(x, grid.width));
}

StageGrid mean_pool_project(Tape& tape, ParameterStore& store, const DecoderConfig& cfg,
                            const StageFeatures& stage, const QueryGrid& grid) {
  if (stage.count() == 0) throw DegenerateInputError("mean_pool_project: empty stage");
  const std::string pp = "dec.phi.s" + std::to_string(stage.stage) + ".";
  const Value ftilde = tape.linear(stage.feats, tape.param(store, pp + "w"),
                                   tape.param(store, pp + "b"));
  std::vector<std::int64_t> cell(stage.count());
  for (std::size_t i = 0; i < stage.count(); ++i)
    cell[i] = cell_of_xy(stage.x[i], stage.y[i], grid);
  const Value pooled = tape.scatter_cell_mean(ftilde, cell, grid.count());
  StageGrid out;
  out.height = grid.height;
  out.width = grid.width;
  out.channels = cfg.d;
  out.grid = tape.reshape(pooled, {grid.height, grid.width, cfg.d});
  return out;
}

DenseArray histogram_features(const PointCloudTile& tile, const QueryGrid& grid) {
  constexpr std::size_t kChannels = kNumPointClasses + 1;
  DenseArray out =
      DenseArray::zeros({grid.height, grid.width, kChannels});
  std::vector<double> counts(grid.count(), 0.0);
  for (std::size_t i = 0; i < tile.size(); ++i) {
    if (tile.label[i] >= kNumPointClasses)
      throw DataError("histogram_features: unknown class label " +
                      std::to_string(tile.label[i]));
    const std::int64_t c = cell_of_xy(tile.x[i], tile.y[i], grid);
    out.data[static_cast<std::size_t>(c) * kChannels + tile.label[i]] += 1.0;
    counts[static_cast<std::size_t>(c)] += 1.0;
  }
  for (std::size_t c = 0; c < grid.count(); ++c) {
    double* row = out.data.data() + c * kChannels;
    if (counts[c] > 0.0) {
      for (std::size_t j = 0; j < kNumPointClasses; ++j) row[j] /= counts[c];
      row[kNumPointClasses] = std::log1p(counts[c]);
    }
  }
  return out;
}

void init_histogram_params(std::size_t out_channels, ParameterStore& store,
                           std::uint64_t seed) {
  constexpr std::size_t kIn = kNumPointClasses + 1;
  constexpr std::size_t kWidth = 32;
  store.create_conv3x3_weight("hist.c1.w", kIn, kWidth, seed);
  store.create_zeros("hist.c1.b", kWidth);
  store.create_conv3x3_weight("hist.c2.w", kWidth, kWidth, seed);
  store.create_zeros("hist.c2.b", kWidth);
  store.create_conv3x3_weight("hist.c3.w", kWidth, out_channels, seed);
  store.create_zeros("hist.c3.b", out_channels);
}

Value histogram_cnn(Tape& tape, ParameterStore& store, Value feats) {
  Value x = tape.conv3x3(feats, tape.param(store, "hist.c1.w"),
                         tape.param(store, "hist.c1.b"));
  x = tape.gelu(x);
  x = tape.conv3x3(x, tape.param(store, "hist.c2.w"), tape.param(store, "hist.c2.b"));
  x = tape.gelu(x);
  return tape.conv3x3(x, tape.param(store, "hist.c3.w"), tape.param(store, "hist.c3.b"));
}

} // namespace strata
