#pragma once

#include "strata/decoder.hpp"

namespace strata {

/// Multi-scale mean-pooling projection: stage features are projected to the
/// common dimension with the same stage-specific linear layers as the main
/// decoder, then averaged per grid cell over the points whose XY falls in
/// the cell. Empty cells are zero vectors.
StageGrid mean_pool_project(Tape& tape, ParameterStore& store, const DecoderConfig& cfg,
                            const StageFeatures& stage, const QueryGrid& grid);

/// H x W x 6 featureless grid: five point-class proportions plus ln(1+count).
/// Empty cells are all zero. Throws DataError on unknown labels.
DenseArray histogram_features(const PointCloudTile& tile, const QueryGrid& grid);

void init_histogram_params(std::size_t out_channels, ParameterStore& store,
                           std::uint64_t seed);

/// Three 3x3 convolutions (6 -> 32 -> 32 -> out), GELU between, zero padding.
Value histogram_cnn(Tape& tape, ParameterStore& store, Value feats);

/// Cell index of a normalized XY position (edge-clamped), row-major; shared
/// by binning and the histogram so the two baselines agree on geometry.
std::int64_t cell_of_xy(double x, double y, const QueryGrid& grid);

} // namespace strata
