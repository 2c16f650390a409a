#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "strata/dataio.hpp"
#include "strata/tape.hpp"

namespace strata {

/// Reference encoder configuration. The channel ladder is
/// {C, 2C, 4C, 8C} from base_channels; stage 1 is unpooled, stages 2-4 pool
/// into voxel grids of strictly increasing cell size (normalized units).
struct EncoderConfig {
  std::size_t base_channels = 16; // 16 desk scale, 64 paper scale
  std::array<double, 3> voxel_sizes = {0.0625, 0.125, 0.25};
  std::size_t input_features = 7; // x,y,z,r,g,b,intensity

  std::size_t stage_channels(std::size_t stage) const { // stage in 1..4
    return base_channels << (stage - 1);
  }
  void validate() const;
};

/// One encoder stage: point coordinates (normalized) plus a tape Value of
/// per-point features [P_s, C_s]. Coordinates are data, not differentiable.
struct StageFeatures {
  std::size_t stage = 0;
  std::vector<double> x, y, z; // P_s each; pooled stages hold voxel centroids
  Value feats;
  std::size_t count() const { return x.size(); }
};

/// Registers the encoder parameters (per-point MLPs per stage) on the store.
void init_encoder_params(const EncoderConfig& cfg, ParameterStore& store,
                         std::uint64_t seed);

/// Names of encoder parameters, for audits.
std::vector<std::string> encoder_param_names(const EncoderConfig& cfg);

/// Stage 1: two-layer per-point MLP over the 7-dim input at full resolution.
/// Stages 2-4: voxel mean pooling of coords+features at doubling cell sizes,
/// then a two-layer per-point MLP doubling the channel width. Pooled coords
/// are voxel centroids. Pure function of (tile, params).
std::array<StageFeatures, 4> encode(Tape& tape, ParameterStore& store,
                                    const EncoderConfig& cfg,
                                    const PointCloudTile& tile);

} // namespace strata
