#pragma once

#include <cstdint>
#include <vector>

#include "strata/encoder.hpp"
#include "strata/geometry.hpp"
#include "strata/tape.hpp"

namespace strata {

/// Regular grid of cell-center query locations in [-1,1]^2; center of cell
/// (i,j) is at (-1 + (2j+1)/W, -1 + (2i+1)/H).
struct QueryGrid {
  std::size_t height = 64;
  std::size_t width = 64;

  std::size_t count() const { return height * width; }
  Point2 center(std::size_t i, std::size_t j) const {
    return {-1.0 + (2.0 * static_cast<double>(j) + 1.0) / static_cast<double>(width),
            -1.0 + (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(height)};
  }
};

struct DecoderConfig {
  std::size_t d = 128;          // common feature dimension
  std::size_t k = 32;           // neighborhood size
  std::size_t m_multiplier = 2; // candidate pool = m_multiplier * k
  double tau = 0.1;
  double lambda = 10.0;

  // Ablation switches; the default combination is the full model.
  bool use_z_embedding = true;
  SamplingMode sampling = SamplingMode::stratified;
  bool s4_only = false;          // single-scale fusion, stage 4 only
  bool mean_pool_profile = false; // unweighted mean instead of sorted profile

  void validate() const;
  std::vector<std::size_t> active_stages() const {
    return s4_only ? std::vector<std::size_t>{4} : std::vector<std::size_t>{1, 2, 3, 4};
  }
};

/// Per-stage H x W x D feature map on the tape.
struct StageGrid {
  Value grid;
  std::size_t height = 0, width = 0, channels = 0;
};

void init_decoder_params(const DecoderConfig& cfg, const EncoderConfig& enc,
                         ParameterStore& store, std::uint64_t seed);
void init_fusion_params(const DecoderConfig& cfg, std::size_t out_channels,
                        ParameterStore& store, std::uint64_t seed);

/// All query neighborhoods of one stage (row-major grid order).
std::vector<Neighborhood> stage_neighborhoods(const StageFeatures& stage,
                                              const QueryGrid& grid,
                                              const DecoderConfig& cfg);

/// Height-aware projection of one encoder stage onto the query grid:
/// f~ = phi(f) + psi(z), stratified selection, z-sorted distance-weighted
/// profile, then the profile MLP (kD -> D, LayerNorm, GELU, D -> D).
/// With mean_pool_profile the profile is replaced by the unweighted mean
/// of the selected f~.
StageGrid project_stage(Tape& tape, ParameterStore& store, const DecoderConfig& cfg,
                        const StageFeatures& stage, const QueryGrid& grid,
                        const std::vector<Neighborhood>& neighborhoods);

/// Channel-concat + conv1x1(nD->2D) + GroupNorm + GELU + conv1x1(2D->D) +
/// GroupNorm + GELU + conv1x1(D->out_channels).
Value fuse(Tape& tape, ParameterStore& store, const DecoderConfig& cfg,
           const std::vector<StageGrid>& grids, std::size_t out_channels);

} // namespace strata
