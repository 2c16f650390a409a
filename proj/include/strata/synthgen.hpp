#pragma once

#include <cstdint>
#include <vector>

#include "strata/dataio.hpp"

namespace strata {

/// Synthetic boreal-scene configuration. Tiles are laid row-major on a
/// near-square grid; all fields are smooth functions over scene coordinates
/// so targets are spatially coherent across tile borders.
struct SceneConfig {
  std::uint64_t seed = 1;
  std::size_t tile_count = 80;
  std::size_t points_per_tile = 4000;
  std::size_t grid_height = 64;
  std::size_t grid_width = 64;
  double tile_extent_m = 6.4;

  double noise_sigma_cm = 0.1;       // per-cell target noise
  std::size_t depression_count = 12; // thermokarst pits per scene
  double depression_depth_cm = 3.0;  // max thaw contribution of a pit
  double depth_coeff = 1.0;          // a: cm thaw per cm of pit depth
  double rough_coeff = 1.2;          // b: cm thaw per unit roughness
  double occlusion = 0.7;            // ground-return suppression under canopy
  double canopy_scale = 0.15;        // field length scale, fraction of scene span

  // Stratum height ranges above terrain, meters.
  double ground_lo = 0.0, ground_hi = 0.2;
  double under_lo = 0.5, under_hi = 2.0;
  double medium_lo = 2.0, medium_hi = 5.0;
  double canopy_lo = 5.0, canopy_hi = 15.0;

  // Target point-class shares {ground, low, medium, high veg}; the generator
  // assigns exact per-tile counts from these.
  std::array<double, 4> stratum_shares = {0.18, 0.22, 0.25, 0.35};

  void validate() const;
  std::size_t tiles_per_row() const;
};

/// Latent fields kept for the oracle predictor.
struct SceneLatents {
  struct Rbf {
    double cx, cy, s, w;
  };
  std::vector<Rbf> elevation;  // base terrain, meters (pre-tanh mix)
  std::vector<Rbf> roughness;  // unit field
  std::vector<Rbf> heave_slow; // cm-scale heave, long wavelength
  std::vector<Rbf> heave_med;  // cm-scale heave, medium wavelength
  std::vector<Rbf> canopy;     // canopy density field
  struct Pit {
    double cx, cy, radius_m, depth_cm;
  };
  std::vector<Pit> pits;
};

struct GeneratedScene {
  SceneConfig config;
  SceneLatents latents;
  std::vector<PointCloudTile> tiles;  // raw meters, f32-rounded, labeled
  std::vector<Raster> targets;        // cm, f32-rounded, noise included
  SplitResult split;                  // 1-in-5 row-major
  NormStats stats;                    // from the training split
};

/// Deterministic scene synthesis: terrain + Gaussian pits; thaw
/// = heave - depth_coeff * pit - rough_coeff * (roughness - 1/2) + noise;
/// roughness is written into ground-return intensity only; ground-return
/// placement density is anticorrelated with canopy density (occlusion).
GeneratedScene generate_scene(const SceneConfig& cfg);

/// The generator's own noiseless thaw field at cell centers; an upper bound
/// reference for any model trained on this scene.
Raster oracle_prediction(const GeneratedScene& scene, std::size_t tile_index);

} // namespace strata
