#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "strata/rng.hpp"

namespace strata {

/// LP360-style point classes carried per point.
enum PointClass : std::uint8_t {
  kClassGround = 0,
  kClassLowVeg = 1,
  kClassMediumVeg = 2,
  kClassHighVeg = 3,
  kClassOther = 4,
};
constexpr std::size_t kNumPointClasses = 5;

/// Severity classes for the 7-class ordinal formulation (C1..C7 = 0..6).
constexpr std::size_t kNumSeverityClasses = 7;

struct PointCloudTile {
  std::vector<double> x, y, z; // meters when raw, [-1,1]/[0,1] when normalized
  std::vector<double> r, g, b, intensity;
  std::vector<std::uint8_t> label;

  double origin_x = 0.0; // UTM-like metadata, carried opaquely
  double origin_y = 0.0;
  double extent = 0.0; // tile side length, meters
  std::string epoch;
  bool normalized = false;
  bool standardized = false;

  std::size_t size() const { return x.size(); }
};

/// H x W raster; values in cm (or normalized units), NaN marks voids.
struct Raster {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  double cell_size = 0.10;
  std::vector<double> values;

  static Raster filled(std::uint32_t h, std::uint32_t w, double v);
  double& at(std::size_t i, std::size_t j) { return values[i * width + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * width + j]; }
  std::vector<std::uint8_t> valid_mask() const;
  std::size_t valid_count() const;
};

/// Training-split statistics driving every normalization.
struct NormStats {
  double z_min = 0.0, z_max = 1.0;
  std::array<double, 4> attr_mean{}; // r,g,b,intensity
  std::array<double, 4> attr_std{};
  double target_mean = 0.0, target_std = 1.0;
  double clip_low = 0.0, clip_high = 0.0; // 1st/99th percentile, cm
  std::array<double, kNumSeverityClasses> class_counts{};
  std::array<double, kNumSeverityClasses> class_weights{}; // inverse frequency
};

enum class WeightScheme { inv_freq, inv_square };

// ---- file formats ----------------------------------------------------------

/// Tile file "PCT1": u32 N, then N records of 7 little-endian f32
/// (x,y,z,r,g,b,intensity) + u8 class label. Metadata travels in the
/// dataset manifest, not in the tile file.
PointCloudTile read_tile(const std::string& path);
void write_tile(const PointCloudTile& tile, const std::string& path);

/// Raster file "RAS1": u32 H, u32 W, f64 origin_x, f64 origin_y,
/// f64 cell_size, then H*W little-endian f32 values (NaN = void; voids are
/// written as the canonical quiet NaN).
Raster read_raster(const std::string& path);
void write_raster(const Raster& raster, const std::string& path);

/// Flat text key=value stats file, 17 significant digits, fixed key set.
NormStats read_stats(const std::string& path);
void write_stats(const NormStats& stats, const std::string& path);

// ---- preprocessing ---------------------------------------------------------

/// XY mapped affinely from the tile extent to [-1,1]; z mapped by the global
/// min/max to [0,1]; attributes standardized to zero mean / unit variance.
PointCloudTile normalize_tile(const PointCloudTile& tile, const NormStats& stats);

/// Clip to [p1,p99], then (y - mean)/std. Voids pass through.
Raster normalize_target(const Raster& raster, const NormStats& stats);
/// Exact inverse of normalize_target on the clipped range.
Raster denormalize_target(const Raster& raster, const NormStats& stats);

/// Severity class of one elevation-change value (cm):
/// C1 v>1.6, C2 (1.0,1.6], C3 (0.5,1.0], C4 (0.2,0.5], C5 [-0.2,0.2],
/// C6 [-1.0,-0.2), C7 v<-1.0. Throws DataError on non-finite input.
int severity_class(double v_cm);
/// Per-pixel classes; void pixels map to -1.
std::vector<int> discretize(const Raster& raster_cm);

/// Inverse-frequency (max_count/count) or inverse-square weights. Classes
/// with zero count receive the maximum weight over present classes.
std::array<double, kNumSeverityClasses> class_weights(
    const std::array<double, kNumSeverityClasses>& counts, WeightScheme scheme);

/// If the tile exceeds max_n points, 3-D farthest point sampling over xyz,
/// seeded at the point nearest the point-cloud centroid (ties by lower id).
/// Selected points keep ascending original order.
PointCloudTile cap_points(const PointCloudTile& tile, std::size_t max_n);

/// Random 90-degree rotation applied consistently to normalized point XY and
/// the target raster, plus clipped Gaussian xyz jitter (targets unaffected
/// by jitter). Requires a square raster and a normalized tile.
void augment(PointCloudTile& tile, Raster& target, Rng& rng,
             double jitter_sigma = 0.005);

/// Quarter-turn helpers used by augment (exposed for tests).
void rotate_tile_quarter(PointCloudTile& tile, int quarter_turns);
Raster rotate_raster_quarter(const Raster& raster, int quarter_turns);

/// Deterministic 1-in-5 split over row-major-ordered tiles: indices
/// congruent 0 mod 5 are eval, the rest train.
struct SplitResult {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};
SplitResult split_tiles(std::size_t tile_count);

/// Rejects rasters with |value| > 100 cm on any valid pixel.
bool target_in_range(const Raster& raster_cm);

/// Percentile with linear interpolation over sorted data (p in [0,100]).
double percentile(std::vector<double> values, double p);

/// Stats over the training split (population mean/std; percentile clip
/// bounds; severity class counts of clipped targets; inverse-frequency
/// weights).
NormStats compute_norm_stats(const std::vector<const PointCloudTile*>& train_tiles,
                             const std::vector<const Raster*>& train_targets);

// ---- dataset directory -----------------------------------------------------

struct ManifestEntry {
  std::size_t index = 0;
  bool eval = false;
  std::string tile_path;   // relative to the manifest directory
  std::string raster_path; // relative to the manifest directory
  double origin_x = 0.0;
  double origin_y = 0.0;
  double extent = 0.0;
  std::string epoch;
};

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);
std::vector<ManifestEntry> read_manifest(const std::string& path);

/// Fully loaded dataset: raw tiles + cm target rasters + stats.
struct Dataset {
  std::vector<PointCloudTile> tiles;   // raw (meters), metadata filled
  std::vector<Raster> targets;         // cm
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> eval_ids;
  NormStats stats;
};

Dataset load_dataset(const std::string& dir);

} // namespace strata
