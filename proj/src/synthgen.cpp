#include "strata/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "strata/error.hpp"

namespace strata {

void SceneConfig::validate() const {
  if (tile_count == 0 || points_per_tile == 0)
    throw ConfigError("synthgen: tile_count and points_per_tile must be >= 1");
  if (grid_height == 0 || grid_width == 0)
    throw ConfigError("synthgen: grid dims must be >= 1");
  if (!(tile_extent_m > 0.0)) throw ConfigError("synthgen: tile extent must be positive");
  if (noise_sigma_cm < 0.0) throw ConfigError("synthgen: noise sigma must be >= 0");
  if (occlusion < 0.0 || occlusion > 1.0)
    throw ConfigError("synthgen: occlusion must be in [0,1]");
  const double pairs[4][2] = {{ground_lo, ground_hi},
                              {under_lo, under_hi},
                              {medium_lo, medium_hi},
                              {canopy_lo, canopy_hi}};
  for (const auto& p : pairs)
    if (!(p[1] > p[0]) || p[0] < 0.0)
      throw ConfigError("synthgen: stratum ranges must be positive");
  if (!(under_lo >= ground_hi && medium_lo >= under_hi && canopy_lo >= medium_hi))
    throw ConfigError("synthgen: stratum ranges must be ordered");
  double share_sum = 0.0;
  for (const double s : stratum_shares) {
    if (s < 0.0) throw ConfigError("synthgen: stratum shares must be >= 0");
    share_sum += s;
  }
  if (!(share_sum > 0.0)) throw ConfigError("synthgen: stratum shares sum to zero");
}

std::size_t SceneConfig::tiles_per_row() const {
  return static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(tile_count))));
}

namespace {

double eval_rbfs(const std::vector<SceneLatents::Rbf>& rbfs, double x, double y) {
  double acc = 0.0;
  for (const auto& r : rbfs) {
    const double dx = x - r.cx, dy = y - r.cy;
    acc += r.w * std::exp(-(dx * dx + dy * dy) / (2.0 * r.s * r.s));
  }
  return acc;
}

std::vector<SceneLatents::Rbf> make_rbfs(Rng& rng, std::size_t count, double span,
                                         double scale) {
  std::vector<SceneLatents::Rbf> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SceneLatents::Rbf r;
    r.cx = rng.uniform(-0.1 * span, 1.1 * span);
    r.cy = rng.uniform(-0.1 * span, 1.1 * span);
    r.s = span * scale * rng.uniform(0.7, 1.4);
    r.w = rng.uniform(-1.0, 1.0);
    out.push_back(r);
  }
  return out;
}

double f32r(double v) { return static_cast<double>(static_cast<float>(v)); }

struct FieldEval {
  const SceneConfig& cfg;
  const SceneLatents& lat;

  double terrain_m(double x, double y) const { // base elevation minus pits
    return 0.12 * std::tanh(eval_rbfs(lat.elevation, x, y)) - pit_m(x, y);
  }
  double pit_cm(double x, double y) const {
    double acc = 0.0;
    for (const auto& p : lat.pits) {
      const double dx = x - p.cx, dy = y - p.cy;
      acc += p.depth_cm * std::exp(-(dx * dx + dy * dy) / (2.0 * p.radius_m * p.radius_m));
    }
    return acc;
  }
  double pit_m(double x, double y) const {
    // Geometric pit depth: 0.18 m of relief per cm of thaw contribution.
    return 0.18 * pit_cm(x, y);
  }
  double roughness(double x, double y) const { // in [0,1]
    return 0.5 * (std::tanh(1.2 * eval_rbfs(lat.roughness, x, y)) + 1.0);
  }
  double canopy(double x, double y) const { // in [0.05, 0.95]
    const double base = 0.5 * (std::tanh(1.2 * eval_rbfs(lat.canopy, x, y)) + 1.0);
    const double pit_boost = std::min(1.0, pit_cm(x, y) / std::max(1e-9, cfg.depression_depth_cm));
    return std::clamp(0.15 + 0.55 * base + 0.4 * pit_boost, 0.05, 0.95);
  }
  double heave_cm(double x, double y) const {
    return 1.1 + 0.9 * std::tanh(eval_rbfs(lat.heave_slow, x, y)) +
           0.45 * std::tanh(1.3 * eval_rbfs(lat.heave_med, x, y));
  }
  double thaw_cm(double x, double y) const { // noiseless target
    return heave_cm(x, y) - cfg.depth_coeff * pit_cm(x, y) +
           cfg.rough_coeff * (roughness(x, y) - 0.5);
  }
};

} // namespace

GeneratedScene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  GeneratedScene scene;
  scene.config = cfg;

  const std::size_t ntx = cfg.tiles_per_row();
  const double span = static_cast<double>(ntx) * cfg.tile_extent_m;

  Rng scene_rng(Rng::derive(cfg.seed, "scene"));
  scene.latents.elevation = make_rbfs(scene_rng, 10, span, 0.35);
  scene.latents.roughness = make_rbfs(scene_rng, 12, span, cfg.canopy_scale);
  scene.latents.heave_slow = make_rbfs(scene_rng, 8, span, 0.4);
  scene.latents.heave_med = make_rbfs(scene_rng, 14, span, 0.06);
  scene.latents.canopy = make_rbfs(scene_rng, 12, span, cfg.canopy_scale);
  for (std::size_t i = 0; i < cfg.depression_count; ++i) {
    SceneLatents::Pit p;
    p.cx = scene_rng.uniform(0.0, span);
    p.cy = scene_rng.uniform(0.0, span);
    p.radius_m = scene_rng.uniform(0.8, 2.0);
    p.depth_cm = cfg.depression_depth_cm * scene_rng.uniform(0.4, 1.0);
    scene.latents.pits.push_back(p);
  }

  const FieldEval fields{cfg, scene.latents};

  // Exact per-tile stratum counts from the configured shares.
  double share_sum = 0.0;
  for (const double s : cfg.stratum_shares) share_sum += s;
  std::array<std::size_t, 4> counts{};
  std::size_t assigned = 0;
  for (int s = 0; s < 4; ++s) {
    counts[s] = static_cast<std::size_t>(
        std::floor(cfg.stratum_shares[s] / share_sum * static_cast<double>(cfg.points_per_tile)));
    assigned += counts[s];
  }
  for (std::size_t i = 0; assigned < cfg.points_per_tile; ++i, ++assigned)
    ++counts[i % 4]; // remainder round-robin

  scene.tiles.reserve(cfg.tile_count);
  scene.targets.reserve(cfg.tile_count);

  for (std::size_t t = 0; t < cfg.tile_count; ++t) {
    Rng rng(Rng::derive(cfg.seed, "tile", t));
    const double ox = static_cast<double>(t % ntx) * cfg.tile_extent_m;
    const double oy = static_cast<double>(t / ntx) * cfg.tile_extent_m;

    PointCloudTile tile;
    tile.origin_x = ox;
    tile.origin_y = oy;
    tile.extent = cfg.tile_extent_m;
    tile.epoch = "may";

    const auto place = [&](int stratum) {
      // Rejection-sample the XY position; ground thins out under canopy,
      // high canopy thickens with it.
      double x = 0.0, y = 0.0;
      for (;;) {
        x = ox + rng.next_double() * cfg.tile_extent_m;
        y = oy + rng.next_double() * cfg.tile_extent_m;
        if (stratum == 0) {
          if (rng.next_double() < 1.0 - cfg.occlusion * fields.canopy(x, y)) break;
        } else if (stratum == 3) {
          if (rng.next_double() < 0.25 + 0.75 * fields.canopy(x, y)) break;
        } else {
          break;
        }
      }

      const double terrain = fields.terrain_m(x, y);
      double z = 0.0, r = 0.0, g = 0.0, b = 0.0, inten = 0.0;
      switch (stratum) {
        case 0: { // ground: intensity carries the roughness field
          z = terrain + rng.uniform(cfg.ground_lo, cfg.ground_hi);
          const double rough = fields.roughness(x, y);
          inten = std::clamp(0.25 + 0.5 * rough + 0.03 * rng.next_gaussian(), 0.0, 1.0);
          r = std::clamp(0.45 + 0.08 * rng.next_gaussian(), 0.0, 1.0);
          g = std::clamp(0.35 + 0.08 * rng.next_gaussian(), 0.0, 1.0);
          b = std::clamp(0.22 + 0.08 * rng.next_gaussian(), 0.0, 1.0);
          break;
        }
        case 1:
          z = terrain + rng.uniform(cfg.under_lo, cfg.under_hi);
          inten = std::clamp(0.45 + 0.10 * rng.next_gaussian(), 0.0, 1.0);
          r = std::clamp(0.25 + 0.10 * rng.next_gaussian(), 0.0, 1.0);
          g = std::clamp(0.55 + 0.10 * rng.next_gaussian(), 0.0, 1.0);
          b = std::clamp(0.25 + 0.10 * rng.next_gaussian(), 0.0, 1.0);
          break;
        case 2:
          z = terrain + rng.uniform(cfg.medium_lo, cfg.medium_hi);
          inten = std::clamp(0.42 + 0.10 * rng.next_gaussian(), 0.0, 1.0);
          r = std::clamp(0.20 + 0.10 * rng.next_gaussian(), 0.0, 1.0);
          g = std::clamp(0.50 + 0.10 * rng.next_gaussian(), 0.0, 1.0);
          b = std::clamp(0.22 + 0.10 * rng.next_gaussian(), 0.0, 1.0);
          break;
        default:
          z = terrain + rng.uniform(cfg.canopy_lo, cfg.canopy_hi);
          inten = std::clamp(0.40 + 0.12 * rng.next_gaussian(), 0.0, 1.0);
          r = std::clamp(0.18 + 0.10 * rng.next_gaussian(), 0.0, 1.0);
          g = std::clamp(0.45 + 0.12 * rng.next_gaussian(), 0.0, 1.0);
          b = std::clamp(0.20 + 0.10 * rng.next_gaussian(), 0.0, 1.0);
          break;
      }
      tile.x.push_back(f32r(x));
      tile.y.push_back(f32r(y));
      tile.z.push_back(f32r(z));
      tile.r.push_back(f32r(r));
      tile.g.push_back(f32r(g));
      tile.b.push_back(f32r(b));
      tile.intensity.push_back(f32r(inten));
      tile.label.push_back(static_cast<std::uint8_t>(stratum));
    };

    for (int s = 0; s < 4; ++s)
      for (std::size_t i = 0; i < counts[s]; ++i) place(s);

    Raster target;
    target.height = static_cast<std::uint32_t>(cfg.grid_height);
    target.width = static_cast<std::uint32_t>(cfg.grid_width);
    target.origin_x = ox;
    target.origin_y = oy;
    target.cell_size = cfg.tile_extent_m / static_cast<double>(cfg.grid_width);
    target.values.resize(cfg.grid_height * cfg.grid_width);
    for (std::size_t i = 0; i < cfg.grid_height; ++i)
      for (std::size_t j = 0; j < cfg.grid_width; ++j) {
        const double cx = ox + (static_cast<double>(j) + 0.5) * cfg.tile_extent_m /
                                   static_cast<double>(cfg.grid_width);
        const double cy = oy + (static_cast<double>(i) + 0.5) * cfg.tile_extent_m /
                                   static_cast<double>(cfg.grid_height);
        const double v = fields.thaw_cm(cx, cy) + cfg.noise_sigma_cm * rng.next_gaussian();
        target.values[i * cfg.grid_width + j] = f32r(v);
      }

    scene.tiles.push_back(std::move(tile));
    scene.targets.push_back(std::move(target));
  }

  scene.split = split_tiles(cfg.tile_count);
  std::vector<const PointCloudTile*> train_tiles;
  std::vector<const Raster*> train_targets;
  for (const std::size_t i : scene.split.train) {
    train_tiles.push_back(&scene.tiles[i]);
    train_targets.push_back(&scene.targets[i]);
  }
  scene.stats = compute_norm_stats(train_tiles, train_targets);
  return scene;
}

Raster oracle_prediction(const GeneratedScene& scene, std::size_t tile_index) {
  if (tile_index >= scene.tiles.size())
    throw DataError("oracle_prediction: tile index out of range");
  const SceneConfig& cfg = scene.config;
  const FieldEval fields{cfg, scene.latents};
  const PointCloudTile& tile = scene.tiles[tile_index];
  Raster out;
  out.height = static_cast<std::uint32_t>(cfg.grid_height);
  out.width = static_cast<std::uint32_t>(cfg.grid_width);
  out.origin_x = tile.origin_x;
  out.origin_y = tile.origin_y;
  out.cell_size = cfg.tile_extent_m / static_cast<double>(cfg.grid_width);
  out.values.resize(cfg.grid_height * cfg.grid_width);
  for (std::size_t i = 0; i < cfg.grid_height; ++i)
    for (std::size_t j = 0; j < cfg.grid_width; ++j) {
      const double cx = tile.origin_x + (static_cast<double>(j) + 0.5) * cfg.tile_extent_m /
                                            static_cast<double>(cfg.grid_width);
      const double cy = tile.origin_y + (static_cast<double>(i) + 0.5) * cfg.tile_extent_m /
                                            static_cast<double>(cfg.grid_height);
      out.values[i * cfg.grid_width + j] = fields.thaw_cm(cx, cy);
    }
  return out;
}

} // namespace strata
