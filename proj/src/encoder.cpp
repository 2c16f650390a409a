#include "strata/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "strata/error.hpp"

namespace strata {

void EncoderConfig::validate() const {
  if (base_channels == 0) throw ConfigError("encoder: base_channels must be >= 1");
  if (input_features == 0) throw ConfigError("encoder: input_features must be >= 1");
  double prev = 0.0;
  for (const double v : voxel_sizes) {
    if (!(v > prev)) throw ConfigError("encoder: voxel sizes must be strictly increasing");
    prev = v;
  }
}

namespace {

std::string stage_prefix(std::size_t stage) {
  return "enc.s" + std::to_string(stage) + ".";
}

/// Groups point indices by voxel key, ordered by key; members ordered by
/// (x,y,z,index) so pooled sums are independent of input point order.
struct VoxelGroups {
  std::vector<std::vector<std::uint32_t>> members;
  std::vector<double> cx, cy, cz; // centroids
};

VoxelGroups voxelize(const std::vector<double>& x, const std::vector<double>& y,
                     const std::vector<double>& z, double voxel_size) {
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  std::map<Key, std::vector<std::uint32_t>> cells;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Key k{static_cast<std::int64_t>(std::floor((x[i] + 1.0) / voxel_size)),
                static_cast<std::int64_t>(std::floor((y[i] + 1.0) / voxel_size)),
                static_cast<std::int64_t>(std::floor(z[i] / voxel_size))};
    cells[k].push_back(static_cast<std::uint32_t>(i));
  }
  VoxelGroups out;
  out.members.reserve(cells.size());
  for (auto& [key, ids] : cells) {
    std::sort(ids.begin(), ids.end(), [&](std::uint32_t a, std::uint32_t b) {
      return std::tie(x[a], y[a], z[a], a) < std::tie(x[b], y[b], z[b], b);
    });
    double sx = 0.0, sy = 0.0, sz = 0.0;
    for (const std::uint32_t i : ids) {
      sx += x[i];
      sy += y[i];
      sz += z[i];
    }
    const double inv = 1.0 / static_cast<double>(ids.size());
    out.cx.push_back(sx * inv);
    out.cy.push_back(sy * inv);
    out.cz.push_back(sz * inv);
    out.members.push_back(std::move(ids));
  }
  return out;
}

Value stage_mlp(Tape& tape, ParameterStore& store, std::size_t stage, Value in) {
  const std::string p = stage_prefix(stage);
  Value h = tape.linear(in, tape.param(store, p + "l1.w"), tape.param(store, p + "l1.b"));
  h = tape.gelu(h);
  return tape.linear(h, tape.param(store, p + "l2.w"), tape.param(store, p + "l2.b"));
}

} // namespace

void init_encoder_params(const EncoderConfig& cfg, ParameterStore& store,
                         std::uint64_t seed) {
  cfg.validate();
  for (std::size_t stage = 1; stage <= 4; ++stage) {
    const std::size_t cin = stage == 1 ? cfg.input_features : cfg.stage_channels(stage - 1);
    const std::size_t cout = cfg.stage_channels(stage);
    const std::string p = stage_prefix(stage);
    store.create_linear_weight(p + "l1.w", cin, cout, seed);
    store.create_zeros(p + "l1.b", cout);
    store.create_linear_weight(p + "l2.w", cout, cout, seed);
    store.create_zeros(p + "l2.b", cout);
  }
}

std::vector<std::string> encoder_param_names(const EncoderConfig& cfg) {
  (void)cfg;
  std::vector<std::string> names;
  for (std::size_t stage = 1; stage <= 4; ++stage)
    for (const char* leaf : {"l1.w", "l1.b", "l2.w", "l2.b"})
      names.push_back(stage_prefix(stage) + leaf);
  return names;
}

std::array<StageFeatures, 4> encode(Tape& tape, ParameterStore& store,
                                    const EncoderConfig& cfg,
                                    const PointCloudTile& tile) {
  cfg.validate();
  const std::size_t n = tile.size();
  if (n == 0) throw DegenerateInputError("encode: empty tile");
  if (!tile.normalized) throw DataError("encode: tile must be normalized");

  DenseArray in({n, cfg.input_features}, std::vector<double>(n * cfg.input_features));
  for (std::size_t i = 0; i < n; ++i) {
    double* row = in.data.data() + i * cfg.input_features;
    row[0] = tile.x[i];
    row[1] = tile.y[i];
    row[2] = tile.z[i];
    row[3] = tile.r[i];
    row[4] = tile.g[i];
    row[5] = tile.b[i];
    row[6] = tile.intensity[i];
  }

  std::array<StageFeatures, 4> stages;
  stages[0].stage = 1;
  stages[0].x = tile.x;
  stages[0].y = tile.y;
  stages[0].z = tile.z;
  stages[0].feats = stage_mlp(tape, store, 1, tape.constant(std::move(in)));

  for (std::size_t s = 2; s <= 4; ++s) {
    const StageFeatures& prev = stages[s - 2];
    const VoxelGroups vg = voxelize(prev.x, prev.y, prev.z, cfg.voxel_sizes[s - 2]);
    StageFeatures& cur = stages[s - 1];
    cur.stage = s;
    cur.x = vg.cx;
    cur.y = vg.cy;
    cur.z = vg.cz;
    const Value pooled = tape.pool_rows(prev.feats, vg.members);
    cur.feats = stage_mlp(tape, store, s, pooled);
  }
  return stages;
}

} // namespace strata
