#include "strata/decoder.hpp"

#include <string>

#include "strata/error.hpp"

namespace strata {

void DecoderConfig::validate() const {
  if (d == 0 || k == 0) throw ConfigError("decoder: d and k must be >= 1");
  if (m_multiplier == 0) throw ConfigError("decoder: m_multiplier must be >= 1");
  if (tau < 0.0) throw ConfigError("decoder: tau must be >= 0");
  if (lambda < 0.0) throw ConfigError("decoder: lambda must be >= 0");
}

namespace {

std::string phi_prefix(std::size_t stage) {
  return "dec.phi.s" + std::to_string(stage) + ".";
}
std::string profile_prefix(std::size_t stage) {
  return "dec.profile.s" + std::to_string(stage) + ".";
}

constexpr std::size_t kFuseGroups = 8;

} // namespace

void init_decoder_params(const DecoderConfig& cfg, const EncoderConfig& enc,
                         ParameterStore& store, std::uint64_t seed) {
  cfg.validate();
  for (const std::size_t s : cfg.active_stages()) {
    const std::string p = phi_prefix(s);
    store.create_linear_weight(p + "w", enc.stage_channels(s), cfg.d, seed);
    store.create_zeros(p + "b", cfg.d);
  }
  if (cfg.use_z_embedding) {
    store.create_linear_weight("dec.zemb.l1.w", 1, cfg.d, seed);
    store.create_zeros("dec.zemb.l1.b", cfg.d);
    store.create_linear_weight("dec.zemb.l2.w", cfg.d, cfg.d, seed);
    store.create_zeros("dec.zemb.l2.b", cfg.d);
  }
  if (!cfg.mean_pool_profile) {
    for (const std::size_t s : cfg.active_stages()) {
      const std::string p = profile_prefix(s);
      store.create_linear_weight(p + "l1.w", cfg.k * cfg.d, cfg.d, seed);
      store.create_zeros(p + "l1.b", cfg.d);
      store.create_ones(p + "ln.gamma", cfg.d);
      store.create_zeros(p + "ln.beta", cfg.d);
      store.create_linear_weight(p + "l2.w", cfg.d, cfg.d, seed);
      store.create_zeros(p + "l2.b", cfg.d);
    }
  }
}

void init_fusion_params(const DecoderConfig& cfg, std::size_t out_channels,
                        ParameterStore& store, std::uint64_t seed) {
  const std::size_t n_stages = cfg.active_stages().size();
  const std::size_t cin = n_stages * cfg.d;
  const std::size_t mid = 2 * cfg.d;
  if (mid % kFuseGroups != 0 || cfg.d % kFuseGroups != 0)
    throw ConfigError("fusion: decoder dim must be divisible by " +
                      std::to_string(kFuseGroups) + " for GroupNorm");
  store.create_linear_weight("fuse.c1.w", cin, mid, seed);
  store.create_zeros("fuse.c1.b", mid);
  store.create_ones("fuse.gn1.gamma", mid);
  store.create_zeros("fuse.gn1.beta", mid);
  store.create_linear_weight("fuse.c2.w", mid, cfg.d, seed);
  store.create_zeros("fuse.c2.b", cfg.d);
  store.create_ones("fuse.gn2.gamma", cfg.d);
  store.create_zeros("fuse.gn2.beta", cfg.d);
  store.create_linear_weight("fuse.c3.w", cfg.d, out_channels, seed);
  store.create_zeros("fuse.c3.b", out_channels);
}

std::vector<Neighborhood> stage_neighborhoods(const StageFeatures& stage,
                                              const QueryGrid& grid,
                                              const DecoderConfig& cfg) {
  if (stage.count() == 0) throw DegenerateInputError("stage_neighborhoods: empty stage");
  // Bucket size tied to tau keeps ring searches short on dense tiles.
  const XYIndex index(stage.x, stage.y, cfg.tau > 0.0 ? cfg.tau : 0.1);
  std::vector<Neighborhood> out(grid.count());
  for (std::size_t i = 0; i < grid.height; ++i)
    for (std::size_t j = 0; j < grid.width; ++j)
      out[i * grid.width + j] =
          build_neighborhood(index, stage.z, grid.center(i, j), cfg.k,
                             cfg.m_multiplier, cfg.tau, cfg.lambda, cfg.sampling);
  return out;
}

StageGrid project_stage(Tape& tape, ParameterStore& store, const DecoderConfig& cfg,
                        const StageFeatures& stage, const QueryGrid& grid,
                        const std::vector<Neighborhood>& neighborhoods) {
  cfg.validate();
  if (neighborhoods.size() != grid.count())
    throw DimensionError("project_stage: neighborhood count mismatch");

  const std::string pp = phi_prefix(stage.stage);
  Value ftilde = tape.linear(stage.feats, tape.param(store, pp + "w"),
                             tape.param(store, pp + "b"));
  if (cfg.use_z_embedding) {
    DenseArray zcol({stage.count(), 1}, stage.z);
    Value zemb = tape.linear(tape.constant(std::move(zcol)),
                             tape.param(store, "dec.zemb.l1.w"),
                             tape.param(store, "dec.zemb.l1.b"));
    zemb = tape.gelu(zemb);
    zemb = tape.linear(zemb, tape.param(store, "dec.zemb.l2.w"),
                       tape.param(store, "dec.zemb.l2.b"));
    ftilde = tape.add(ftilde, zemb);
  }

  std::vector<std::uint32_t> ids;
  std::vector<double> weights;
  ids.reserve(grid.count() * cfg.k);
  weights.reserve(grid.count() * cfg.k);
  for (const Neighborhood& nb : neighborhoods) {
    if (nb.selected.size() != cfg.k)
      throw DimensionError("project_stage: neighborhood size != k");
    ids.insert(ids.end(), nb.selected.begin(), nb.selected.end());
    weights.insert(weights.end(), nb.weights.begin(), nb.weights.end());
  }

  Value g;
  if (cfg.mean_pool_profile) {
    g = tape.gather_rows_mean(ftilde, ids, cfg.k);
  } else {
    const Value profile = tape.gather_profile(ftilde, ids, weights, cfg.k);
    const std::string pr = profile_prefix(stage.stage);
    Value h = tape.linear(profile, tape.param(store, pr + "l1.w"),
                          tape.param(store, pr + "l1.b"));
    h = tape.layer_norm(h, tape.param(store, pr + "ln.gamma"),
                        tape.param(store, pr + "ln.beta"));
    h = tape.gelu(h);
    g = tape.linear(h, tape.param(store, pr + "l2.w"), tape.param(store, pr + "l2.b"));
  }

  StageGrid out;
  out.height = grid.height;
  out.width = grid.width;
  out.channels = cfg.d;
  out.grid = tape.reshape(g, {grid.height, grid.width, cfg.d});
  return out;
}

Value fuse(Tape& tape, ParameterStore& store, const DecoderConfig& cfg,
           const std::vector<StageGrid>& grids, std::size_t out_channels) {
  if (grids.empty()) throw DegenerateInputError("fuse: no stage grids");
  for (const StageGrid& g : grids)
    if (g.height != grids[0].height || g.width != grids[0].width ||
        g.channels != grids[0].channels)
      throw DimensionError("fuse: mismatched stage grid shapes");
  (void)out_channels;
  (void)cfg;

  std::vector<Value> vals;
  vals.reserve(grids.size());
  for (const StageGrid& g : grids) vals.push_back(g.grid);
  Value x = grids.size() == 1 ? grids[0].grid : tape.concat_channels(vals);

  x = tape.conv1x1(x, tape.param(store, "fuse.c1.w"), tape.param(store, "fuse.c1.b"));
  x = tape.group_norm(x, kFuseGroups, tape.param(store, "fuse.gn1.gamma"),
                      tape.param(store, "fuse.gn1.beta"));
  x = tape.gelu(x);
  x = tape.conv1x1(x, tape.param(store, "fuse.c2.w"), tape.param(store, "fuse.c2.b"));
  x = tape.group_norm(x, kFuseGroups, tape.param(store, "fuse.gn2.gamma"),
                      tape.param(store, "fuse.gn2.beta"));
  x = tape.gelu(x);
  x = tape.conv1x1(x, tape.param(store, "fuse.c3.w"), tape.param(store, "fuse.c3.b"));
  return x;
}

} // namespace strata
