#include "strata/model.hpp"

#include <cmath>

#include "strata/error.hpp"

namespace strata {

void init_model_params(const ModelConfig& cfg, ParameterStore& store,
                       std::uint64_t seed) {
  switch (cfg.kind) {
    case ModelKind::zprofile:
      init_encoder_params(cfg.encoder, store, seed);
      init_decoder_params(cfg.decoder, cfg.encoder, store, seed);
      init_fusion_params(cfg.decoder, cfg.out_channels(), store, seed);
      break;
    case ModelKind::meanpool: {
      // Shares encoder, per-stage projections and fusion with the main
      // model; no z-embedding and no profile MLPs.
      init_encoder_params(cfg.encoder, store, seed);
      DecoderConfig dec = cfg.decoder;
      dec.use_z_embedding = false;
      dec.mean_pool_profile = true;
      init_decoder_params(dec, cfg.encoder, store, seed);
      init_fusion_params(dec, cfg.out_channels(), store, seed);
      break;
    }
    case ModelKind::histogram:
      init_histogram_params(cfg.out_channels(), store, seed);
      break;
  }
}

std::vector<std::string> model_param_names(const ModelConfig& cfg) {
  ParameterStore tmp;
  init_model_params(cfg, tmp, 0);
  std::vector<std::string> names;
  for (const auto& [name, e] : tmp.entries()) names.push_back(name);
  return names;
}

Value model_forward(Tape& tape, ParameterStore& store, const ModelConfig& cfg,
                    const PointCloudTile& tile) {
  if (tile.size() == 0) throw DegenerateInputError("model_forward: empty tile");

  if (cfg.kind == ModelKind::histogram) {
    const Value feats = tape.constant(histogram_features(tile, cfg.grid));
    return histogram_cnn(tape, store, feats);
  }

  const auto stages = encode(tape, store, cfg.encoder, tile);
  std::vector<StageGrid> grids;
  for (const std::size_t s : cfg.decoder.active_stages()) {
    const StageFeatures& stage = stages[s - 1];
    if (cfg.kind == ModelKind::meanpool) {
      grids.push_back(mean_pool_project(tape, store, cfg.decoder, stage, cfg.grid));
    } else {
      const auto nbs = stage_neighborhoods(stage, cfg.grid, cfg.decoder);
      grids.push_back(project_stage(tape, store, cfg.decoder, stage, cfg.grid, nbs));
    }
  }
  return fuse(tape, store, cfg.decoder, grids, cfg.out_channels());
}

Value model_loss(Tape& tape, ParameterStore& store, const ModelConfig& cfg,
                 const PointCloudTile& tile, const Raster& target_cm,
                 const NormStats& stats, WeightScheme scheme) {
  if (target_cm.height != cfg.grid.height || target_cm.width != cfg.grid.width)
    throw DimensionError("model_loss: target raster does not match query grid");
  const Value out = model_forward(tape, store, cfg, tile);
  const auto mask = target_cm.valid_mask();

  if (cfg.task == Task::regression) {
    const Raster norm = normalize_target(target_cm, stats);
    const DenseArray target({cfg.grid.height, cfg.grid.width, 1}, norm.values);
    return tape.mse_loss(out, target, mask);
  }

  const std::vector<int> labels = discretize(target_cm);
  std::array<double, kNumSeverityClasses> w = stats.class_weights;
  if (scheme == WeightScheme::inv_square) w = class_weights(stats.class_counts, scheme);
  return tape.weighted_ce_loss(out, labels,
                               std::vector<double>(w.begin(), w.end()),
                               mask);
}

PointCloudTile preprocess_tile(const PointCloudTile& raw, const NormStats& stats,
                               std::size_t max_points) {
  return normalize_tile(cap_points(raw, max_points), stats);
}

Raster predict_tile(ParameterStore& store, const ModelConfig& cfg,
                    const PointCloudTile& tile, const NormStats& stats) {
  Tape tape;
  const Value out = model_forward(tape, store, cfg, tile);
  const DenseArray& arr = tape.val(out);

  Raster raster = Raster::filled(static_cast<std::uint32_t>(cfg.grid.height),
                                 static_cast<std::uint32_t>(cfg.grid.width), 0.0);
  const std::size_t pixels = cfg.grid.count();
  if (cfg.task == Task::regression) {
    for (std::size_t p = 0; p < pixels; ++p)
      raster.values[p] = arr.data[p] * stats.target_std + stats.target_mean;
  } else {
    const std::size_t c = cfg.out_channels();
    for (std::size_t p = 0; p < pixels; ++p) {
      const double* row = arr.data.data() + p * c;
      std::size_t best = 0;
      for (std::size_t j = 1; j < c; ++j)
        if (row[j] > row[best]) best = j;
      raster.values[p] = static_cast<double>(best);
    }
  }
  return raster;
}

} // namespace strata
