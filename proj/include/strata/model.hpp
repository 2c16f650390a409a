#pragma once

#include "strata/baselines.hpp"
#include "strata/dataio.hpp"
#include "strata/decoder.hpp"
#include "strata/encoder.hpp"

namespace strata {

enum class Task { regression, classification };

enum class ModelKind {
  zprofile,  // the z-stratified projection decoder
  meanpool,  // per-cell mean-pooling projection baseline
  histogram, // featureless class-histogram CNN baseline
};

struct ModelConfig {
  ModelKind kind = ModelKind::zprofile;
  Task task = Task::regression;
  EncoderConfig encoder;
  DecoderConfig decoder;
  QueryGrid grid;

  std::size_t out_channels() const {
    return task == Task::classification ? kNumSeverityClasses : 1;
  }
};

void init_model_params(const ModelConfig& cfg, ParameterStore& store,
                       std::uint64_t seed);
std::vector<std::string> model_param_names(const ModelConfig& cfg);

/// Full forward pass on a normalized tile -> Value [H,W,out_channels].
Value model_forward(Tape& tape, ParameterStore& store, const ModelConfig& cfg,
                    const PointCloudTile& tile);

/// Task loss against a cm target raster: regression uses MSE on the
/// normalized target; classification uses weighted CE on discretized
/// classes. Void pixels are masked out.
Value model_loss(Tape& tape, ParameterStore& store, const ModelConfig& cfg,
                 const PointCloudTile& tile, const Raster& target_cm,
                 const NormStats& stats, WeightScheme scheme);

/// Cap + normalize, the standard inference preprocessing.
PointCloudTile preprocess_tile(const PointCloudTile& raw, const NormStats& stats,
                               std::size_t max_points = 60000);

/// Regression: denormalized cm raster. Classification: argmax class indices
/// (ties to the lower class). The tile must already be normalized.
Raster predict_tile(ParameterStore& store, const ModelConfig& cfg,
                    const PointCloudTile& tile, const NormStats& stats);

} // namespace strata
