#pragma once

#include <optional>
#include <string>
#include <vector>

#include "strata/dataio.hpp"
#include "strata/metrics.hpp"
#include "strata/model.hpp"
#include "strata/synthgen.hpp"

namespace strata {

struct TrainConfig {
  double lr = 1e-5;
  std::size_t warmup_epochs = 2;
  std::size_t total_epochs = 100;
  std::size_t accum_steps = 2; // batch size 1 with gradient accumulation
  double poly_power = 0.9;
  std::uint64_t seed = 0;
  WeightScheme weight_scheme = WeightScheme::inv_freq;
  bool augment = true;
  double jitter_sigma = 0.005;
  std::size_t max_points = 60000;
  std::size_t start_epoch = 0; // resume point; parameters come from the store
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.01;

  void validate() const;
};

/// Linear warmup from 10% to full lr over warmup_steps, then polynomial
/// decay lr * (1 - progress)^power over the remaining steps.
double lr_at(std::size_t step, std::size_t total_steps, std::size_t warmup_steps,
             double lr, double power);

struct HistoryRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

std::string history_csv(const std::vector<HistoryRow>& rows);

/// Preprocessed in-memory training data: capped + normalized tiles and cm
/// targets.
struct TrainData {
  std::vector<PointCloudTile> tiles; // normalized
  std::vector<Raster> targets_cm;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> eval_ids;
  NormStats stats;
};

TrainData prepare_train_data(const Dataset& dataset, std::size_t max_points = 60000);
TrainData prepare_train_data(const GeneratedScene& scene, std::size_t max_points = 60000);

struct TrainResult {
  std::vector<HistoryRow> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  ParameterStore best_params; // lowest-validation-loss snapshot
};

/// Seeded full training loop: per-epoch shuffle + augmentation, gradient
/// accumulation with mean reduction, AdamW with the warmup/poly schedule,
/// per-epoch validation, best-checkpoint retention. `store` must hold the
/// initialized (or resumed) parameters and is left at the final state.
/// Aborts with a diagnostic naming (step, tile) if the loss goes non-finite.
TrainResult train_model(const TrainData& data, const ModelConfig& model_cfg,
                        const TrainConfig& cfg, ParameterStore& store);

/// Mean task loss over the given tiles (no augmentation).
double evaluate_loss(const TrainData& data, const std::vector<std::size_t>& ids,
                     const ModelConfig& model_cfg, ParameterStore& store,
                     WeightScheme scheme);

/// Pooled metrics over the given tiles. Regression reports rmse/mae/r2 in cm
/// plus ordinal metrics of the discretized predictions; classification
/// reports per-class IoU, mIoU, QWK and MAECU from the pooled confusion
/// matrix.
MetricsReport evaluate_metrics(const TrainData& data, const std::vector<std::size_t>& ids,
                               const ModelConfig& model_cfg, ParameterStore& store);

} // namespace strata
