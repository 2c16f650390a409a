#include "strata/trainer.hpp"

#include <cmath>
#include <sstream>

#include "strata/error.hpp"

namespace strata {

void TrainConfig::validate() const {
  if (total_epochs == 0) throw ConfigError("trainer: total_epochs must be >= 1");
  if (warmup_epochs >= total_epochs)
    throw ConfigError("trainer: warmup_epochs must be < total_epochs");
  if (accum_steps == 0) throw ConfigError("trainer: accum_steps must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("trainer: lr must be positive");
  if (start_epoch >= total_epochs)
    throw ConfigError("trainer: start_epoch must be < total_epochs");
}

double lr_at(std::size_t step, std::size_t total_steps, std::size_t warmup_steps,
             double lr, double power) {
  if (warmup_steps > 0 && step < warmup_steps) {
    const double t = static_cast<double>(step) / static_cast<double>(warmup_steps);
    return lr * (0.1 + 0.9 * t);
  }
  const std::size_t decay_steps = total_steps > warmup_steps ? total_steps - warmup_steps : 1;
  const double progress =
      std::min(1.0, static_cast<double>(step - warmup_steps) / static_cast<double>(decay_steps));
  return lr * std::pow(1.0 - progress, power);
}

std::string history_csv(const std::vector<HistoryRow>& rows) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,lr\n";
  char buf[128];
  for (const HistoryRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss,
                  r.val_loss, r.lr);
    out << buf;
  }
  return out.str();
}

TrainData prepare_train_data(const Dataset& dataset, std::size_t max_points) {
  TrainData d;
  d.stats = dataset.stats;
  d.train_ids = dataset.train_ids;
  d.eval_ids = dataset.eval_ids;
  d.tiles.reserve(dataset.tiles.size());
  for (const PointCloudTile& t : dataset.tiles)
    d.tiles.push_back(preprocess_tile(t, dataset.stats, max_points));
  d.targets_cm = dataset.targets;
  return d;
}

TrainData prepare_train_data(const GeneratedScene& scene, std::size_t max_points) {
  TrainData d;
  d.stats = scene.stats;
  d.train_ids = scene.split.train;
  d.eval_ids = scene.split.eval;
  d.tiles.reserve(scene.tiles.size());
  for (const PointCloudTile& t : scene.tiles)
    d.tiles.push_back(preprocess_tile(t, scene.stats, max_points));
  d.targets_cm = scene.targets;
  return d;
}

double evaluate_loss(const TrainData& data, const std::vector<std::size_t>& ids,
                     const ModelConfig& model_cfg, ParameterStore& store,
                     WeightScheme scheme) {
  if (ids.empty()) throw DegenerateInputError("evaluate_loss: empty id list");
  double acc = 0.0;
  for (const std::size_t id : ids) {
    Tape tape;
    const Value loss = model_loss(tape, store, model_cfg, data.tiles[id],
                                  data.targets_cm[id], data.stats, scheme);
    acc += tape.val(loss).data[0];
  }
  return acc / static_cast<double>(ids.size());
}

TrainResult train_model(const TrainData& data, const ModelConfig& model_cfg,
                        const TrainConfig& cfg, ParameterStore& store) {
  cfg.validate();
  if (data.train_ids.empty() || data.eval_ids.empty())
    throw DegenerateInputError("train_model: empty train or eval split");

  const std::size_t n_train = data.train_ids.size();
  const std::size_t steps_per_epoch =
      (n_train + cfg.accum_steps - 1) / cfg.accum_steps;
  const std::size_t total_steps = cfg.total_epochs * steps_per_epoch;
  const std::size_t warmup_steps = cfg.warmup_epochs * steps_per_epoch;

  AdamWConfig adam;
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  adam.eps = cfg.eps;
  adam.weight_decay = cfg.weight_decay;

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t global_step = cfg.start_epoch * steps_per_epoch;

  for (std::size_t epoch = cfg.start_epoch; epoch < cfg.total_epochs; ++epoch) {
    std::vector<std::size_t> order = data.train_ids;
    {
      Rng shuffle_rng(Rng::derive(cfg.seed, "shuffle", epoch));
      shuffle_rng.shuffle(order);
    }

    double train_acc = 0.0;
    const double epoch_lr = lr_at(global_step, total_steps, warmup_steps, cfg.lr,
                                  cfg.poly_power);
    for (std::size_t pos = 0; pos < order.size();) {
      const std::size_t group = std::min(cfg.accum_steps, order.size() - pos);
      for (std::size_t g = 0; g < group; ++g, ++pos) {
        const std::size_t id = order[pos];
        PointCloudTile tile = data.tiles[id];
        Raster target = data.targets_cm[id];
        if (cfg.augment) {
          Rng aug_rng(Rng::derive(cfg.seed, "augment", epoch * n_train + pos));
          augment(tile, target, aug_rng, cfg.jitter_sigma);
        }
        Tape tape;
        Value loss = model_loss(tape, store, model_cfg, tile, target, data.stats,
                                cfg.weight_scheme);
        const double lval = tape.val(loss).data[0];
        if (!std::isfinite(lval))
          throw DataError("train_model: non-finite loss at step " +
                          std::to_string(global_step) + " tile " + std::to_string(id));
        train_acc += lval;
        // Mean reduction over the accumulation group.
        loss = tape.scale(loss, 1.0 / static_cast<double>(group));
        tape.backward(loss);
      }
      adam.lr = lr_at(global_step, total_steps, warmup_steps, cfg.lr, cfg.poly_power);
      adamw_step(store, adam);
      ++global_step;
    }

    const double val_loss =
        evaluate_loss(data, data.eval_ids, model_cfg, store, cfg.weight_scheme);
    HistoryRow row;
    row.epoch = epoch;
    row.train_loss = train_acc / static_cast<double>(n_train);
    row.val_loss = val_loss;
    row.lr = epoch_lr;
    result.history.push_back(row);

    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.best_params = store;
    }
  }
  return result;
}

MetricsReport evaluate_metrics(const TrainData& data, const std::vector<std::size_t>& ids,
                               const ModelConfig& model_cfg, ParameterStore& store) {
  if (ids.empty()) throw DegenerateInputError("evaluate_metrics: empty id list");

  // Pool all pixels across tiles; classification metrics use the pooled
  // confusion matrix.
  std::vector<double> pred_px, truth_px;
  ConfusionMatrix cm(kNumSeverityClasses);
  std::vector<int> pred_cls_all, true_cls_all;
  std::vector<std::uint8_t> mask_all;

  for (const std::size_t id : ids) {
    const Raster pred = predict_tile(store, model_cfg, data.tiles[id], data.stats);
    const Raster& truth = data.targets_cm[id];
    const auto mask = truth.valid_mask();
    std::vector<int> pred_cls(pred.values.size()), true_cls(pred.values.size(), -1);
    for (std::size_t p = 0; p < pred.values.size(); ++p) {
      if (!mask[p]) {
        pred_cls[p] = -1;
        continue;
      }
      if (model_cfg.task == Task::classification) {
        pred_cls[p] = static_cast<int>(pred.values[p]);
      } else {
        pred_px.push_back(pred.values[p]);
        truth_px.push_back(truth.values[p]);
        pred_cls[p] = severity_class(pred.values[p]);
      }
      true_cls[p] = severity_class(truth.values[p]);
    }
    cm.add(true_cls, pred_cls);
    pred_cls_all.insert(pred_cls_all.end(), pred_cls.begin(), pred_cls.end());
    true_cls_all.insert(true_cls_all.end(), true_cls.begin(), true_cls.end());
    mask_all.insert(mask_all.end(), mask.begin(), mask.end());
  }

  MetricsReport report;
  if (model_cfg.task == Task::regression) {
    Raster pr, tr;
    pr.height = 1;
    pr.width = static_cast<std::uint32_t>(pred_px.size());
    pr.values = pred_px;
    tr.height = 1;
    tr.width = static_cast<std::uint32_t>(truth_px.size());
    tr.values = truth_px;
    const RegressionMetrics rm = regression_metrics(pr, tr);
    report["rmse_cm"] = rm.rmse;
    report["mae_cm"] = rm.mae;
    report["r2"] = rm.r2;
  }
  const IouMetrics iou = iou_metrics(cm);
  for (std::size_t c = 0; c < kNumSeverityClasses; ++c)
    if (std::isfinite(iou.per_class[c]))
      report["iou_c" + std::to_string(c + 1)] = iou.per_class[c];
  report["miou"] = iou.miou;
  report["qwk"] = qwk(cm);
  report["maecu"] = maecu(pred_cls_all, true_cls_all, mask_all);
  return report;
}

} // namespace strata
