#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>

#include <CLI11.hpp>

#include "strata/config.hpp"
#include "strata/error.hpp"
#include "strata/plot.hpp"
#include "strata/threading.hpp"

namespace fs = std::filesystem;
using namespace strata;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open for write: " + path);
  f << text;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open: " + path);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

void ensure_out_dir(const std::string& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    if (!fs::is_empty(dir) && !force)
      throw IoError("output directory not empty (use --force): " + dir);
  } else {
    fs::create_directories(dir);
  }
}

RunConfig load_config(const std::string& path) {
  return path.empty() ? RunConfig() : RunConfig::from_file(path);
}

/// Effective config stored next to a checkpoint by `train`; `eval` and
/// `predict` read it back so a checkpoint is self-describing.
RunConfig sibling_config(const std::string& checkpoint, const std::string& override_path) {
  if (!override_path.empty()) return RunConfig::from_file(override_path);
  const fs::path cfg = fs::path(checkpoint).parent_path() / "config.txt";
  if (!fs::exists(cfg))
    throw IoError("no config.txt next to checkpoint; pass --config");
  return RunConfig::from_file(cfg.string());
}

NormStats sibling_stats(const std::string& checkpoint) {
  const fs::path p = fs::path(checkpoint).parent_path() / "stats.txt";
  if (!fs::exists(p))
    throw IoError("no stats.txt next to checkpoint: " + p.string());
  return read_stats(p.string());
}

int cmd_generate(const std::string& config_path, const std::string& out_dir, bool force,
                 bool dump_only) {
  const RunConfig cfg = load_config(config_path);
  if (dump_only) {
    std::cout << cfg.dump();
    return 0;
  }
  ensure_out_dir(out_dir, force);
  const SceneConfig scene_cfg = cfg.scene_config();
  const GeneratedScene scene = generate_scene(scene_cfg);

  fs::create_directories(fs::path(out_dir) / "tiles");
  fs::create_directories(fs::path(out_dir) / "rasters");
  std::vector<ManifestEntry> entries;
  char name[64];
  for (std::size_t i = 0; i < scene.tiles.size(); ++i) {
    ManifestEntry e;
    e.index = i;
    e.eval = i % 5 == 0;
    std::snprintf(name, sizeof(name), "tiles/tile_%05zu.pct", i);
    e.tile_path = name;
    std::snprintf(name, sizeof(name), "rasters/raster_%05zu.ras", i);
    e.raster_path = name;
    e.origin_x = scene.tiles[i].origin_x;
    e.origin_y = scene.tiles[i].origin_y;
    e.extent = scene.tiles[i].extent;
    e.epoch = scene.tiles[i].epoch;
    write_tile(scene.tiles[i], (fs::path(out_dir) / e.tile_path).string());
    write_raster(scene.targets[i], (fs::path(out_dir) / e.raster_path).string());
    entries.push_back(std::move(e));
  }
  write_manifest(entries, (fs::path(out_dir) / "manifest.txt").string());
  write_stats(scene.stats, (fs::path(out_dir) / "stats.txt").string());
  write_text((fs::path(out_dir) / "config.txt").string(), cfg.dump());
  std::cout << "generated " << scene.tiles.size() << " tiles (" << scene.split.train.size()
            << " train / " << scene.split.eval.size() << " eval) in " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, bool force, bool dump_only) {
  const RunConfig cfg = load_config(config_path);
  if (dump_only) {
    std::cout << cfg.dump();
    return 0;
  }
  ensure_out_dir(out_dir, force);
  const Dataset dataset = load_dataset(data_dir);
  const TrainConfig train_cfg = cfg.train_config();
  const ModelConfig model_cfg = cfg.model_config();
  const TrainData data = prepare_train_data(dataset, train_cfg.max_points);

  ParameterStore store;
  init_model_params(model_cfg, store, train_cfg.seed);
  const TrainResult result = train_model(data, model_cfg, train_cfg, store);

  save_checkpoint(result.best_params, (fs::path(out_dir) / "checkpoint.spck").string());
  save_checkpoint(store, (fs::path(out_dir) / "last.spck").string());
  write_text((fs::path(out_dir) / "history.csv").string(), history_csv(result.history));
  write_text((fs::path(out_dir) / "config.txt").string(), cfg.dump());
  write_stats(data.stats, (fs::path(out_dir) / "stats.txt").string());
  std::cout << "trained " << result.history.size() << " epochs; best val loss "
            << result.best_val_loss << " at epoch " << result.best_epoch << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir,
             const std::string& split, const std::string& config_path,
             const std::string& out_path) {
  const RunConfig cfg = sibling_config(checkpoint, config_path);
  const ModelConfig model_cfg = cfg.model_config();
  const Dataset dataset = load_dataset(data_dir);
  const TrainData data = prepare_train_data(dataset, cfg.train_config().max_points);

  ParameterStore store;
  init_model_params(model_cfg, store, cfg.integer("seed"));
  load_checkpoint(store, checkpoint);

  const std::vector<std::size_t>& ids = split == "train" ? data.train_ids : data.eval_ids;
  const MetricsReport report = evaluate_metrics(data, ids, model_cfg, store);
  const std::string header =
      "strata eval split=" + split +
      " (classification metrics pooled over the split's confusion matrix)";
  std::cout << format_report(report, header);
  if (!out_path.empty()) write_report(report, header, out_path);
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& tile_path,
                const std::string& out_path, const std::string& config_path,
                double origin_x, double origin_y, double extent) {
  const RunConfig cfg = sibling_config(checkpoint, config_path);
  const ModelConfig model_cfg = cfg.model_config();
  const NormStats stats = sibling_stats(checkpoint);

  ParameterStore store;
  init_model_params(model_cfg, store, cfg.integer("seed"));
  load_checkpoint(store, checkpoint);

  PointCloudTile tile = read_tile(tile_path);
  tile.origin_x = origin_x;
  tile.origin_y = origin_y;
  if (extent > 0.0) {
    tile.extent = extent;
  } else {
    // Fallback: square bounding extent of the points themselves.
    double min_x = tile.x[0], max_x = tile.x[0], min_y = tile.y[0], max_y = tile.y[0];
    for (std::size_t i = 1; i < tile.size(); ++i) {
      min_x = std::min(min_x, tile.x[i]);
      max_x = std::max(max_x, tile.x[i]);
      min_y = std::min(min_y, tile.y[i]);
      max_y = std::max(max_y, tile.y[i]);
    }
    tile.origin_x = min_x;
    tile.origin_y = min_y;
    tile.extent = std::max(max_x - min_x, max_y - min_y);
  }

  const PointCloudTile prepped =
      preprocess_tile(tile, stats, cfg.train_config().max_points);
  const Raster raster = predict_tile(store, model_cfg, prepped, stats);
  Raster out = raster;
  out.origin_x = tile.origin_x;
  out.origin_y = tile.origin_y;
  out.cell_size = tile.extent / static_cast<double>(raster.width);
  write_raster(out, out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

struct AblateRow {
  std::string variant;
  double miou = 0.0;
  double rmse_cm = 0.0;
};

int cmd_ablate(const std::string& config_path, const std::string& data_dir,
               const std::string& out_path, bool dump_only) {
  const RunConfig base = load_config(config_path);
  if (dump_only) {
    std::cout << base.dump();
    return 0;
  }
  const Dataset dataset = load_dataset(data_dir);
  const TrainData data = prepare_train_data(dataset, base.train_config().max_points);

  // Table-style variant list: decoder ablations plus the two baselines.
  const std::vector<std::pair<std::string, std::pair<std::string, std::string>>> variants = {
      {"full", {"", ""}},
      {"mean_pool_profile", {"dec.mean_pool_profile", "true"}},
      {"closest_k", {"dec.sampling", "closest_k"}},
      {"m4", {"dec.m", "4"}},
      {"no_z_embedding", {"dec.use_z_embedding", "false"}},
      {"s4_only", {"dec.stages", "s4"}},
      {"baseline_mean_pool", {"model", "meanpool"}},
      {"baseline_histogram", {"model", "histogram"}},
  };

  std::vector<AblateRow> rows(variants.size());
  std::vector<std::function<void()>> jobs;
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    jobs.push_back([&, vi]() {
      const auto& [name, kv] = variants[vi];
      AblateRow row;
      row.variant = name;
      for (const char* task : {"classification", "regression"}) {
        RunConfig cfg = base;
        cfg.set("task", task);
        if (!kv.first.empty()) cfg.set(kv.first, kv.second);
        const ModelConfig model_cfg = cfg.model_config();
        const TrainConfig train_cfg = cfg.train_config();
        ParameterStore store;
        init_model_params(model_cfg, store, train_cfg.seed);
        const TrainResult res = train_model(data, model_cfg, train_cfg, store);
        ParameterStore best = res.best_params;
        const MetricsReport m = evaluate_metrics(data, data.eval_ids, model_cfg, best);
        if (model_cfg.task == Task::classification)
          row.miou = m.at("miou");
        else
          row.rmse_cm = m.at("rmse_cm");
      }
      rows[vi] = std::move(row);
    });
  }
  run_jobs(std::move(jobs));

  std::ostringstream csv;
  csv << "variant,miou,rmse_cm\n";
  char buf[160];
  for (const AblateRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", r.variant.c_str(), r.miou,
                  r.rmse_cm);
    csv << buf;
  }
  write_text(out_path, csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_plot(const std::string& raster_path, const std::string& truth_path,
             const std::string& pred_path, bool classes, const std::string& out_path) {
  if (!raster_path.empty()) {
    plot_raster(read_raster(raster_path), classes, out_path);
  } else {
    plot_pair(read_raster(truth_path), read_raster(pred_path), classes, out_path);
  }
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"z-stratified point-cloud projection: dataset synthesis, training, "
               "evaluation and rendering"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, out_path, checkpoint, tile_path;
  std::string split = "eval";
  std::string raster_path, truth_path, pred_path;
  bool force = false, dump_config = false, classes = false;
  double origin_x = 0.0, origin_y = 0.0, extent = 0.0;

  auto* gen = app.add_subcommand("generate", "synthesize a dataset directory");
  gen->add_option("--config", config_path, "run config file");
  gen->add_option("--out", out_dir, "output dataset directory")->required();
  gen->add_flag("--force", force, "allow writing into a non-empty directory");
  gen->add_flag("--dump-config", dump_config, "print the effective config and exit");

  auto* train = app.add_subcommand("train", "train a model on a dataset");
  train->add_option("--config", config_path, "run config file");
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out_dir, "output run directory")->required();
  train->add_flag("--force", force, "allow writing into a non-empty directory");
  train->add_flag("--dump-config", dump_config, "print the effective config and exit");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--split", split, "eval | train")->check(CLI::IsMember({"eval", "train"}));
  eval->add_option("--config", config_path, "override the checkpoint's config");
  eval->add_option("--out", out_path, "also write the report to this file");

  auto* predict = app.add_subcommand("predict", "predict a raster for one tile");
  predict->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  predict->add_option("--tile", tile_path, "PCT1 tile file")->required();
  predict->add_option("--out", out_path, "output RAS1 raster")->required();
  predict->add_option("--config", config_path, "override the checkpoint's config");
  predict->add_option("--origin-x", origin_x, "tile origin x (meters)");
  predict->add_option("--origin-y", origin_y, "tile origin y (meters)");
  predict->add_option("--extent", extent, "tile extent (meters); default: point bbox");

  auto* ablate = app.add_subcommand("ablate", "train and score every decoder variant");
  ablate->add_option("--config", config_path, "run config file");
  ablate->add_option("--data", data_dir, "dataset directory")->required();
  ablate->add_option("--out", out_path, "output CSV")->required();
  ablate->add_flag("--dump-config", dump_config, "print the effective config and exit");

  auto* plot = app.add_subcommand("plot", "render a raster to binary PPM");
  plot->add_option("--raster", raster_path, "single raster to render");
  plot->add_option("--pair", truth_path, "truth raster (with --pred)");
  plot->add_option("--pred", pred_path, "prediction raster (with --pair)");
  plot->add_flag("--classes", classes, "render as a 7-class map");
  plot->add_option("--out", out_path, "output PPM file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(config_path, out_dir, force, dump_config);
    if (train->parsed()) return cmd_train(config_path, data_dir, out_dir, force, dump_config);
    if (eval->parsed()) return cmd_eval(checkpoint, data_dir, split, config_path, out_path);
    if (predict->parsed())
      return cmd_predict(checkpoint, tile_path, out_path, config_path, origin_x,
                         origin_y, extent);
    if (ablate->parsed()) return cmd_ablate(config_path, data_dir, out_path, dump_config);
    if (plot->parsed()) {
      if (raster_path.empty() == (truth_path.empty() || pred_path.empty()))
        throw ConfigError("plot: pass either --raster or --pair with --pred");
      return cmd_plot(raster_path, truth_path, pred_path, classes, out_path);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
