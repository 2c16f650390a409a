#include "strata/config.hpp"

#include <fstream>
#include <sstream>

#include "strata/error.hpp"

namespace strata {

namespace {

const std::map<std::string, std::string>& default_values() {
  static const std::map<std::string, std::string> kDefaults = {
      {"seed", "0"},
      {"task", "regression"},       // regression | classification
      {"model", "zprofile"},        // zprofile | meanpool | histogram
      {"grid", "64"},               // output grid side (H = W)
      // generator
      {"gen.tiles", "80"},
      {"gen.points", "4000"},
      {"gen.extent", "6.4"},
      {"gen.noise_sigma", "0.1"},
      {"gen.depressions", "12"},
      {"gen.depression_depth", "3.0"},
      {"gen.occlusion", "0.7"},
      {"gen.canopy_scale", "0.15"},
      // encoder
      {"enc.base_channels", "64"},
      {"enc.voxel2", "0.0625"},
      {"enc.voxel3", "0.125"},
      {"enc.voxel4", "0.25"},
      // decoder
      {"dec.d", "128"},
      {"dec.k", "32"},
      {"dec.m", "2"},
      {"dec.tau", "0.1"},
      {"dec.lambda", "10"},
      {"dec.use_z_embedding", "true"},
      {"dec.sampling", "stratified"}, // stratified | closest_k
      {"dec.stages", "all"},          // all | s4
      {"dec.mean_pool_profile", "false"},
      // training
      {"train.lr", "1e-5"},
      {"train.warmup_epochs", "2"},
      {"train.epochs", "100"},
      {"train.accum", "2"},
      {"train.poly_power", "0.9"},
      {"train.weight_scheme", "inv_freq"}, // inv_freq | inv_square
      {"train.augment", "true"},
      {"train.jitter_sigma", "0.005"},
      {"train.max_points", "60000"},
  };
  return kDefaults;
}

} // namespace

RunConfig::RunConfig() : values_(default_values()) {}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config: " + path);
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    // strip comments and whitespace
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto notspace = [](char c) { return !std::isspace(static_cast<unsigned char>(c)); };
    line.erase(line.begin(), std::find_if(line.begin(), line.end(), notspace));
    line.erase(std::find_if(line.rbegin(), line.rend(), notspace).base(), line.end());
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    cfg.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!default_values().count(key)) throw ConfigError("unknown config key: " + key);
  values_[key] = value;
}

const std::string& RunConfig::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  return it->second;
}

double RunConfig::number(const std::string& key) const {
  try {
    std::size_t pos = 0;
    const double v = std::stod(str(key), &pos);
    if (pos != str(key).size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not a number: " + str(key));
  }
}

std::uint64_t RunConfig::integer(const std::string& key) const {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(str(key), &pos);
    if (pos != str(key).size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not an integer: " + str(key));
  }
}

bool RunConfig::flag(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key " + key + ": expected true/false, got " + v);
}

std::string RunConfig::dump() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) out << key << "=" << value << "\n";
  return out.str();
}

SceneConfig RunConfig::scene_config() const {
  SceneConfig s;
  s.seed = integer("seed");
  s.tile_count = integer("gen.tiles");
  s.points_per_tile = integer("gen.points");
  s.grid_height = integer("grid");
  s.grid_width = integer("grid");
  s.tile_extent_m = number("gen.extent");
  s.noise_sigma_cm = number("gen.noise_sigma");
  s.depression_count = integer("gen.depressions");
  s.depression_depth_cm = number("gen.depression_depth");
  s.occlusion = number("gen.occlusion");
  s.canopy_scale = number("gen.canopy_scale");
  s.validate();
  return s;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  const std::string& kind = str("model");
  if (kind == "zprofile")
    m.kind = ModelKind::zprofile;
  else if (kind == "meanpool")
    m.kind = ModelKind::meanpool;
  else if (kind == "histogram")
    m.kind = ModelKind::histogram;
  else
    throw ConfigError("config key model: unknown value " + kind);

  const std::string& task = str("task");
  if (task == "regression")
    m.task = Task::regression;
  else if (task == "classification")
    m.task = Task::classification;
  else
    throw ConfigError("config key task: unknown value " + task);

  m.encoder.base_channels = integer("enc.base_channels");
  m.encoder.voxel_sizes = {number("enc.voxel2"), number("enc.voxel3"),
                           number("enc.voxel4")};
  m.encoder.validate();

  m.decoder.d = integer("dec.d");
  m.decoder.k = integer("dec.k");
  m.decoder.m_multiplier = integer("dec.m");
  m.decoder.tau = number("dec.tau");
  m.decoder.lambda = number("dec.lambda");
  m.decoder.use_z_embedding = flag("dec.use_z_embedding");
  const std::string& sampling = str("dec.sampling");
  if (sampling == "stratified")
    m.decoder.sampling = SamplingMode::stratified;
  else if (sampling == "closest_k")
    m.decoder.sampling = SamplingMode::closest_k;
  else
    throw ConfigError("config key dec.sampling: unknown value " + sampling);
  const std::string& stages = str("dec.stages");
  if (stages == "all")
    m.decoder.s4_only = false;
  else if (stages == "s4")
    m.decoder.s4_only = true;
  else
    throw ConfigError("config key dec.stages: unknown value " + stages);
  m.decoder.mean_pool_profile = flag("dec.mean_pool_profile");
  m.decoder.validate();

  m.grid.height = integer("grid");
  m.grid.width = integer("grid");
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.lr = number("train.lr");
  t.warmup_epochs = integer("train.warmup_epochs");
  t.total_epochs = integer("train.epochs");
  t.accum_steps = integer("train.accum");
  t.poly_power = number("train.poly_power");
  t.seed = integer("seed");
  const std::string& scheme = str("train.weight_scheme");
  if (scheme == "inv_freq")
    t.weight_scheme = WeightScheme::inv_freq;
  else if (scheme == "inv_square")
    t.weight_scheme = WeightScheme::inv_square;
  else
    throw ConfigError("config key train.weight_scheme: unknown value " + scheme);
  t.augment = flag("train.augment");
  t.jitter_sigma = number("train.jitter_sigma");
  t.max_points = integer("train.max_points");
  t.validate();
  return t;
}

} // namespace strata
