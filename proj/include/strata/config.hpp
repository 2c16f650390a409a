#pragma once

#include <map>
#include <string>

#include "strata/model.hpp"
#include "strata/synthgen.hpp"
#include "strata/trainer.hpp"

namespace strata {

/// Flat key=value run configuration. Every key is documented in the README;
/// unknown keys are rejected. Model/decoder/training defaults follow the
/// published hyperparameter table; generator keys are artifact-specific.
class RunConfig {
public:
  RunConfig(); // defaults

  static RunConfig from_file(const std::string& path);

  /// Parses "key=value"; throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  const std::string& str(const std::string& key) const;
  double number(const std::string& key) const;
  std::uint64_t integer(const std::string& key) const;
  bool flag(const std::string& key) const;

  /// Sorted key=value text that re-parses to an identical config.
  std::string dump() const;

  SceneConfig scene_config() const;
  ModelConfig model_config() const;
  TrainConfig train_config() const;

private:
  std::map<std::string, std::string> values_;
};

} // namespace strata
