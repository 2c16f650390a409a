#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "strata/rng.hpp"
#include "strata/tensor.hpp"

namespace strata {

struct AdamWConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Named, versioned collection of trainable arrays with gradients and
/// AdamW moment state. Iteration order is name-sorted, which fixes the
/// optimizer update order and the checkpoint entry order.
class ParameterStore {
public:
  struct Entry {
    DenseArray value;
    DenseArray grad;
    DenseArray m; // first moment
    DenseArray v; // second moment
  };

  /// Creates a zero-initialized parameter. Throws if the name exists.
  DenseArray& create(const std::string& name, std::vector<std::size_t> shape);

  /// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init, seeded per-name so
  /// that two models sharing a parameter name and seed get identical values.
  DenseArray& create_linear_weight(const std::string& name, std::size_t fan_in,
                                   std::size_t fan_out, std::uint64_t seed);
  DenseArray& create_conv3x3_weight(const std::string& name, std::size_t cin,
                                    std::size_t cout, std::uint64_t seed);
  /// Zero-initialized bias / beta.
  DenseArray& create_zeros(const std::string& name, std::size_t n);
  /// One-initialized norm scale.
  DenseArray& create_ones(const std::string& name, std::size_t n);

  bool has(const std::string& name) const { return entries_.count(name) != 0; }
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;
  DenseArray& value(const std::string& name) { return entry(name).value; }
  const DenseArray& value(const std::string& name) const { return entry(name).value; }
  DenseArray& grad(const std::string& name) { return entry(name).grad; }

  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }

  std::uint64_t step_count() const { return step_count_; }
  void set_step_count(std::uint64_t s) { step_count_ = s; }

  void zero_grads();
  void scale_grads(double s);

  std::size_t total_elements() const;

private:
  std::map<std::string, Entry> entries_;
  std::uint64_t step_count_ = 0;
};

/// One decoupled-weight-decay Adam step over every entry, in name order.
/// Increments step_count and zeroes gradients afterwards.
void adamw_step(ParameterStore& store, const AdamWConfig& cfg);

/// Checkpoint file ("SPCK"): magic, u16 format version, then per entry:
/// u16 name length, name bytes, u8 rank, u32 dims, little-endian f64 payload.
/// Entries are written in name order; reading stops at EOF. Optimizer
/// moments and the step counter are stored as additional "__opt." entries
/// when include_optimizer_state is set.
void save_checkpoint(const ParameterStore& store, const std::string& path,
                     bool include_optimizer_state = true);
void load_checkpoint(ParameterStore& store, const std::string& path);

} // namespace strata
