#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "strata/params.hpp"
#include "strata/tensor.hpp"

namespace strata {

/// Handle to a node on a Tape.
struct Value {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

/// Reverse-mode tape over DenseArray. Operations are recorded in
/// topological order; backward() walks them in reverse. One logical
/// computation per tape; a tape is single-threaded by contract.
///
/// gelu uses the tanh approximation
///   gelu(x) = 0.5 x (1 + tanh(c0 (x + c1 x^3))),
///   c0 = sqrt(2/pi) = 0.7978845608028654, c1 = 0.044715.
/// All normalizations use eps = 1e-5.
class Tape {
public:
  static constexpr double kNormEps = 1e-5;
  static constexpr double kGeluC0 = 0.7978845608028654;
  static constexpr double kGeluC1 = 0.044715;

  /// Non-differentiable leaf.
  Value constant(DenseArray v);
  /// Differentiable leaf; gradient readable via grad_of after backward.
  Value leaf(DenseArray v);
  /// Leaf bound to a store entry; backward accumulates into store.grad(name).
  Value param(ParameterStore& store, const std::string& name);

  const DenseArray& val(Value v) const { return nodes_[v.id].value; }
  const DenseArray& grad_of(Value v) const { return nodes_[v.id].grad; }

  Value add(Value a, Value b);
  Value scale(Value a, double s);
  /// x [n,in] @ w [in,out] + b [out] -> [n,out]
  Value linear(Value x, Value w, Value b);
  Value gelu(Value x);
  /// Normalizes the last axis; gamma/beta have that axis' length.
  Value layer_norm(Value x, Value gamma, Value beta);
  /// x [H,W,C]; per spatial location normalizes each group of C/groups channels.
  Value group_norm(Value x, std::size_t groups, Value gamma, Value beta);
  /// x [H,W,Cin], w [Cin,Cout], b [Cout]; per-pixel linear map.
  Value conv1x1(Value x, Value w, Value b);
  /// x [H,W,Cin], w [3,3,Cin,Cout], b [Cout]; zero padding, stride 1.
  Value conv3x3(Value x, Value w, Value b);
  Value reshape(Value x, std::vector<std::size_t> shape);
  /// xs all [H,W,Ci] -> [H,W,sum Ci]
  Value concat_channels(const std::vector<Value>& xs);

  /// feats [P,D]; ids/weights flat [Q*k] -> [Q, k*D];
  /// out[q, i*D..] = weights[q*k+i] * feats[ids[q*k+i]].
  Value gather_profile(Value feats, const std::vector<std::uint32_t>& ids,
                       const std::vector<double>& weights, std::size_t k);
  /// Unweighted mean over each query's k gathered rows -> [Q, D].
  Value gather_rows_mean(Value feats, const std::vector<std::uint32_t>& ids,
                         std::size_t k);
  /// Mean over fixed row groups (members summed in the given order) -> [G, D].
  Value pool_rows(Value feats, const std::vector<std::vector<std::uint32_t>>& groups);
  /// Per-cell mean over points mapped to cells (points summed in id order);
  /// cell < 0 drops the point; empty cells are zero. -> [cells, D].
  Value scatter_cell_mean(Value feats, const std::vector<std::int64_t>& cell,
                          std::size_t cells);

  /// Mean of (pred-target)^2 over mask-valid elements -> scalar.
  Value mse_loss(Value pred, const DenseArray& target,
                 const std::vector<std::uint8_t>& mask);
  /// logits [H,W,C]; labels/mask flat [H*W]; per-pixel CE scaled by
  /// weights[label], averaged over valid pixels -> scalar.
  Value weighted_ce_loss(Value logits, const std::vector<int>& labels,
                         const std::vector<double>& weights,
                         const std::vector<std::uint8_t>& mask);

  /// Seeds d(loss)=1 and runs the recorded operations in reverse.
  void backward(Value loss);

  std::size_t size() const { return nodes_.size(); }

private:
  struct Node {
    DenseArray value;
    DenseArray grad;
    std::function<void()> back; // empty for constants
  };

  Value push(DenseArray value, std::function<void()> back = {});
  DenseArray& mutable_grad(Value v) { return nodes_[v.id].grad; }

  std::vector<Node> nodes_;
};

} // namespace strata
