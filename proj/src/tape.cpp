#include "strata/tape.hpp"

#include <cmath>

#include "strata/error.hpp"

namespace strata {

namespace {

void check_rank2(const DenseArray& a, const char* what) {
  if (a.rank() != 2) throw DimensionError(std::string(what) + " expects rank 2, got " + shape_str(a.shape));
}

// y = x @ w, x [n,in] row-major, w [in,out]; accumulate into out (preset with bias).
void matmul_acc(const double* x, const double* w, double* out, std::size_t n,
                std::size_t in, std::size_t cout) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x + i * in;
    double* oi = out + i * cout;
    for (std::size_t p = 0; p < in; ++p) {
      const double xv = xi[p];
      if (xv == 0.0) continue;
      const double* wp = w + p * cout;
      for (std::size_t j = 0; j < cout; ++j) oi[j] += xv * wp[j];
    }
  }
}

} // namespace

Value Tape::push(DenseArray value, std::function<void()> back) {
  Node n;
  n.grad = DenseArray::zeros(value.shape);
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Value{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Value Tape::constant(DenseArray v) { return push(std::move(v)); }

Value Tape::leaf(DenseArray v) { return push(std::move(v)); }

Value Tape::param(ParameterStore& store, const std::string& name) {
  auto& e = store.entry(name);
  const Value out = push(e.value);
  ParameterStore* s = &store;
  nodes_[out.id].back = [this, out, s, name]() {
    auto& g = s->grad(name);
    const auto& og = nodes_[out.id].grad;
    for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += og.data[i];
  };
  return out;
}

Value Tape::add(Value a, Value b) {
  const auto& va = val(a);
  const auto& vb = val(b);
  if (!va.same_shape(vb))
    throw DimensionError("add: shape mismatch " + shape_str(va.shape) + " vs " + shape_str(vb.shape));
  DenseArray out = va;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += vb.data[i];
  const Value o = push(std::move(out));
  nodes_[o.id].back = [this, o, a, b]() {
    const auto& og = nodes_[o.id].grad;
    auto& ga = mutable_grad(a);
    auto& gb = mutable_grad(b);
    for (std::size_t i = 0; i < og.numel(); ++i) {
      ga.data[i] += og.data[i];
      gb.data[i] += og.data[i];
    }
  };
  return o;
}

Value Tape::scale(Value a, double s) {
  DenseArray out = val(a);
  for (double& v : out.data) v *= s;
  const Value o = push(std::move(out));
  nodes_[o.id].back = [this, o, a, s]() {
    const auto& og = nodes_[o.id].grad;
    auto& ga = mutable_grad(a);
    for (std::size_t i = 0; i < og.numel(); ++i) ga.data[i] += s * og.data[i];
  };
  return o;
}

Value Tape::linear(Value x, Value w, Value b) {
  const auto& vx = val(x);
  const auto& vw = val(w);
  const auto& vb = val(b);
  check_rank2(vx, "linear x");
  check_rank2(vw, "linear w");
  if (vb.rank() != 1) throw DimensionError("linear b expects rank 1");
  const std::size_t n = vx.dim(0), in = vx.dim(1);
  const std::size_t cout = vw.dim(1);
  if (vw.dim(0) != in || vb.dim(0) != cout)
    throw DimensionError("linear: nonconforming shapes x" + shape_str(vx.shape) +
                         " w" + shape_str(vw.shape) + " b" + shape_str(vb.shape));

  DenseArray out({n, cout}, std::vector<double>(n * cout));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < cout; ++j) out.data[i * cout + j] = vb.data[j];
  matmul_acc(vx.data.data(), vw.data.data(), out.data.data(), n, in, cout);

  const Value o = push(std::move(out));
  nodes_[o.id].back = [this, o, x, w, b, n, in, cout]() {
    const auto& og = nodes_[o.id].grad;
    const auto& vx2 = val(x);
    const auto& vw2 = val(w);
    auto& gx = mutable_grad(x);
    auto& gw = mutable_grad(w);
    auto& gb = mutable_grad(b);
    // dx = dy @ w^T
    for (std::size_t i = 0; i < n; ++i) {
      const double* dy = og.data.data() + i * cout;
      double* dxi = gx.data.data() + i * in;
      for (std::size_t p = 0; p < in; ++p) {
        const double* wp = vw2.data.data() + p * cout;
        double acc = 0.0;
        for (std::size_t j = 0; j < cout; ++j) acc += dy[j] * wp[j];
        dxi[p] += acc;
      }
    }
    // dw = x^T @ dy ; db = sum rows dy
    for (std::size_t i = 0; i < n; ++i) {
      const double* xi = vx2.data.data() + i * in;
      const double* dy = og.data.data() + i * cout;
      for (std::size_t p = 0; p < in; ++p) {
        const double xv = xi[p];
        if (xv == 0.0) continue;
        double* gwp = gw.data.data() + p * cout;
        for (std::size_t j = 0; j < cout; ++j) gwp[j] += xv * dy[j];
      }
      for (std::size_t j = 0; j < cout; ++j) gb.data[j] += dy[j];
    }
  };
  return o;
}

Value Tape::gelu(Value x) {
  const auto& vx = val(x);
  DenseArray out = vx;
  for (double& v : out.data) {
    const double t = std::tanh(kGeluC0 * (v + kGeluC1 * v * v * v));
    v = 0.5 * v * (1.0 + t);
  }
  const Value o = push(std::move(out));
  nodes_[o.id].back = [this, o, x]() {
    const auto& og = nodes_[o.id].grad;
    const auto& vx2 = val(x);
    auto& gx = mutable_grad(x);
    for (std::size_t i = 0; i < og.numel(); ++i) {
      const double v = vx2.data[i];
      const double u = kGeluC0 * (v + kGeluC1 * v * v * v);
      const double t = std::tanh(u);
      const double du = kGeluC0 * (1.0 + 3.0 * kGeluC1 * v * v);
      const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      gx.data[i] += d * og.data[i];
    }
  };
  return o;
}

// Shared normalization kernel: rows of length c, each normalized independently.
// x is viewed as [rows, c]; gamma/beta are indexed by (channel offset + lane).
namespace {
struct NormDims {
  std::size_t rows;
  std::size_t c;
};
} // namespace

Value Tape::layer_norm(Value x, Value gamma, Value beta) {
  const auto& vx = val(x);
  const auto& vg = val(gamma);
  const auto& vb = val(beta);
  if (vx.rank() < 1) throw DimensionError("layer_norm: rank 0 input");
  const std::size_t c = vx.shape.back();
  if (vg.numel() != c || vb.numel() != c)
    throw DimensionError("layer_norm: gamma/beta length must equal last axis");
  const std::size_t rows = vx.numel() / c;

  DenseArray out = vx;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data.data() + r * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double d = row[j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double s = 1.0 / std::sqrt(var + kNormEps);
    for (std::size_t j = 0; j < c; ++j)
      row[j] = vg.data[j] * ((row[j] - mu) * s) + vb.data[j];
  }
  const Value o = push(std::move(out));
  nodes_[o.id].back = [this, o, x, gamma, beta, rows, c]() {
    const auto& og = nodes_[o.id].grad;
    const auto& vx2 = val(x);
    const auto& vg2 = val(gamma);
    auto& gx = mutable_grad(x);
    auto& gg = mutable_grad(gamma);
    auto& gb = mutable_grad(beta);
    std::vector<double> xhat(c);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = vx2.data.data() + r * c;
      const double* dy = og.data.data() + r * c;
      double mu = 0.0;
      for (std::size_t j = 0; j < c; ++j) mu += row[j];
      mu /= static_cast<double>(c);
      double var = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        const double d = row[j] - mu;
        var += d * d;
      }
      var /= static_cast<double>(c);
      const double s = 1.0 / std::sqrt(var + kNormEps);
      double m1 = 0.0, m2 = 0.0; // mean(dy*gamma), mean(dy*gamma*xhat)
      for (std::size_t j = 0; j < c; ++j) {
        xhat[j] = (row[j] - mu) * s;
        const double dg = dy[j] * vg2.data[j];
        m1 += dg;
        m2 += dg * xhat[j];
      }
      m1 /= static_cast<double>(c);
      m2 /= static_cast<double>(c);
      for (std::size_t j = 0; j < c; ++j) {
        const double dg = dy[j] * vg2.data[j];
        gx.data[r * c + j] += s * (dg - m1 - xhat[j] * m2);
        gg.data[j] += dy[j] * xhat[j];
        gb.data[j] += dy[j];
      }
    }
  };
  return o;
}

Value Tape::group_norm(Value x, std::size_t groups, Value gamma, Value beta) {
  const auto& vx = val(x);
  const auto& vg = val(gamma);
  const auto& vb = val(beta);
  if (vx.rank() != 3) throw DimensionError("group_norm expects [H,W,C]");
  const std::size_t c = vx.dim(2);
  if (groups == 0 || c % groups != 0)
    throw ConfigError("group_norm: groups must divide channels (" +
                      std::to_string(groups) + " vs " + std::to_string(c) + ")");
  if (vg.numel() != c || vb.numel() != c)
    throw DimensionError("group_norm: gamma/beta length must equal channels");
  const std::size_t lanes = c / groups;
  const std::size_t pixels = vx.dim(0) * vx.dim(1);

  DenseArray out = vx;
  for (std::size_t p = 0; p < pixels; ++p) {
    double* px = out.data.data() + p * c;
    for (std::size_t g = 0; g < groups; ++g) {
      double* seg = px + g * lanes;
      double mu = 0.0;
      for (std::size_t j = 0; j < lanes; ++j) mu += seg[j];
      mu /= static_cast<double>(lanes);
      double var = 0.0;
      for (std::size_t j = 0; j < lanes; ++j) {
        const double d = seg[j] - mu;
        var += d * d;
      }
      var /= static_cast<double>(lanes);
      const double s = 1.0 / std::sqrt(var + kNormEps);
      for (std::size_t j = 0; j < lanes; ++j) {
        const std::size_t ch = g * lanes + j;
        seg[j] = vg.data[ch] * ((seg[j] - mu) * s) + vb.data[ch];
      }
    }
  }
  const Value o = push(std::move(out));
  nodes_[o.id].back = [this, o, x, gamma, beta, pixels, groups, lanes, c]() {
    const auto& og = nodes_[o.id].grad;
    const auto& vx2 = val(x);
    const auto& vg2 = val(gamma);
    auto& gx = mutable_grad(x);
    auto& gg = mutable_grad(gamma);
    auto& gb = mutable_grad(beta);
    std::vector<double> xhat(lanes);
    for (std::size_t p = 0; p < pixels; ++p) {
      const double* px = vx2.data.data() + p * c;
      const double* dy = og.data.data() + p * c;
      for (std::size_t g = 0; g < groups; ++g) {
        const double* seg = px + g * lanes;
        const double* dseg = dy + g * lanes;
        double mu = 0.0;
        for (std::size_t j = 0; j < lanes; ++j) mu += seg[j];
        mu /= static_cast<double>(lanes);
        double var = 0.0;
        for (std::size_t j = 0; j < lanes; ++j) {
          const double d = seg[j] - mu;
          var += d * d;
        }
        var /= static_cast<double>(lanes);
        const double s = 1.0 / std::sqrt(var + kNormEps);
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < lanes; ++j) {
          const std::size_t ch = g * lanes + j;
          xhat[j] = (seg[j] - mu) * s;
          const double dg = dseg[j] * vg2.data[ch];
          m1 += dg;
          m2 += dg * xhat[j];
        }
        m1 /= static_cast<double>(lanes);
        m2 /= static_cast<double>(lanes);
        for (std::size_t j = 0; j < lanes; ++j) {
          const std::size_t ch = g * lanes + j;
          const double dg = dseg[j] * vg2.data[ch];
          gx.data[p * c + ch] += s * (dg - m1 - xhat[j] * m2);
          gg.data[ch] += dseg[j] * xhat[j];
          gb.data[ch] += dseg[j];
        }
      }
    }
  };
  return o;
}

Value Tape::conv1x1(Value x, Value w, Value b) {
  const auto& vx = val(x);
  if (vx.rank() != 3) throw DimensionError("conv1x1 expects [H,W,Cin]");
  const std::size_t h = vx.dim(0), wd = vx.dim(1), cin = vx.dim(2);
  const Value flat = reshape(x, {h * wd, cin});
  const Value y = linear(flat, w, b);
  return reshape(y, {h, wd, val(w).dim(1)});
}

Value Tape::conv3x3(Value x, Value w, Value b) {
  const auto& vx = val(x);
  const auto& vw = val(w);
  const auto& vb = val(b);
  if (vx.rank() != 3) throw DimensionError("conv3x3 expects x [H,W,Cin]");
  if (vw.rank() != 4 || vw.dim(0) != 3 || vw.dim(1) != 3)
    throw DimensionError("conv3x3 expects w [3,3,Cin,Cout]");
  const std::size_t h = vx.dim(0), wd = vx.dim(1), cin = vx.dim(2);
  const std::size_t cout = vw.dim(3);
  if (vw.dim(2) != cin || vb.numel() != cout)
    throw DimensionError("conv3x3: nonconforming channel dims");

  DenseArray out({h, wd, cout}, std::vector<double>(h * wd * cout));
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < wd; ++j) {
      double* o = out.data.data() + (i * wd + j) * cout;
      for (std::size_t cc = 0; cc < cout; ++cc) o[cc] = vb.data[cc];
      for (int di = -1; di <= 1; ++di) {
        const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i) + di;
        if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
        for (int dj = -1; dj <= 1; ++dj) {
          const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j) + dj;
          if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(wd)) continue;
          const double* px = vx.data.data() + (ii * wd + jj) * cin;
          const double* wk = vw.data.data() + ((di + 1) * 3 + (dj + 1)) * cin * cout;
          for (std::size_t p = 0; p < cin; ++p) {
            const double xv = px[p];
            if (xv == 0.0) continue;
            const double* wp = wk + p * cout;
            for (std::size_t cc = 0; cc < cout; ++cc) o[cc] += xv * wp[cc];
          }
        }
      }
    }

  const Value o = push(std::move(out));
  nodes_[o.id].back = [this, o, x, w, b, h, wd, cin, cout]() {
    const auto& og = nodes_[o.id].grad;
    const auto& vx2 = val(x);
    const auto& vw2 = val(w);
    auto& gx = mutable_grad(x);
    auto& gw = mutable_grad(w);
    auto& gb = mutable_grad(b);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < wd; ++j) {
        const double* dy = og.data.data() + (i * wd + j) * cout;
        for (std::size_t cc = 0; cc < cout; ++cc) gb.data[cc] += dy[cc];
        for (int di = -1; di <= 1; ++di) {
          const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(i) + di;
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
          for (int dj = -1; dj <= 1; ++dj) {
            const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(j) + dj;
            if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(wd)) continue;
            const double* px = vx2.data.data() + (ii * wd + jj) * cin;
            double* dpx = gx.data.data() + (ii * wd + jj) * cin;
            const std::size_t koff = ((di + 1) * 3 + (dj + 1)) * cin * cout;
            for (std::size_t p = 0; p < cin; ++p) {
              const double* wp = vw2.data.data() + koff + p * cout;
              double* gwp = gw.data.data() + koff + p * cout;
              double acc = 0.0;
              const double xv = px[p];
              for (std::size_t cc = 0; cc < cout; ++cc) {
                acc += wp[cc] * dy[cc];
                gwp[cc] += xv * dy[cc];
              }
              dpx[p] += acc;
            }
          }
        }
      }
  };
  return o;
}

Value Tape::reshape(Value x, std::vector<std::size_t> shape) {
  const auto& vx = val(x);
  if (DenseArray::numel_of(shape) != vx.numel())
    throw DimensionError("reshape: element count mismatch");
  DenseArray out(std::move(shape), vx.data);
  const Value o = push(std::move(out));
  nodes_[o.id].back = [this, o, x]() {
    const auto& og = nodes_[o.id].grad;
    auto& gx = mutable_grad(x);
    for (std::size_t i = 0; i < og.numel(); ++i) gx.data[i] += og.data[i];
  };
  return o;
}

Value Tape::concat_channels(const std::vector<Value>& xs) {
  if (xs.empty()) throw DegenerateInputError("concat_channels: no inputs");
  const auto& first = val(xs[0]);
  if (first.rank() != 3) throw DimensionError("concat_channels expects [H,W,C] inputs");
  const std::size_t h = first.dim(0), w = first.dim(1);
  std::size_t ctot = 0;
  for (const Value v : xs) {
    const auto& a = val(v);
    if (a.rank() != 3 || a.dim(0) != h || a.dim(1) != w)
      throw DimensionError("concat_channels: mismatched grids");
    ctot += a.dim(2);
  }
  DenseArray out({h, w, ctot}, std::vector<double>(h * w * ctot));
  std::size_t off = 0;
  for (const Value v : xs) {
    const auto& a = val(v);
    const std::size_t c = a.dim(2);
    for (std::size_t p = 0; p < h * w; ++p)
      for (std::size_t j = 0; j < c; ++j)
        out.data[p * ctot + off + j] = a.data[p * c + j];
    off += c;
  }
  const Value o = push(std::move(out));
  std::vector<Value> inputs = xs;
  nodes_[o.id].back = [this, o, inputs, h, w, ctot]() {
    const auto& og = nodes_[o.id].grad;
    std::size_t off2 = 0;
    for (const Value v : inputs) {
      auto& g = mutable_grad(v);
      const std::size_t c = val(v).dim(2);
      for (std::size_t p = 0; p < h * w; ++p)
        for (std::size_t j = 0; j < c; ++j)
          g.data[p * c + j] += og.data[p * ctot + off2 + j];
      off2 += c;
    }
  };
  return o;
}

Value Tape::gather_profile(Value feats, const std::vector<std::uint32_t>& ids,
                           const std::vector<double>& weights, std::size_t k) {
  const auto& vf = val(feats);
  check_rank2(vf, "gather_profile feats");
  if (k == 0 || ids.size() % k != 0 || ids.size() != weights.size())
    throw DimensionError("gather_profile: ids/weights must be Q*k");
  const std::size_t q = ids.size() / k;
  const std::size_t d = vf.dim(1);
  DenseArray out({q, k * d}, std::vector<double>(q * k * d));
  for (std::size_t qq = 0; qq < q; ++qq)
    for (std::size_t i = 0; i < k; ++i) {
      const std::uint32_t id = ids[qq * k + i];
      const double w = weights[qq * k + i];
      const double* src = vf.data.data() + static_cast<std::size_t>(id) * d;
      double* dst = out.data.data() + qq * k * d + i * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] = w * src[j];
    }
  const Value o = push(std::move(out));
  nodes_[o.id].back = [this, o, feats, ids, weights, k, q, d]() {
    const auto& og = nodes_[o.id].grad;
    auto& gf = mutable_grad(feats);
    for (std::size_t qq = 0; qq < q; ++qq)
      for (std::size_t i = 0; i < k; ++i) {
        const std::uint32_t id = ids[qq * k + i];
        const double w = weights[qq * k + i];
        const double* dy = og.data.data() + qq * k * d + i * d;
        double* dst = gf.data.data() + static_cast<std::size_t>(id) * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += w * dy[j];
      }
  };
  return o;
}

Value Tape::gather_rows_mean(Value feats, const std::vector<std::uint32_t>& ids,
                             std::size_t k) {
  const auto& vf = val(feats);
  check_rank2(vf, "gather_rows_mean feats");
  if (k == 0 || ids.size() % k != 0)
    throw DimensionError("gather_rows_mean: ids must be Q*k");
  const std::size_t q = ids.size() / k;
  const std::size_t d = vf.dim(1);
  const double inv = 1.0 / static_cast<double>(k);
  DenseArray out({q, d}, std::vector<double>(q * d, 0.0));
  for (std::size_t qq = 0; qq < q; ++qq) {
    double* dst = out.data.data() + qq * d;
    for (std::size_t i = 0; i < k; ++i) {
      const double* src = vf.data.data() + static_cast<std::size_t>(ids[qq * k + i]) * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
    for (std::size_t j = 0; j < d; ++j) dst[j] *= inv;
  }
  const Value o = push(std::move(out));
  nodes_[o.id].back = [this, o, feats, ids, k, q, d, inv]() {
    const auto& og = nodes_[o.id].grad;
    auto& gf = mutable_grad(feats);
    for (std::size_t qq = 0; qq < q; ++qq) {
      const double* dy = og.data.data() + qq * d;
      for (std::size_t i = 0; i < k; ++i) {
        double* dst = gf.data.data() + static_cast<std::size_t>(ids[qq * k + i]) * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += inv * dy[j];
      }
    }
  };
  return o;
}

Value Tape::pool_rows(Value feats, const std::vector<std::vector<std::uint32_t>>& groups) {
  const auto& vf = val(feats);
  check_rank2(vf, "pool_rows feats");
  if (groups.empty()) throw DegenerateInputError("pool_rows: no groups");
  const std::size_t d = vf.dim(1);
  const std::size_t g = groups.size();
  DenseArray out({g, d}, std::vector<double>(g * d, 0.0));
  for (std::size_t gi = 0; gi < g; ++gi) {
    const auto& members = groups[gi];
    if (members.empty()) throw DegenerateInputError("pool_rows: empty group");
    double* dst = out.data.data() + gi * d;
    for (const std::uint32_t m : members) {
      const double* src = vf.data.data() + static_cast<std::size_t>(m) * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (std::size_t j = 0; j < d; ++j) dst[j] *= inv;
  }
  const Value o = push(std::move(out));
  nodes_[o.id].back = [this, o, feats, groups, d]() {
    const auto& og = nodes_[o.id].grad;
    auto& gf = mutable_grad(feats);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const auto& members = groups[gi];
      const double inv = 1.0 / static_cast<double>(members.size());
      const double* dy = og.data.data() + gi * d;
      for (const std::uint32_t m : members) {
        double* dst = gf.data.data() + static_cast<std::size_t>(m) * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += inv * dy[j];
      }
    }
  };
  return o;
}

Value Tape::scatter_cell_mean(Value feats, const std::vector<std::int64_t>& cell,
                              std::size_t cells) {
  const auto& vf = val(feats);
  check_rank2(vf, "scatter_cell_mean feats");
  if (cell.size() != vf.dim(0))
    throw DimensionError("scatter_cell_mean: cell per point required");
  const std::size_t d = vf.dim(1);
  std::vector<std::size_t> count(cells, 0);
  for (const std::int64_t c : cell) {
    if (c >= static_cast<std::int64_t>(cells))
      throw DimensionError("scatter_cell_mean: cell index out of range");
    if (c >= 0) ++count[static_cast<std::size_t>(c)];
  }
  DenseArray out({cells, d}, std::vector<double>(cells * d, 0.0));
  for (std::size_t p = 0; p < cell.size(); ++p) {
    if (cell[p] < 0) continue;
    double* dst = out.data.data() + static_cast<std::size_t>(cell[p]) * d;
    const double* src = vf.data.data() + p * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
  }
  for (std::size_t c = 0; c < cells; ++c) {
    if (count[c] == 0) continue;
    const double inv = 1.0 / static_cast<double>(count[c]);
    double* dst = out.data.data() + c * d;
    for (std::size_t j = 0; j < d; ++j) dst[j] *= inv;
  }
  const Value o = push(std::move(out));
  nodes_[o.id].back = [this, o, feats, cell, count, d]() {
    const auto& og = nodes_[o.id].grad;
    auto& gf = mutable_grad(feats);
    for (std::size_t p = 0; p < cell.size(); ++p) {
      if (cell[p] < 0) continue;
      const std::size_t c = static_cast<std::size_t>(cell[p]);
      const double inv = 1.0 / static_cast<double>(count[c]);
      const double* dy = og.data.data() + c * d;
      double* dst = gf.data.data() + p * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += inv * dy[j];
    }
  };
  return o;
}

Value Tape::mse_loss(Value pred, const DenseArray& target,
                     const std::vector<std::uint8_t>& mask) {
  const auto& vp = val(pred);
  if (!vp.same_shape(target))
    throw DimensionError("mse_loss: pred/target shape mismatch");
  if (mask.size() != vp.numel())
    throw DimensionError("mse_loss: mask size mismatch");
  std::size_t n = 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < vp.numel(); ++i) {
    if (!mask[i]) continue;
    const double d = vp.data[i] - target.data[i];
    acc += d * d;
    ++n;
  }
  if (n == 0) throw DegenerateInputError("mse_loss: empty mask");
  const double inv = 1.0 / static_cast<double>(n);
  const Value o = push(DenseArray::scalar(acc * inv));
  nodes_[o.id].back = [this, o, pred, target, mask, inv]() {
    const double dl = nodes_[o.id].grad.data[0];
    const auto& vp2 = val(pred);
    auto& gp = mutable_grad(pred);
    for (std::size_t i = 0; i < vp2.numel(); ++i) {
      if (!mask[i]) continue;
      gp.data[i] += dl * 2.0 * (vp2.data[i] - target.data[i]) * inv;
    }
  };
  return o;
}

Value Tape::weighted_ce_loss(Value logits, const std::vector<int>& labels,
                             const std::vector<double>& weights,
                             const std::vector<std::uint8_t>& mask) {
  const auto& vl = val(logits);
  if (vl.rank() != 3) throw DimensionError("weighted_ce_loss expects [H,W,C]");
  const std::size_t pixels = vl.dim(0) * vl.dim(1);
  const std::size_t c = vl.dim(2);
  if (labels.size() != pixels || mask.size() != pixels)
    throw DimensionError("weighted_ce_loss: labels/mask size mismatch");
  if (weights.size() != c) throw DimensionError("weighted_ce_loss: weights size mismatch");

  std::size_t n = 0;
  double acc = 0.0;
  for (std::size_t p = 0; p < pixels; ++p) {
    if (!mask[p]) continue;
    const int y = labels[p];
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw DataError("weighted_ce_loss: label out of range");
    const double* row = vl.data.data() + p * c;
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double lse = 0.0;
    for (std::size_t j = 0; j < c; ++j) lse += std::exp(row[j] - mx);
    lse = mx + std::log(lse);
    acc += weights[static_cast<std::size_t>(y)] * (lse - row[y]);
    ++n;
  }
  if (n == 0) throw DegenerateInputError("weighted_ce_loss: empty mask");
  const double inv = 1.0 / static_cast<double>(n);
  const Value o = push(DenseArray::scalar(acc * inv));
  nodes_[o.id].back = [this, o, logits, labels, weights, mask, pixels, c, inv]() {
    const double dl = nodes_[o.id].grad.data[0];
    const auto& vl2 = val(logits);
    auto& gl = mutable_grad(logits);
    for (std::size_t p = 0; p < pixels; ++p) {
      if (!mask[p]) continue;
      const int y = labels[p];
      const double wy = weights[static_cast<std::size_t>(y)];
      const double* row = vl2.data.data() + p * c;
      double mx = row[0];
      for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
      double z = 0.0;
      for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
      double* g = gl.data.data() + p * c;
      for (std::size_t j = 0; j < c; ++j) {
        const double soft = std::exp(row[j] - mx) / z;
        const double ind = (static_cast<int>(j) == y) ? 1.0 : 0.0;
        g[j] += dl * wy * (soft - ind) * inv;
      }
    }
  };
  return o;
}

void Tape::backward(Value loss) {
  if (!loss.valid() || loss.id >= nodes_.size())
    throw DimensionError("backward: invalid loss handle");
  if (nodes_[loss.id].value.numel() != 1)
    throw DimensionError("backward: loss must be scalar");
  nodes_[loss.id].grad.data[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (nodes_[i].back) nodes_[i].back();
  }
}

} // namespace strata
