#include "strata/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "strata/error.hpp"

namespace strata {

namespace {

double sq(double v) { return v * v; }

struct Cand {
  double d2;
  std::uint32_t id;
  bool operator<(const Cand& o) const {
    return d2 < o.d2 || (d2 == o.d2 && id < o.id);
  }
};

} // namespace

XYIndex::XYIndex(const std::vector<double>& xs, const std::vector<double>& ys,
                 double bucket_size)
    : xs_(xs), ys_(ys), bucket_size_(bucket_size) {
  if (xs_.empty() || xs_.size() != ys_.size())
    throw DegenerateInputError("XYIndex: empty or mismatched point set");
  if (!(bucket_size_ > 0.0)) throw ConfigError("XYIndex: bucket size must be positive");
  nx_ = static_cast<std::size_t>(std::ceil(2.0 / bucket_size_));
  if (nx_ == 0) nx_ = 1;
  buckets_.assign(nx_ * nx_, {});
  for (std::size_t i = 0; i < xs_.size(); ++i)
    buckets_[bucket_of(xs_[i], ys_[i])].push_back(static_cast<std::uint32_t>(i));
}

std::size_t XYIndex::bucket_of(double x, double y) const {
  const auto clampi = [this](double v) {
    const double t = (v + 1.0) / bucket_size_;
    std::ptrdiff_t b = static_cast<std::ptrdiff_t>(std::floor(t));
    if (b < 0) b = 0;
    if (b >= static_cast<std::ptrdiff_t>(nx_)) b = static_cast<std::ptrdiff_t>(nx_) - 1;
    return static_cast<std::size_t>(b);
  };
  return clampi(y) * nx_ + clampi(x);
}

std::vector<std::uint32_t> XYIndex::knn(Point2 q, std::size_t m) const {
  if (m == 0) throw DegenerateInputError("knn: m must be >= 1");
  m = std::min(m, xs_.size());

  // Ring search outward from the query bucket. A ring at index r only
  // contains points at distance >= (r-1)*bucket_size from q, so once the
  // heap is full and the worst kept distance is below that bound we stop.
  const auto coord = [this](double v) {
    const double t = (v + 1.0) / bucket_size_;
    std::ptrdiff_t b = static_cast<std::ptrdiff_t>(std::floor(t));
    if (b < 0) b = 0;
    if (b >= static_cast<std::ptrdiff_t>(nx_)) b = static_cast<std::ptrdiff_t>(nx_) - 1;
    return b;
  };
  const std::ptrdiff_t cx = coord(q.x);
  const std::ptrdiff_t cy = coord(q.y);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(nx_);

  std::vector<Cand> heap; // max-heap on (d2, id)
  heap.reserve(m + 1);
  const auto push_point = [&](std::uint32_t id) {
    const Cand c{sq(xs_[id] - q.x) + sq(ys_[id] - q.y), id};
    if (heap.size() < m) {
      heap.push_back(c);
      std::push_heap(heap.begin(), heap.end());
    } else if (c < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = c;
      std::push_heap(heap.begin(), heap.end());
    }
  };

  const std::ptrdiff_t max_ring = 2 * n;
  for (std::ptrdiff_t r = 0; r <= max_ring; ++r) {
    if (heap.size() == m && r > 0) {
      const double bound = sq(static_cast<double>(r - 1) * bucket_size_);
      if (heap.front().d2 < bound) break;
    }
    bool visited_any = false;
    for (std::ptrdiff_t by = cy - r; by <= cy + r; ++by) {
      if (by < 0 || by >= n) continue;
      for (std::ptrdiff_t bx = cx - r; bx <= cx + r; ++bx) {
        if (bx < 0 || bx >= n) continue;
        if (std::max(std::abs(bx - cx), std::abs(by - cy)) != r) continue;
        visited_any = true;
        for (const std::uint32_t id : buckets_[static_cast<std::size_t>(by) * nx_ + bx])
          push_point(id);
      }
    }
    if (!visited_any && r > n) break;
  }

  std::vector<Cand> out(heap);
  std::sort(out.begin(), out.end());
  std::vector<std::uint32_t> ids;
  ids.reserve(out.size());
  for (const Cand& c : out) ids.push_back(c.id);
  return ids;
}

std::vector<std::uint32_t> fps_z(const std::vector<std::uint32_t>& ids,
                                 const std::vector<double>& zs, std::size_t k) {
  if (ids.empty()) throw DegenerateInputError("fps_z: empty candidate set");
  if (k == 0) throw DegenerateInputError("fps_z: k must be >= 1");
  const std::size_t n = ids.size();

  if (n < k) {
    // Padding rule: z-sorted candidates repeated cyclically to length k.
    std::vector<std::uint32_t> sorted = ids;
    std::sort(sorted.begin(), sorted.end(), [&](std::uint32_t a, std::uint32_t b) {
      return zs[a] < zs[b] || (zs[a] == zs[b] && a < b);
    });
    std::vector<std::uint32_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(sorted[i % n]);
    return out;
  }

  std::vector<std::uint32_t> selected;
  selected.reserve(k);
  std::size_t seed = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (zs[ids[i]] < zs[ids[seed]] ||
        (zs[ids[i]] == zs[ids[seed]] && ids[i] < ids[seed]))
      seed = i;
  }
  std::vector<double> mind(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  selected.push_back(ids[seed]);
  taken[seed] = 1;
  for (std::size_t i = 0; i < n; ++i)
    mind[i] = std::abs(zs[ids[i]] - zs[ids[seed]]);

  while (selected.size() < k) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (best == n || mind[i] > mind[best] ||
          (mind[i] == mind[best] && ids[i] < ids[best]))
        best = i;
    }
    selected.push_back(ids[best]);
    taken[best] = 1;
    for (std::size_t i = 0; i < n; ++i)
      mind[i] = std::min(mind[i], std::abs(zs[ids[i]] - zs[ids[best]]));
  }
  return selected;
}

double xy_weight(double d, double tau, double lambda) {
  return std::exp(-lambda * std::max(0.0, d - tau));
}

Neighborhood build_neighborhood(const XYIndex& index, const std::vector<double>& zs,
                                Point2 q, std::size_t k, std::size_t m_multiplier,
                                double tau, double lambda, SamplingMode mode) {
  if (k == 0) throw DegenerateInputError("build_neighborhood: k must be >= 1");
  if (m_multiplier == 0)
    throw DegenerateInputError("build_neighborhood: m_multiplier must be >= 1");

  Neighborhood nb;
  nb.candidates = index.knn(q, m_multiplier * k);

  if (mode == SamplingMode::closest_k) {
    // knn returns (distance, id)-sorted ids, so the k nearest are a prefix.
    const std::size_t take = std::min(k, nb.candidates.size());
    std::vector<std::uint32_t> sel(nb.candidates.begin(), nb.candidates.begin() + take);
    if (take < k) {
      std::sort(sel.begin(), sel.end(), [&](std::uint32_t a, std::uint32_t b) {
        return zs[a] < zs[b] || (zs[a] == zs[b] && a < b);
      });
      std::vector<std::uint32_t> padded;
      padded.reserve(k);
      for (std::size_t i = 0; i < k; ++i) padded.push_back(sel[i % take]);
      sel = std::move(padded);
    }
    nb.selected = std::move(sel);
  } else {
    nb.selected = fps_z(nb.candidates, zs, k);
  }

  std::stable_sort(nb.selected.begin(), nb.selected.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return zs[a] < zs[b] || (zs[a] == zs[b] && a < b);
                   });
  nb.weights.reserve(nb.selected.size());
  for (const std::uint32_t id : nb.selected) {
    const double d = std::sqrt(sq(index.x(id) - q.x) + sq(index.y(id) - q.y));
    nb.weights.push_back(xy_weight(d, tau, lambda));
  }
  return nb;
}

} // namespace strata
