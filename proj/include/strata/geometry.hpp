#pragma once

#include <cstdint>
#include <vector>

namespace strata {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Uniform bucket grid over [-1,1]^2 for exact XY k-nearest-neighbor
/// queries. Points outside the square land in the edge buckets, so results
/// stay exact for any coordinates. Immutable after construction; queries
/// are read-only and thread-safe.
class XYIndex {
public:
  XYIndex(const std::vector<double>& xs, const std::vector<double>& ys,
          double bucket_size = 0.1);

  std::size_t size() const { return xs_.size(); }
  double x(std::size_t i) const { return xs_[i]; }
  double y(std::size_t i) const { return ys_[i]; }

  /// The m points with smallest XY distance to q; ties broken by lower id.
  /// Returns all points when fewer than m exist. Identical to a brute-force
  /// scan by construction.
  std::vector<std::uint32_t> knn(Point2 q, std::size_t m) const;

private:
  std::size_t bucket_of(double x, double y) const;

  std::vector<double> xs_, ys_;
  double bucket_size_;
  std::size_t nx_;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

/// Farthest point sampling over z values. Seed = minimum-z candidate; each
/// pick maximizes the minimum |z - z_selected|; all ties break to the lower
/// point id. When fewer than k candidates exist, the z-sorted candidate
/// sequence is repeated cyclically to length k.
std::vector<std::uint32_t> fps_z(const std::vector<std::uint32_t>& ids,
                                 const std::vector<double>& zs, std::size_t k);

/// w = exp(-lambda * max(0, d - tau)); 1 on [0,tau], strictly decreasing after.
double xy_weight(double d, double tau, double lambda);

enum class SamplingMode { stratified, closest_k };

struct Neighborhood {
  std::vector<std::uint32_t> candidates;      // m_multiplier * k XY-nearest ids
  std::vector<std::uint32_t> selected;        // k ids, ascending z (ties by id)
  std::vector<double> weights;                // per selected point, in (0,1]
};

/// Candidate retrieval + vertical selection + Eq.-style falloff weights for
/// one query. zs must be indexed by point id (same order as the index).
Neighborhood build_neighborhood(const XYIndex& index, const std::vector<double>& zs,
                                Point2 q, std::size_t k, std::size_t m_multiplier,
                                double tau, double lambda, SamplingMode mode);

} // namespace strata
