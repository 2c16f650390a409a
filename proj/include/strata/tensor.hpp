#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "strata/error.hpp"

namespace strata {

/// Dense row-major array of 64-bit floats. Shapes are immutable after
/// construction; every dimension is >= 1 and product(shape) == data.size().
struct DenseArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  DenseArray() = default;
  DenseArray(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (numel_of(shape) != data.size())
      throw DimensionError("DenseArray: shape does not match data length");
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (const std::size_t d : s) {
      if (d == 0) throw DimensionError("DenseArray: zero dimension");
      n *= d;
    }
    return n;
  }

  static DenseArray zeros(std::vector<std::size_t> s) {
    const std::size_t n = numel_of(s);
    return DenseArray(std::move(s), std::vector<double>(n, 0.0));
  }

  static DenseArray full(std::vector<std::size_t> s, double v) {
    const std::size_t n = numel_of(s);
    return DenseArray(std::move(s), std::vector<double>(n, v));
  }

  static DenseArray scalar(double v) { return DenseArray({1}, {v}); }

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  double& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
  double& at3(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  double at3(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }

  bool same_shape(const DenseArray& o) const { return shape == o.shape; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

} // namespace strata
