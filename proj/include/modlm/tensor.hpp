// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MODLM_TENSOR_HPP
#define MODLM_TENSOR_HPP

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "modlm/error.hpp"
#include "modlm/rng.hpp"

namespace modlm {

// Dense row-major double tensor. All model math runs in 64-bit so that
// analytic gradients can be checked against finite differences.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), 0.0);
  }

  static std::int64_t numel_of(const std::vector<std::int64_t>& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  std::int64_t dim(std::size_t i) const { return shape.at(i); }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  double& at2(std::int64_t i, std::int64_t j) {
    return data[static_cast<std::size_t>(i * shape[1] + j)];
  }
  double at2(std::int64_t i, std::int64_t j) const {
    return data[static_cast<std::size_t>(i * shape[1] + j)];
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  void fill_normal(Rng& rng, double stddev) {
    for (auto& v : data) v = rng.normal() * stddev;
  }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool bitwise_equal(const Tensor& other) const {
    if (shape != other.shape) return false;
    for (std::size_t i = 0; i < data.size(); ++i) {
      // bitwise, not value, equality: distinguishes -0.0 and NaN payloads
      std::uint64_t a, b;
      static_assert(sizeof(double) == sizeof(std::uint64_t));
      std::memcpy(&a, &data[i], 8);
      std::memcpy(&b, &other.data[i], 8);
      if (a != b) return false;
    }
    return true;
  }
};

}  // namespace modlm

#endif  // MODLM_TENSOR_HPP
