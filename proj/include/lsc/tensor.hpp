#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lsc/common.hpp"

namespace lsc::numcore {

// Dense row-major tensor of doubles. Rank 1 and 2 cover everything we need.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;

  static Tensor zeros(std::vector<int64_t> shape);
  static Tensor full(std::vector<int64_t> shape, double value);
  static Tensor row(std::vector<double> values);            // [n]
  static Tensor matrix(int64_t rows, int64_t cols, std::vector<double> values);

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
  }
  int64_t rank() const { return static_cast<int64_t>(shape.size()); }
  int64_t rows() const { return rank() == 2 ? shape[0] : (rank() == 1 ? 1 : 0); }
  int64_t cols() const { return rank() == 2 ? shape[1] : (rank() == 1 ? shape[0] : 0); }

  double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
  double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
  void fill(double v) {
    for (double& x : data) x = v;
  }
};

inline Tensor Tensor::zeros(std::vector<int64_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(static_cast<size_t>(t.numel()), 0.0);
  return t;
}

inline Tensor Tensor::full(std::vector<int64_t> shape, double value) {
  Tensor t = zeros(std::move(shape));
  t.fill(value);
  return t;
}

inline Tensor Tensor::row(std::vector<double> values) {
  Tensor t;
  t.shape = {static_cast<int64_t>(values.size())};
  t.data = std::move(values);
  return t;
}

inline Tensor Tensor::matrix(int64_t rows, int64_t cols, std::vector<double> values) {
  Tensor t;
  t.shape = {rows, cols};
  t.data = std::move(values);
  if (t.numel() != static_cast<int64_t>(t.data.size()))
    throw NumericError("tensor: matrix data size does not match shape");
  return t;
}

}  // namespace lsc::numcore
