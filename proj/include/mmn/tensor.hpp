#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "mmn/errors.hpp"

namespace mmn {

// Dense row-major tensor of 64-bit reals. Everything in the project is rank
// 0..2 in practice; rank up to 4 is representable. product(shape) always
// equals data().size().
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::initializer_list<double> xs) : data_(xs) {
    dims_[0] = data_.size();
    rank_ = 1;
  }

  static Tensor scalar(double v) {
    Tensor t;
    t.rank_ = 1;
    t.dims_[0] = 1;
    t.data_.assign(1, v);
    return t;
  }

  static Tensor vector(std::size_t n, double fill = 0.0) {
    Tensor t;
    t.rank_ = 1;
    t.dims_[0] = n;
    t.data_.assign(n, fill);
    return t;
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    Tensor t;
    t.rank_ = 2;
    t.dims_[0] = rows;
    t.dims_[1] = cols;
    t.data_.assign(rows * cols, fill);
    return t;
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Tensor t;
    t.rank_ = 2;
    t.dims_[0] = rows.size();
    t.dims_[1] = rows.begin()->size();
    t.data_.reserve(t.dims_[0] * t.dims_[1]);
    for (const auto& r : rows) {
      if (r.size() != t.dims_[1])
        throw DimensionError("from_rows: ragged row lengths");
      t.data_.insert(t.data_.end(), r.begin(), r.end());
    }
    return t;
  }

  std::size_t rank() const { return rank_; }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return dims_[i]; }
  std::size_t rows() const { return dims_[0]; }
  std::size_t cols() const { return rank_ >= 2 ? dims_[1] : 1; }
  std::span<const std::size_t> shape() const { return {dims_.data(), rank_}; }

  bool same_shape(const Tensor& o) const {
    if (rank_ != o.rank_) return false;
    for (std::size_t i = 0; i < rank_; ++i)
      if (dims_[i] != o.dims_[i]) return false;
    return true;
  }

  double& operator()(std::size_t i) { return data_[i]; }
  double operator()(std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * dims_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * dims_[1] + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (double x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  bool operator==(const Tensor& o) const {
    return same_shape(o) && data_ == o.data_;
  }

  std::string shape_str() const {
    if (rank_ == 0) return "[]";
    std::string s = std::to_string(dims_[0]);
    for (std::size_t i = 1; i < rank_; ++i) s += "x" + std::to_string(dims_[i]);
    return s;
  }

 private:
  std::array<std::size_t, 4> dims_{};
  std::size_t rank_ = 0;
  std::vector<double> data_;
};

}  // namespace mmn
