#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cot3d/errors.hpp"

namespace cot3d {

// Dense row-major tensor of doubles. Most of the library only uses rank 1
// and rank 2; the accessors below assume rank 2 where they take (row, col).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  // Throws DimensionError if data.size() does not match the shape and
  // DataError if any entry is not finite.
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor vector(std::size_t n, double fill = 0.0) {
    return Tensor({n}, fill);
  }
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }

  void fill(double v);
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

// a (n×k) · b (k×m)
Tensor matmul(const Tensor& a, const Tensor& b);
// aᵀ (k×n)ᵀ · b (k×m) -> n×m
Tensor matmul_tn(const Tensor& a, const Tensor& b);
// a (n×k) · bᵀ (m×k)ᵀ -> n×m
Tensor matmul_nt(const Tensor& a, const Tensor& b);

void add_inplace(Tensor& dst, const Tensor& src);
Tensor concat_cols(std::span<const Tensor* const> parts);
Tensor mean_rows(const Tensor& x);  // n×c -> 1×c
double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// A named learnable tensor with its gradient accumulator.
struct ParamBlock {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  ParamBlock() = default;
  ParamBlock(std::string n, Tensor v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), trainable(train) {}

  void zero_grad() { grad.fill(0.0); }
};

using ParamList = std::vector<ParamBlock*>;

void zero_grads(const ParamList& params);
void set_trainable(const ParamList& params, bool trainable);

}  // namespace cot3d
