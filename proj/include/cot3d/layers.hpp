#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "cot3d/tensor.hpp"

namespace cot3d {

using Rng = std::mt19937_64;

// Mixes a base seed with a stream index so that independent streams
// (records, layers, epochs) do not share state.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng);

// y = x W + b. W is in×out, b is out.
struct Linear {
  ParamBlock weight;
  ParamBlock bias;

  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_dim() const { return weight.value.rows(); }
  std::size_t out_dim() const { return weight.value.cols(); }

  Tensor forward(const Tensor& x) const;
  // Accumulates into weight.grad and bias.grad; returns dL/dx.
  Tensor backward(const Tensor& x, const Tensor& dy);
  ParamList params() { return {&weight, &bias}; }
};

// Stateless forms used by tests and by Linear itself.
Tensor linear(const Tensor& x, const ParamBlock& w, const ParamBlock& b);
Tensor linear_backward(const Tensor& x, const Tensor& dy, ParamBlock& w, ParamBlock& b);

// Tanh-approximation GELU.
double gelu(double x);
double gelu_grad(double x);
Tensor gelu(const Tensor& x);
Tensor gelu_backward(const Tensor& x, const Tensor& dy);

// Row-wise unit normalization. Rows with norm <= 1e-12 raise DegenerateError.
inline constexpr double kNormEpsilon = 1e-12;
Tensor l2_normalize(const Tensor& v);
// y is the forward output, norms the pre-normalization row norms.
Tensor l2_normalize_backward(const Tensor& y, std::span<const double> norms, const Tensor& dy);
std::vector<double> row_norms(const Tensor& v);

// Linear -> GELU -> Linear.
struct Mlp {
  Linear fc1;
  Linear fc2;

  struct Cache {
    Tensor x;
    Tensor pre;  // fc1 output, before GELU
    Tensor act;
  };

  Mlp() = default;
  Mlp(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);

  Tensor forward(const Tensor& x, Cache* cache = nullptr) const;
  Tensor backward(const Cache& cache, const Tensor& dy);
  ParamList params() { return {&fc1.weight, &fc1.bias, &fc2.weight, &fc2.bias}; }
};

}  // namespace cot3d
