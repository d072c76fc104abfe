#include "cot3d/layers.hpp"

#include <cmath>
#include <numbers>

namespace cot3d {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over seed ^ golden-ratio-scaled stream
  std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight(name + ".weight", uniform_init({in, out}, in, rng)),
      bias(name + ".bias", uniform_init({out}, in, rng)) {}

Tensor Linear::forward(const Tensor& x) const { return linear(x, weight, bias); }

Tensor Linear::backward(const Tensor& x, const Tensor& dy) {
  return linear_backward(x, dy, weight, bias);
}

Tensor linear(const Tensor& x, const ParamBlock& w, const ParamBlock& b) {
  if (x.rank() != 2 || w.value.rank() != 2 || x.cols() != w.value.rows() ||
      b.value.size() != w.value.cols()) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " incompatible with weight " +
                         shape_string(w.value.shape()) + " / bias " +
                         shape_string(b.value.shape()));
  }
  Tensor y = matmul(x, w.value);
  const std::size_t out = y.cols();
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    for (std::size_t j = 0; j < out; ++j) r[j] += b.value[j];
  }
  return y;
}

Tensor linear_backward(const Tensor& x, const Tensor& dy, ParamBlock& w, ParamBlock& b) {
  if (dy.rows() != x.rows() || dy.cols() != w.value.cols()) {
    throw DimensionError("linear_backward: dy " + shape_string(dy.shape()) +
                         " incompatible with input " + shape_string(x.shape()));
  }
  add_inplace(w.grad, matmul_tn(x, dy));
  for (std::size_t i = 0; i < dy.rows(); ++i) {
    auto r = dy.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) b.grad[j] += r[j];
  }
  return matmul_nt(dy, w.value);
}

namespace {
constexpr double kGeluC = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);
}  // namespace

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kSqrt2OverPi * (x + kGeluC * x * x * x)));
}

double gelu_grad(double x) {
  const double u = kSqrt2OverPi * (x + kGeluC * x * x * x);
  const double t = std::tanh(u);
  const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluC * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

Tensor gelu(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data()) v = gelu(v);
  return y;
}

Tensor gelu_backward(const Tensor& x, const Tensor& dy) {
  Tensor dx = dy;
  auto xs = x.data();
  auto d = dx.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= gelu_grad(xs[i]);
  return dx;
}

std::vector<double> row_norms(const Tensor& v) {
  std::vector<double> norms(v.rows());
  for (std::size_t i = 0; i < v.rows(); ++i) norms[i] = l2_norm(v.row(i));
  return norms;
}

Tensor l2_normalize(const Tensor& v) {
  if (v.rank() != 2) throw DimensionError("l2_normalize expects B×d, got " + shape_string(v.shape()));
  Tensor y = v;
  for (std::size_t i = 0; i < v.rows(); ++i) {
    const double n = l2_norm(v.row(i));
    if (!(n > kNormEpsilon)) {
      throw DegenerateError("l2_normalize: row " + std::to_string(i) + " has norm " +
                            std::to_string(n));
    }
    for (auto& x : y.row(i)) x /= n;
  }
  return y;
}

Tensor l2_normalize_backward(const Tensor& y, std::span<const double> norms, const Tensor& dy) {
  Tensor dx = dy;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    const double proj = dot(y.row(i), dy.row(i));
    auto yr = y.row(i);
    auto r = dx.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = (r[j] - yr[j] * proj) / norms[i];
  }
  return dx;
}

Mlp::Mlp(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out, Rng& rng)
    : fc1(name + ".fc1", in, hidden, rng), fc2(name + ".fc2", hidden, out, rng) {}

Tensor Mlp::forward(const Tensor& x, Cache* cache) const {
  Tensor pre = fc1.forward(x);
  Tensor act = gelu(pre);
  Tensor y = fc2.forward(act);
  if (cache) {
    cache->x = x;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
  }
  return y;
}

Tensor Mlp::backward(const Cache& cache, const Tensor& dy) {
  Tensor dact = fc2.backward(cache.act, dy);
  Tensor dpre = gelu_backward(cache.pre, dact);
  return fc1.backward(cache.x, dpre);
}

}  // namespace cot3d
