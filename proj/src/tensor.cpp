#include "cot3d/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace cot3d {
namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto s : shape) {
    if (s == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
    n *= s;
  }
  return n;
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(what) + " expects a matrix, got shape " +
                         shape_string(t.shape()));
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != data_.size()) {
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
  if (!all_finite()) throw DataError("tensor data contains non-finite entries");
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw DimensionError("from_rows needs at least one row");
  std::vector<double> data;
  const std::size_t cols = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionError("ragged rows in from_rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul inner dimensions differ: " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out = Tensor::matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.data().data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const double* brow = b.data().data() + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * brow[j];
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn row counts differ: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
  Tensor out = Tensor::matrix(n, m);
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a.data().data() + p * n;
    const double* brow = b.data().data() + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* o = out.data().data() + i * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * brow[j];
    }
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt column counts differ: " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
  const std::size_t n = a.rows(), m = b.rows();
  Tensor out = Tensor::matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out(i, j) = dot(a.row(i), b.row(j));
  }
  return out;
}

void add_inplace(Tensor& dst, const Tensor& src) {
  if (dst.size() != src.size()) {
    throw DimensionError("add_inplace size mismatch: " + shape_string(dst.shape()) + " vs " +
                         shape_string(src.shape()));
  }
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

Tensor concat_cols(std::span<const Tensor* const> parts) {
  if (parts.empty()) throw DimensionError("concat_cols needs at least one part");
  const std::size_t n = parts.front()->rows();
  std::size_t total = 0;
  for (const Tensor* p : parts) {
    require_matrix(*p, "concat_cols");
    if (p->rows() != n) throw DimensionError("concat_cols row counts differ");
    total += p->cols();
  }
  Tensor out = Tensor::matrix(n, total);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t off = 0;
    for (const Tensor* p : parts) {
      auto r = p->row(i);
      std::copy(r.begin(), r.end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(off));
      off += p->cols();
    }
  }
  return out;
}

Tensor mean_rows(const Tensor& x) {
  require_matrix(x, "mean_rows");
  Tensor out = Tensor::matrix(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) out[j] += r[j];
  }
  const double inv = 1.0 / static_cast<double>(x.rows());
  for (auto& v : out.data()) v *= inv;
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void zero_grads(const ParamList& params) {
  for (ParamBlock* p : params) p->zero_grad();
}

void set_trainable(const ParamList& params, bool trainable) {
  for (ParamBlock* p : params) p->trainable = trainable;
}

}  // namespace cot3d
