#include "bodylift/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "bodylift/error.hpp"

namespace bodylift {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + to_string(shape_));
  }
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::scalar(double value) { return Tensor({}, std::vector<double>{value}); }

std::size_t Tensor::rows() const noexcept { return shape_.size() >= 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const noexcept {
  if (shape_.empty()) return 1;
  return shape_.back();
}

void Tensor::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
  return data_[0];
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

namespace {

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + ": expected matrix, got " + to_string(t.shape()));
}

void prepare_out(Tensor& out, std::size_t r, std::size_t c, bool accumulate) {
  if (accumulate) {
    if (out.shape() != Shape{r, c}) {
      throw ShapeError("gemm accumulate target has shape " + to_string(out.shape()));
    }
  } else if (out.shape() != Shape{r, c}) {
    out = Tensor({r, c});
  } else {
    out.fill(0.0);
  }
}

}  // namespace

void gemm_nn(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
  require_matrix(a, "gemm");
  require_matrix(b, "gemm");
  const auto m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("gemm: inner dimensions differ " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  prepare_out(out, m, n, accumulate);
  if (m == 0 || n == 0 || k == 0) return;
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, int(m), int(n), int(k), 1.0, a.raw(),
              int(k), b.raw(), int(n), accumulate ? 1.0 : 0.0, out.raw(), int(n));
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
  require_matrix(a, "gemm_tn");
  require_matrix(b, "gemm_tn");
  const auto k = a.rows(), m = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("gemm_tn: leading dimensions differ " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  prepare_out(out, m, n, accumulate);
  if (m == 0 || n == 0 || k == 0) return;
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, int(m), int(n), int(k), 1.0, a.raw(),
              int(m), b.raw(), int(n), accumulate ? 1.0 : 0.0, out.raw(), int(n));
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
  require_matrix(a, "gemm_nt");
  require_matrix(b, "gemm_nt");
  const auto m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw ShapeError("gemm_nt: trailing dimensions differ " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  prepare_out(out, m, n, accumulate);
  if (m == 0 || n == 0 || k == 0) return;
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, int(m), int(n), int(k), 1.0, a.raw(),
              int(k), b.raw(), int(k), accumulate ? 1.0 : 0.0, out.raw(), int(n));
}

}  // namespace bodylift
