#include "t2v/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <sstream>

#include "t2v/error.hpp"

namespace t2v {

namespace {
int64_t shape_size(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw ShapeError("negative tensor dimension");
    n *= d;
  }
  return n;
}

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;
}  // namespace

Tensor::Tensor(std::vector<int64_t> shape)
    : data_(static_cast<size_t>(shape_size(shape)), 0.0), shape_(std::move(shape)) {}

Tensor Tensor::full(std::vector<int64_t> shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::from(std::vector<double> data, std::vector<int64_t> shape) {
  if (static_cast<int64_t>(data.size()) != shape_size(shape))
    throw ShapeError("data size does not match shape");
  Tensor t;
  t.data_ = std::move(data);
  t.shape_ = std::move(shape);
  return t;
}

Tensor Tensor::row(const std::vector<double>& data) {
  return from(data, {1, static_cast<int64_t>(data.size())});
}

Tensor Tensor::scalar(double v) { return from({v}, {1}); }

int64_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows(): tensor is not rank-2, shape " + shape_str());
  return shape_[0];
}

int64_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols(): tensor is not rank-2, shape " + shape_str());
  return shape_[1];
}

Tensor Tensor::reshaped(std::vector<int64_t> shape) const {
  if (shape_size(shape) != size())
    throw ShapeError("reshape " + shape_str() + " to incompatible size");
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::add_(const Tensor& o) {
  if (!same_shape(o)) throw ShapeError("add_: shape mismatch " + shape_str() + " vs " + o.shape_str());
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
}

void Tensor::scale_(double a) {
  for (double& v : data_) v *= a;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << "]";
  return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
    throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " * " + b.shape_str());
  Tensor c({a.rows(), b.cols()});
  EMap(c.data(), a.rows(), b.cols()).noalias() =
      ECMap(a.data(), a.rows(), a.cols()) * ECMap(b.data(), b.rows(), b.cols());
  return c;
}

Tensor transposed(const Tensor& a) {
  Tensor t({a.cols(), a.rows()});
  EMap(t.data(), a.cols(), a.rows()).noalias() =
      ECMap(a.data(), a.rows(), a.cols()).transpose();
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace t2v
