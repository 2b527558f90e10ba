#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace t2v {

// Dense row-major tensor of doubles. Rank is small (<= 4 in practice);
// most of the model works on rank-2 [tokens x width] views.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::initializer_list<int64_t> shape)
      : Tensor(std::vector<int64_t>(shape)) {}

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, double v);
  static Tensor from(std::vector<double> data, std::vector<int64_t> shape);
  static Tensor row(const std::vector<double>& data);  // [1 x n]
  static Tensor scalar(double v);                      // [1]

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Rank-2 accessors.
  int64_t rows() const;
  int64_t cols() const;
  double& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * cols() + c)]; }
  double at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * cols() + c)]; }

  Tensor reshaped(std::vector<int64_t> shape) const;
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;

  void fill(double v);
  void add_(const Tensor& o);    // elementwise +=
  void scale_(double a);

  std::string shape_str() const;

 private:
  std::vector<double> data_;
  std::vector<int64_t> shape_;
};

// C = A * B for rank-2 tensors, Eigen-backed.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transposed(const Tensor& a);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace t2v
