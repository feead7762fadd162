#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

namespace tiad::inpainter {

/// Dense row-major double tensor. Activations are {C, H, W}; conv kernels
/// {out, in, k, k}; biases {out}; scalars {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> dims, double fill = 0.0) : dims_(std::move(dims)), data_(count(dims_), fill) {}
  Tensor(std::initializer_list<int> dims, double fill = 0.0) : Tensor(std::vector<int>(dims), fill) {}

  static Tensor scalar(double v) { return Tensor({1}, v); }

  const std::vector<int>& dims() const noexcept { return dims_; }
  int dim(std::size_t i) const { return dims_.at(i); }
  int rank() const noexcept { return static_cast<int>(dims_.size()); }
  std::size_t numel() const noexcept { return data_.size(); }

  // {C, H, W} accessors.
  int channels() const { return dims_.at(0); }
  int height() const { return dims_.at(1); }
  int width() const { return dims_.at(2); }
  double& at(int c, int y, int x) { return data_[(static_cast<std::size_t>(c) * dims_[1] + y) * dims_[2] + x]; }
  double at(int c, int y, int x) const { return data_[(static_cast<std::size_t>(c) * dims_[1] + y) * dims_[2] + x]; }
  double* channel(int c) { return data_.data() + static_cast<std::size_t>(c) * dims_[1] * dims_[2]; }
  const double* channel(int c) const { return data_.data() + static_cast<std::size_t>(c) * dims_[1] * dims_[2]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double item() const { return data_.at(0); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool same_shape(const Tensor& o) const noexcept { return dims_ == o.dims_; }
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  static std::size_t count(const std::vector<int>& d) {
    return std::accumulate(d.begin(), d.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }

  std::vector<int> dims_;
  std::vector<double> data_;
};

}  // namespace tiad::inpainter
