#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ucdl/errors.hpp"

namespace ucdl {

using Complex = std::complex<double>;
using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);
void check_same_shape(const Shape& a, const Shape& b, const char* where);

struct SpatialDomain {};
struct FrequencyDomain {};

/// Dense complex array in row-major order (last axis fastest).
///
/// The storage is a contiguous array of std::complex<double>, which the
/// standard guarantees to be layout compatible with interleaved (re, im)
/// doubles, so channels() exposes the two-channel real view of the same
/// memory without copying.
template <class Domain>
class BasicTensor {
 public:
  BasicTensor() = default;

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)), data_(checked_size(shape_)) {}

  BasicTensor(Shape shape, std::vector<Complex> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != checked_size(shape_)) {
      throw Error(ErrorCode::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                                " does not match shape " + shape_string(shape_));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t ndim() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<Complex> data() noexcept { return data_; }
  std::span<const Complex> data() const noexcept { return data_; }
  const std::vector<Complex>& vector() const noexcept { return data_; }

  std::span<double> channels() noexcept { return {reinterpret_cast<double*>(data_.data()), 2 * data_.size()}; }
  std::span<const double> channels() const noexcept {
    return {reinterpret_cast<const double*>(data_.data()), 2 * data_.size()};
  }

  Complex& operator[](std::size_t i) noexcept { return data_[i]; }
  const Complex& operator[](std::size_t i) const noexcept { return data_[i]; }

  BasicTensor& operator+=(const BasicTensor& other) {
    check_same_shape(shape_, other.shape_, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }
  BasicTensor& operator-=(const BasicTensor& other) {
    check_same_shape(shape_, other.shape_, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
  }
  BasicTensor& operator*=(Complex a) noexcept {
    for (auto& v : data_) v *= a;
    return *this;
  }
  BasicTensor& operator*=(double a) noexcept {
    for (auto& v : data_) v *= a;
    return *this;
  }

  friend BasicTensor operator+(BasicTensor a, const BasicTensor& b) { return a += b; }
  friend BasicTensor operator-(BasicTensor a, const BasicTensor& b) { return a -= b; }
  friend BasicTensor operator*(Complex s, BasicTensor a) { return a *= s; }
  friend BasicTensor operator*(double s, BasicTensor a) { return a *= s; }

  bool operator==(const BasicTensor&) const = default;

  /// Reinterpret the same values in the other domain. Used where a caller
  /// needs to hand spectral data to a routine that is domain agnostic.
  template <class Other>
  BasicTensor<Other> as() const& {
    return BasicTensor<Other>(shape_, data_);
  }
  template <class Other>
  BasicTensor<Other> as() && {
    return BasicTensor<Other>(std::move(shape_), std::move(data_));
  }

 private:
  static std::size_t checked_size(const Shape& shape) {
    if (shape.empty()) throw Error(ErrorCode::ShapeMismatch, "tensor needs at least one dimension");
    return shape_size(shape);
  }

  Shape shape_;
  std::vector<Complex> data_;
};

using ComplexImage = BasicTensor<SpatialDomain>;
using SpectralTensor = BasicTensor<FrequencyDomain>;

/// <a, b> = sum conj(a_i) * b_i, conjugate-linear in the first argument.
template <class D>
Complex inner_product(const BasicTensor<D>& a, const BasicTensor<D>& b) {
  check_same_shape(a.shape(), b.shape(), "inner_product");
  Complex acc{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

/// Real part of inner_product: the Euclidean inner product of the
/// two-channel real views.
template <class D>
double real_inner(const BasicTensor<D>& a, const BasicTensor<D>& b) {
  check_same_shape(a.shape(), b.shape(), "real_inner");
  const auto x = a.channels();
  const auto y = b.channels();
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

template <class D>
double norm_squared(const BasicTensor<D>& a) {
  double acc = 0.0;
  for (double v : a.channels()) acc += v * v;
  return acc;
}

double norm(const ComplexImage& a);

/// y += a * x
template <class D>
void axpy(Complex a, const BasicTensor<D>& x, BasicTensor<D>& y) {
  check_same_shape(x.shape(), y.shape(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

template <class D>
void axpy(double a, const BasicTensor<D>& x, BasicTensor<D>& y) {
  check_same_shape(x.shape(), y.shape(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

template <class D>
bool all_finite(const BasicTensor<D>& a) {
  for (double v : a.channels()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

/// Row-major strides for a shape.
std::vector<std::size_t> strides_of(const Shape& shape);

}  // namespace ucdl
