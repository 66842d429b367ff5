#pragma once

// Independent reference implementations used only by the tests. None of
// them touches the FFT path of the library.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "ucdl/csc_admm.hpp"
#include "ucdl/operators.hpp"
#include "ucdl/tensor.hpp"

namespace oracle {

using ucdl::Complex;
using ucdl::ComplexImage;
using ucdl::Shape;
using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
using CVector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;

inline ComplexImage random_image(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  ComplexImage x(shape);
  for (auto& v : x.data()) v = {g(rng), g(rng)};
  return x;
}

inline std::vector<double> random_real(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& e : v) e = g(rng);
  return v;
}

inline std::vector<std::size_t> unravel(std::size_t lin, const Shape& shape) {
  std::vector<std::size_t> idx(shape.size());
  for (std::size_t a = shape.size(); a-- > 0;) {
    idx[a] = lin % shape[a];
    lin /= shape[a];
  }
  return idx;
}

inline std::size_t ravel(const std::vector<std::size_t>& idx, const Shape& shape) {
  std::size_t lin = 0;
  for (std::size_t a = 0; a < shape.size(); ++a) lin = lin * shape[a] + idx[a];
  return lin;
}

/// O(N^2) multidimensional DFT by direct summation; sign -1 forward, +1
/// inverse (unnormalized).
inline ComplexImage naive_dft(const ComplexImage& x, int sign = -1) {
  const Shape& shape = x.shape();
  ComplexImage out(shape);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const auto kk = unravel(k, shape);
    Complex acc{};
    for (std::size_t n = 0; n < x.size(); ++n) {
      const auto nn = unravel(n, shape);
      double phase = 0.0;
      for (std::size_t a = 0; a < shape.size(); ++a) {
        phase += static_cast<double>(kk[a] * nn[a] % shape[a]) / static_cast<double>(shape[a]);
      }
      acc += x[n] * std::polar(1.0, sign * 2.0 * std::numbers::pi * phase);
    }
    out[k] = acc;
  }
  return out;
}

/// Direct periodic convolution with the centred-kernel convention:
/// out[n] = sum_i d[i] s[n - (i - k/2)].
inline ComplexImage direct_convolve(const ucdl::KernelView& d, const ComplexImage& s) {
  const Shape& shape = s.shape();
  ComplexImage out(shape);
  const std::size_t nk = ucdl::shape_size(d.shape);
  for (std::size_t n = 0; n < s.size(); ++n) {
    const auto nn = unravel(n, shape);
    Complex acc{};
    for (std::size_t i = 0; i < nk; ++i) {
      const auto ii = unravel(i, d.shape);
      std::vector<std::size_t> src(shape.size());
      for (std::size_t a = 0; a < shape.size(); ++a) {
        const long off = static_cast<long>(ii[a]) - static_cast<long>(d.shape[a] / 2);
        const long m = static_cast<long>(nn[a]) - off;
        const long n_a = static_cast<long>(shape[a]);
        src[a] = static_cast<std::size_t>(((m % n_a) + n_a) % n_a);
      }
      acc += d.values[i] * s[ravel(src, shape)];
    }
    out[n] = acc;
  }
  return out;
}

/// Dense matrix of s -> d * s, assembled column by column from direct_convolve.
inline CMatrix convolution_matrix(const ucdl::KernelView& d, const Shape& shape) {
  const std::size_t n = ucdl::shape_size(shape);
  CMatrix m(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    ComplexImage e(shape);
    e[j] = 1.0;
    const auto col = direct_convolve(d, e);
    for (std::size_t i = 0; i < n; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
  }
  return m;
}

/// Dense [D_1, ..., D_K] for a filter bank.
inline CMatrix dictionary_matrix(const ucdl::FilterBank& bank, const Shape& shape) {
  const auto n = static_cast<Eigen::Index>(ucdl::shape_size(shape));
  CMatrix m(n, n * static_cast<Eigen::Index>(bank.count));
  for (std::size_t k = 0; k < bank.count; ++k) m.middleCols(static_cast<Eigen::Index>(k) * n, n) = convolution_matrix(bank.kernel(k), shape);
  return m;
}

inline CVector to_vector(const ComplexImage& x) {
  CVector v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v(static_cast<Eigen::Index>(i)) = x[i];
  return v;
}

inline CVector stack(const std::vector<ComplexImage>& maps) {
  const auto n = static_cast<Eigen::Index>(maps.front().size());
  CVector v(n * static_cast<Eigen::Index>(maps.size()));
  for (std::size_t k = 0; k < maps.size(); ++k) v.segment(static_cast<Eigen::Index>(k) * n, n) = to_vector(maps[k]);
  return v;
}

inline ComplexImage to_image(const CVector& v, const Shape& shape) {
  ComplexImage x(shape);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = v(static_cast<Eigen::Index>(i));
  return x;
}

/// Dense matrix of a linear image map, built by probing unit vectors.
template <class F>
CMatrix probe_matrix(F&& apply, const Shape& in_shape, std::size_t out_size) {
  const std::size_t n = ucdl::shape_size(in_shape);
  CMatrix m(static_cast<Eigen::Index>(out_size), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    ComplexImage e(in_shape);
    e[j] = 1.0;
    const std::vector<Complex> col = apply(e);
    for (std::size_t i = 0; i < out_size; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
  }
  return m;
}

inline double rel_diff(const ComplexImage& a, const ComplexImage& b) {
  const double den = std::max(ucdl::norm(b), 1e-300);
  return ucdl::norm(a - b) / den;
}

inline ucdl::FilterBank random_bank(std::size_t k, const Shape& kshape, std::mt19937_64& rng) {
  return ucdl::FilterBank(k, kshape, random_real(k * ucdl::shape_size(kshape), rng));
}

}  // namespace oracle
