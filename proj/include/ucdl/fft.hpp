#pragma once

#include <span>

#include "ucdl/tensor.hpp"

namespace ucdl {

enum class FftDirection { Forward, Inverse };

/// In-place DFT over the leading `transform_axes` axes of a row-major array
/// of the given shape, batched over the remaining trailing axes.
///
/// Forward is unnormalized: X[k] = sum_n x[n] exp(-2 pi i k.n / N).
/// Inverse carries the 1/N factor (N = product of the transformed extents),
/// so the convolution theorem F(d * s) = F(d) F(s) holds without constants.
/// Arbitrary extents are supported.
void fft_inplace(std::span<Complex> data, const Shape& shape, std::size_t transform_axes, FftDirection dir);

/// Full-size forward DFT over every axis.
SpectralTensor dft_forward(const ComplexImage& x);

/// Exact inverse of dft_forward, including the 1/N normalization.
ComplexImage dft_inverse(const SpectralTensor& X);

}  // namespace ucdl
