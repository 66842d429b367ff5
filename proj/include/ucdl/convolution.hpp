#pragma once

#include <span>
#include <vector>

#include "ucdl/tensor.hpp"

namespace ucdl {

/// Non-owning view of one real convolution kernel.
struct KernelView {
  Shape shape;
  std::span<const double> values;
};

/// Kernels are spatially centred: entry i along an axis of length k sits at
/// offset i - k/2 (integer division) from the output pixel. zero_pad_filter
/// realizes this by wrapping the centre to index 0 of the target grid.
std::size_t kernel_origin(std::size_t extent) noexcept;

/// Embed a kernel into a zero array of `target` shape with the centre at the
/// origin. Throws FilterTooLarge if any kernel extent exceeds the target's and
/// ShapeMismatch if the ranks differ.
ComplexImage zero_pad_filter(const KernelView& kernel, const Shape& target);

/// Adjoint of zero_pad_filter restricted to real kernels: gathers the real
/// parts at the kernel support back into kernel order.
std::vector<double> crop_filter(const ComplexImage& padded, const Shape& kernel_shape);

/// Periodic convolution (d * s)[n] = sum_i d[i] s[n - (i - origin)], computed
/// through the spectral product of the padded kernel and the image.
ComplexImage circular_convolve(const KernelView& kernel, const ComplexImage& s);

}  // namespace ucdl
