#include "ucdl/convolution.hpp"

#include "ucdl/fft.hpp"

namespace ucdl {
namespace {

void check_kernel_fits(const Shape& kernel, const Shape& target) {
  if (kernel.size() != target.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "kernel rank " + shape_string(kernel) + " differs from image rank " + shape_string(target));
  }
  for (std::size_t a = 0; a < kernel.size(); ++a) {
    if (kernel[a] > target[a]) {
      throw Error(ErrorCode::FilterTooLarge, "kernel " + shape_string(kernel) + " exceeds " + shape_string(target));
    }
  }
}

// Calls f(kernel_index, padded_index) for every kernel entry.
template <class F>
void for_each_kernel_entry(const Shape& kernel, const Shape& target, F&& f) {
  const std::size_t rank = kernel.size();
  const auto tstrides = strides_of(target);
  std::vector<std::size_t> idx(rank, 0);
  const std::size_t count = shape_size(kernel);
  for (std::size_t lin = 0; lin < count; ++lin) {
    std::size_t dst = 0;
    for (std::size_t a = 0; a < rank; ++a) {
      const std::size_t wrapped = (idx[a] + target[a] - kernel_origin(kernel[a])) % target[a];
      dst += wrapped * tstrides[a];
    }
    f(lin, dst);
    for (std::size_t a = rank; a-- > 0;) {
      if (++idx[a] < kernel[a]) break;
      idx[a] = 0;
    }
  }
}

}  // namespace

std::size_t kernel_origin(std::size_t extent) noexcept { return extent / 2; }

ComplexImage zero_pad_filter(const KernelView& kernel, const Shape& target) {
  check_kernel_fits(kernel.shape, target);
  if (kernel.values.size() != shape_size(kernel.shape)) {
    throw Error(ErrorCode::ShapeMismatch, "kernel value count does not match its shape");
  }
  ComplexImage out(target);
  for_each_kernel_entry(kernel.shape, target, [&](std::size_t src, std::size_t dst) { out[dst] = kernel.values[src]; });
  return out;
}

std::vector<double> crop_filter(const ComplexImage& padded, const Shape& kernel_shape) {
  check_kernel_fits(kernel_shape, padded.shape());
  std::vector<double> out(shape_size(kernel_shape));
  for_each_kernel_entry(kernel_shape, padded.shape(),
                        [&](std::size_t dst, std::size_t src) { out[dst] = padded[src].real(); });
  return out;
}

ComplexImage circular_convolve(const KernelView& kernel, const ComplexImage& s) {
  auto spectrum = dft_forward(zero_pad_filter(kernel, s.shape()));
  const auto image = dft_forward(s);
  for (std::size_t i = 0; i < spectrum.size(); ++i) spectrum[i] *= image[i];
  return dft_inverse(spectrum);
}

}  // namespace ucdl
