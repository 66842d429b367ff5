#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ucdl/tensor.hpp"

namespace ucdl {

/// Receiver sensitivities c_j, one (N_x, N_y) map per coil, shared by every
/// frame of a dynamic image.
struct CoilMaps {
  std::vector<ComplexImage> maps;

  std::size_t count() const noexcept { return maps.size(); }
  const Shape& spatial_shape() const;
  /// Throws ShapeMismatch for inconsistent maps and InvalidConfig when some
  /// pixel has no sensitivity at all.
  void validate() const;
};

/// Boolean k-space sampling pattern over (N_x, N_y, N_t); true = acquired.
/// Frequencies are in unshifted DFT order (DC at index 0).
struct SamplingMask {
  Shape shape;
  std::vector<std::uint8_t> sampled;

  std::size_t count() const noexcept;
  /// Requires at least one sampled entry per frame.
  void validate() const;
  ComplexImage to_image() const;
  static SamplingMask from_image(const ComplexImage& image);
};

enum class MaskFamily { Full, Lines, Points };

MaskFamily parse_mask_family(const std::string& name);
std::string to_string(MaskFamily family);

/// Cartesian variable-density masks drawn independently per frame. `Lines`
/// acquires whole k_x readouts at selected k_y; `Points` acquires single
/// (k_x, k_y) locations. Both always include the lowest frequencies (half of
/// the budget) and fill the rest by Gaussian-weighted sampling without
/// replacement, so that roughly 1/acceleration of k-space is acquired.
SamplingMask make_sampling_mask(const Shape& shape, MaskFamily family, double acceleration, std::uint64_t seed);

/// Smooth complex Gaussian-bump sensitivities placed around the field of view,
/// normalized so that sum_j |c_j|^2 = 1 at every pixel.
CoilMaps make_coil_maps(std::size_t nx, std::size_t ny, std::size_t count);

/// Multi-coil Cartesian encoding A = (I_{N_c} kron M F) C.
///
/// F is the per-frame 2D DFT over (N_x, N_y) scaled by 1/sqrt(N_x N_y) so
/// that, with normalized coils and a full mask, A^H A = I. Data vectors list
/// coil 0's sampled entries first, each coil's entries in row-major
/// (k_x, k_y, t) order.
class FourierOperator {
 public:
  FourierOperator(CoilMaps coils, SamplingMask mask);

  const Shape& image_shape() const noexcept { return mask_.shape; }
  std::size_t data_size() const noexcept { return coils_.count() * sampled_.size(); }
  const CoilMaps& coils() const noexcept { return coils_; }
  const SamplingMask& mask() const noexcept { return mask_; }

  std::vector<Complex> forward(const ComplexImage& x) const;
  ComplexImage adjoint(std::span<const Complex> y) const;
  /// A^H A x without forming the compact data vector.
  ComplexImage normal(const ComplexImage& x) const;

 private:
  ComplexImage coil_image(const ComplexImage& x, std::size_t coil) const;
  void accumulate_conj_coil(const ComplexImage& image, std::size_t coil, ComplexImage& acc) const;

  CoilMaps coils_;
  SamplingMask mask_;
  std::vector<std::size_t> sampled_;
  double scale_;
};

/// Measured data y = A x + noise together with everything needed to rebuild A.
struct KSpaceSample {
  std::vector<Complex> y;
  SamplingMask mask;
  CoilMaps coils;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  const Shape& image_shape() const noexcept { return mask.shape; }
  FourierOperator op() const { return FourierOperator(coils, mask); }
  /// Checks y length against N_c times the number of sampled entries.
  void validate() const;
};

std::vector<Complex> forward_apply(const ComplexImage& x, const CoilMaps& coils, const SamplingMask& mask);
ComplexImage adjoint_apply(std::span<const Complex> y, const CoilMaps& coils, const SamplingMask& mask);

inline constexpr double kDefaultNoiseSigma = 0.02;

/// y = A x + sigma (g_re + i g_im) with g standard normal, drawn in data order
/// (real then imaginary per entry) from a mt19937_64 seeded with `seed`.
KSpaceSample simulate_measurement(const ComplexImage& x_truth, const CoilMaps& coils, const SamplingMask& mask,
                                  double sigma, std::uint64_t seed);

}  // namespace ucdl
