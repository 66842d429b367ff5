#pragma once

#include <span>
#include <vector>

#include "ucdl/convolution.hpp"
#include "ucdl/tensor.hpp"

namespace ucdl {

/// K real kernels of a common shape, stored kernel after kernel. The same
/// kernels act on the real and imaginary channels of a complex image.
struct FilterBank {
  std::size_t count = 0;
  Shape kernel_shape;
  std::vector<double> values;

  FilterBank() = default;
  FilterBank(std::size_t k, Shape shape);
  FilterBank(std::size_t k, Shape shape, std::vector<double> v);

  std::size_t kernel_size() const { return shape_size(kernel_shape); }
  KernelView kernel(std::size_t k) const;
  std::span<double> kernel_values(std::size_t k);
  std::span<const double> kernel_values(std::size_t k) const;
  double kernel_norm(std::size_t k) const;
  /// max_k | ||d_k||_2 - 1 |
  double max_norm_defect() const;
  void validate() const;
};

struct AdmmConfig {
  double lambda = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  int inner_iters = 1;

  double gamma() const noexcept { return beta / lambda; }
  double threshold() const noexcept { return alpha / beta; }
  void validate() const;
};

/// Coefficient maps s_k, auxiliaries u_k and scaled duals z_k.
struct CodeState {
  std::vector<ComplexImage> s, u, z;

  static CodeState zeros(std::size_t k, const Shape& image_shape);
  std::size_t count() const noexcept { return s.size(); }
  void validate(std::size_t k, const Shape& image_shape) const;
};

/// Spectra d_k^f of the zero-padded kernels on a fixed image grid, plus the
/// per-frequency power ||d(w)||^2.
class DictionarySpectrum {
 public:
  DictionarySpectrum(const FilterBank& filters, const Shape& image_shape);

  std::size_t count() const noexcept { return spectra_.size(); }
  const Shape& image_shape() const noexcept { return shape_; }
  std::size_t points() const noexcept { return power_.size(); }
  const SpectralTensor& operator[](std::size_t k) const { return spectra_[k]; }
  double power(std::size_t w) const { return power_[w]; }

 private:
  Shape shape_;
  std::vector<SpectralTensor> spectra_;
  std::vector<double> power_;
};

/// Solve (conj(d) d^T + gamma I) s = rhs independently at each frequency with
/// the Sherman-Morrison closed form
///   s = rhs / gamma - conj(d) (d^T rhs) / (gamma (gamma + ||d||^2)).
std::vector<SpectralTensor> sherman_morrison_solve(const DictionarySpectrum& dict,
                                                   const std::vector<SpectralTensor>& rhs, double gamma);

/// sum_k d_k^f s_k^f
SpectralTensor synthesize_spectrum(const DictionarySpectrum& dict, const std::vector<SpectralTensor>& s);
/// Adjoint of synthesize_spectrum: X -> (conj(d_k^f) X)_k.
std::vector<SpectralTensor> spectral_adjoint(const DictionarySpectrum& dict, const SpectralTensor& X);

/// Exact minimizer over s of
///   (1/2)||x - sum_k d_k * s_k||^2 + (gamma/2) sum_k ||u_k + z_k - s_k||^2.
std::vector<ComplexImage> s_update(const ComplexImage& x, const std::vector<ComplexImage>& u,
                                   const std::vector<ComplexImage>& z, const FilterBank& filters, double gamma);
std::vector<ComplexImage> s_update(const ComplexImage& x, const std::vector<ComplexImage>& u,
                                   const std::vector<ComplexImage>& z, const DictionarySpectrum& dict, double gamma);

/// S_tau(v) = sign(v) max(|v| - tau, 0)
inline double soft_threshold(double v, double tau) noexcept {
  if (v > tau) return v - tau;
  if (v < -tau) return v + tau;
  return 0.0;
}

/// u_k = S_{alpha/beta}(s_k - z_k), applied to the real and imaginary
/// channels separately.
std::vector<ComplexImage> u_update(const std::vector<ComplexImage>& s, const std::vector<ComplexImage>& z, double alpha,
                                   double beta);

/// z_k + u_k - s_k
std::vector<ComplexImage> z_update(const std::vector<ComplexImage>& z, const std::vector<ComplexImage>& u,
                                   const std::vector<ComplexImage>& s);

/// sum_k d_k * s_k
ComplexImage dictionary_synthesis(const FilterBank& filters, const std::vector<ComplexImage>& s);
ComplexImage dictionary_synthesis(const DictionarySpectrum& dict, const std::vector<ComplexImage>& s);

/// Adjoint of dictionary_synthesis: r -> (d_k correlated with r)_k.
std::vector<ComplexImage> dictionary_adjoint(const DictionarySpectrum& dict, const ComplexImage& r);

/// Quantities of one ADMM step kept for reverse-mode differentiation.
struct AdmmStepRecord {
  SpectralTensor x_spectrum;
  std::vector<SpectralTensor> uz_spectrum;  // F(u_k + z_k) before the step
  std::vector<SpectralTensor> s_spectrum;   // solution of the s-update
  std::vector<ComplexImage> prox_input;     // s_k - z_k
};

/// One s -> u -> z sweep. When `record` is given it is filled for backward.
CodeState admm_step(const ComplexImage& x, const CodeState& state, const DictionarySpectrum& dict,
                    const AdmmConfig& config, AdmmStepRecord* record = nullptr);
CodeState admm_step(const ComplexImage& x, const CodeState& state, const FilterBank& filters,
                    const AdmmConfig& config);

/// (lambda/2)||x - sum d_k*s_k||^2 + alpha sum ||u_k||_1 + (beta/2) sum ||u_k - s_k + z_k||^2,
/// where ||.||_1 of a complex map sums |re| + |im|.
double csc_objective(const ComplexImage& x, const CodeState& state, const FilterBank& filters,
                     const AdmmConfig& config);

/// (lambda/2)||x - sum d_k*m_k||^2 + alpha sum ||m_k||_1, the sparse-coding
/// problem with the constraint u = s substituted. Evaluate it at the u maps.
double sparse_coding_objective(const ComplexImage& x, const std::vector<ComplexImage>& maps, const FilterBank& filters,
                               double lambda, double alpha);

/// Sum of |re| + |im| over all entries.
double l1_norm(const ComplexImage& x);

/// Reverse-mode accumulators shared by the ADMM and synthesis adjoints.
struct DictionaryGradient {
  std::vector<SpectralTensor> spectrum;  // dL/d(d_k^f) in the (d/dRe + i d/dIm) convention
  double gamma = 0.0;
  double threshold = 0.0;

  explicit DictionaryGradient(const DictionarySpectrum& dict);
  /// Pull the spectral gradient back to the real kernel entries.
  std::vector<double> kernel_gradient(const Shape& kernel_shape) const;
};

/// Vector-Jacobian product of admm_step. On entry `u_bar`/`z_bar` hold the
/// adjoints of the step's outputs and `s_bar` (may be null) any extra adjoint
/// on its s output; on exit `u_bar`/`z_bar` hold the adjoints of the step's
/// inputs. The adjoint of x is added to `x_bar`.
void admm_step_vjp(const AdmmStepRecord& record, const DictionarySpectrum& dict, const AdmmConfig& config,
                   std::vector<ComplexImage>& u_bar, std::vector<ComplexImage>& z_bar,
                   const std::vector<ComplexImage>* s_bar, ComplexImage& x_bar, DictionaryGradient& grad);

/// Vector-Jacobian product of approx = F^{-1}(sum_k d_k^f s_k^f) with respect
/// to the spatial maps s_k = F^{-1} s_k^f; accumulates the filter part.
std::vector<ComplexImage> synthesis_vjp(const DictionarySpectrum& dict, const std::vector<SpectralTensor>& s_spectrum,
                                        const ComplexImage& approx_bar, DictionaryGradient& grad);

}  // namespace ucdl
