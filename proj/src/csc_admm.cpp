#include "ucdl/csc_admm.hpp"

#include <cmath>

#include "ucdl/fft.hpp"

namespace ucdl {
namespace {

template <class D>
void check_maps(const std::vector<BasicTensor<D>>& maps, std::size_t k, const Shape& shape, const char* what) {
  if (maps.size() != k) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + ": expected " + std::to_string(k) + " maps, got " + std::to_string(maps.size()));
  }
  for (const auto& m : maps) check_same_shape(m.shape(), shape, what);
}

// F^H applied to a spectrum: N times the normalized inverse.
ComplexImage adjoint_dft(SpectralTensor X) {
  const double n = static_cast<double>(X.size());
  auto x = dft_inverse(X);
  x *= n;
  return x;
}

// (F^{-1})^H applied to an image: the forward transform divided by N.
SpectralTensor adjoint_idft(const ComplexImage& x) {
  auto X = dft_forward(x);
  X *= 1.0 / static_cast<double>(X.size());
  return X;
}

}  // namespace

FilterBank::FilterBank(std::size_t k, Shape shape)
    : count(k), kernel_shape(std::move(shape)), values(k * shape_size(kernel_shape), 0.0) {}

FilterBank::FilterBank(std::size_t k, Shape shape, std::vector<double> v)
    : count(k), kernel_shape(std::move(shape)), values(std::move(v)) {
  validate();
}

KernelView FilterBank::kernel(std::size_t k) const { return {kernel_shape, kernel_values(k)}; }

std::span<double> FilterBank::kernel_values(std::size_t k) {
  return std::span<double>(values).subspan(k * kernel_size(), kernel_size());
}

std::span<const double> FilterBank::kernel_values(std::size_t k) const {
  return std::span<const double>(values).subspan(k * kernel_size(), kernel_size());
}

double FilterBank::kernel_norm(std::size_t k) const {
  double acc = 0.0;
  for (double v : kernel_values(k)) acc += v * v;
  return std::sqrt(acc);
}

double FilterBank::max_norm_defect() const {
  double worst = 0.0;
  for (std::size_t k = 0; k < count; ++k) worst = std::max(worst, std::abs(kernel_norm(k) - 1.0));
  return worst;
}

void FilterBank::validate() const {
  if (count == 0) throw Error(ErrorCode::InvalidConfig, "filter bank is empty");
  if (kernel_shape.empty()) throw Error(ErrorCode::InvalidConfig, "filter bank has no kernel shape");
  if (values.size() != count * kernel_size()) {
    throw Error(ErrorCode::ShapeMismatch, "filter bank holds " + std::to_string(values.size()) + " values for " +
                                              std::to_string(count) + " kernels of " + shape_string(kernel_shape));
  }
}

void AdmmConfig::validate() const {
  if (!(lambda > 0.0) || !(alpha >= 0.0) || !(beta > 0.0) || inner_iters < 1) {
    throw Error(ErrorCode::InvalidConfig, "ADMM needs lambda > 0, alpha >= 0, beta > 0 and at least one iteration");
  }
}

CodeState CodeState::zeros(std::size_t k, const Shape& image_shape) {
  CodeState st;
  st.s.assign(k, ComplexImage(image_shape));
  st.u = st.s;
  st.z = st.s;
  return st;
}

void CodeState::validate(std::size_t k, const Shape& image_shape) const {
  check_maps(s, k, image_shape, "CodeState.s");
  check_maps(u, k, image_shape, "CodeState.u");
  check_maps(z, k, image_shape, "CodeState.z");
}

DictionarySpectrum::DictionarySpectrum(const FilterBank& filters, const Shape& image_shape)
    : shape_(image_shape), power_(shape_size(image_shape), 0.0) {
  filters.validate();
  spectra_.reserve(filters.count);
  for (std::size_t k = 0; k < filters.count; ++k) {
    spectra_.push_back(dft_forward(zero_pad_filter(filters.kernel(k), image_shape)));
    for (std::size_t w = 0; w < power_.size(); ++w) power_[w] += std::norm(spectra_.back()[w]);
  }
}

std::vector<SpectralTensor> sherman_morrison_solve(const DictionarySpectrum& dict,
                                                   const std::vector<SpectralTensor>& rhs, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::NonPositiveGamma, "gamma = " + std::to_string(gamma));
  const std::size_t K = dict.count();
  check_maps(rhs, K, dict.image_shape(), "sherman_morrison_solve");
  std::vector<SpectralTensor> out = rhs;
  const double inv_gamma = 1.0 / gamma;
  for (std::size_t w = 0; w < dict.points(); ++w) {
    Complex dr{};
    for (std::size_t k = 0; k < K; ++k) dr += dict[k][w] * rhs[k][w];
    const Complex coeff = dr * (inv_gamma / (gamma + dict.power(w)));
    for (std::size_t k = 0; k < K; ++k) out[k][w] = rhs[k][w] * inv_gamma - std::conj(dict[k][w]) * coeff;
  }
  return out;
}

SpectralTensor synthesize_spectrum(const DictionarySpectrum& dict, const std::vector<SpectralTensor>& s) {
  SpectralTensor out(dict.image_shape());
  for (std::size_t k = 0; k < dict.count(); ++k) {
    check_same_shape(s[k].shape(), dict.image_shape(), "synthesize_spectrum");
    for (std::size_t w = 0; w < out.size(); ++w) out[w] += dict[k][w] * s[k][w];
  }
  return out;
}

std::vector<SpectralTensor> spectral_adjoint(const DictionarySpectrum& dict, const SpectralTensor& X) {
  check_same_shape(X.shape(), dict.image_shape(), "spectral_adjoint");
  std::vector<SpectralTensor> out(dict.count(), SpectralTensor(dict.image_shape()));
  for (std::size_t k = 0; k < dict.count(); ++k) {
    for (std::size_t w = 0; w < X.size(); ++w) out[k][w] = std::conj(dict[k][w]) * X[w];
  }
  return out;
}

namespace {

// Shared by the public s_update and the traced ADMM step.
std::vector<SpectralTensor> solve_s_spectrum(const SpectralTensor& x_spectrum,
                                             const std::vector<SpectralTensor>& uz_spectrum,
                                             const DictionarySpectrum& dict, double gamma) {
  std::vector<SpectralTensor> rhs = spectral_adjoint(dict, x_spectrum);
  for (std::size_t k = 0; k < dict.count(); ++k) axpy(gamma, uz_spectrum[k], rhs[k]);
  return sherman_morrison_solve(dict, rhs, gamma);
}

std::vector<SpectralTensor> spectra_of_sum(const std::vector<ComplexImage>& u, const std::vector<ComplexImage>& z) {
  std::vector<SpectralTensor> out;
  out.reserve(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) out.push_back(dft_forward(u[k] + z[k]));
  return out;
}

}  // namespace

std::vector<ComplexImage> s_update(const ComplexImage& x, const std::vector<ComplexImage>& u,
                                   const std::vector<ComplexImage>& z, const DictionarySpectrum& dict, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::NonPositiveGamma, "gamma = " + std::to_string(gamma));
  check_same_shape(x.shape(), dict.image_shape(), "s_update");
  check_maps(u, dict.count(), dict.image_shape(), "s_update u");
  check_maps(z, dict.count(), dict.image_shape(), "s_update z");
  const auto sf = solve_s_spectrum(dft_forward(x), spectra_of_sum(u, z), dict, gamma);
  std::vector<ComplexImage> s;
  s.reserve(sf.size());
  for (const auto& v : sf) s.push_back(dft_inverse(v));
  return s;
}

std::vector<ComplexImage> s_update(const ComplexImage& x, const std::vector<ComplexImage>& u,
                                   const std::vector<ComplexImage>& z, const FilterBank& filters, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::NonPositiveGamma, "gamma = " + std::to_string(gamma));
  return s_update(x, u, z, DictionarySpectrum(filters, x.shape()), gamma);
}

std::vector<ComplexImage> u_update(const std::vector<ComplexImage>& s, const std::vector<ComplexImage>& z, double alpha,
                                   double beta) {
  if (!(beta > 0.0)) throw Error(ErrorCode::NonPositiveBeta, "beta = " + std::to_string(beta));
  if (!(alpha >= 0.0)) throw Error(ErrorCode::InvalidConfig, "alpha must be >= 0");
  if (s.size() != z.size()) throw Error(ErrorCode::ShapeMismatch, "u_update: map counts differ");
  const double tau = alpha / beta;
  std::vector<ComplexImage> u;
  u.reserve(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    check_same_shape(s[k].shape(), z[k].shape(), "u_update");
    ComplexImage v = s[k] - z[k];
    for (double& c : v.channels()) c = soft_threshold(c, tau);
    u.push_back(std::move(v));
  }
  return u;
}

std::vector<ComplexImage> z_update(const std::vector<ComplexImage>& z, const std::vector<ComplexImage>& u,
                                   const std::vector<ComplexImage>& s) {
  if (z.size() != u.size() || z.size() != s.size()) throw Error(ErrorCode::ShapeMismatch, "z_update: map counts differ");
  std::vector<ComplexImage> out;
  out.reserve(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    ComplexImage next = z[k];
    next += u[k] - s[k];
    out.push_back(std::move(next));
  }
  return out;
}

ComplexImage dictionary_synthesis(const DictionarySpectrum& dict, const std::vector<ComplexImage>& s) {
  check_maps(s, dict.count(), dict.image_shape(), "dictionary_synthesis");
  SpectralTensor acc(dict.image_shape());
  for (std::size_t k = 0; k < dict.count(); ++k) {
    const auto sk = dft_forward(s[k]);
    for (std::size_t w = 0; w < acc.size(); ++w) acc[w] += dict[k][w] * sk[w];
  }
  return dft_inverse(acc);
}

ComplexImage dictionary_synthesis(const FilterBank& filters, const std::vector<ComplexImage>& s) {
  if (s.empty()) throw Error(ErrorCode::ShapeMismatch, "dictionary_synthesis: no maps");
  return dictionary_synthesis(DictionarySpectrum(filters, s.front().shape()), s);
}

std::vector<ComplexImage> dictionary_adjoint(const DictionarySpectrum& dict, const ComplexImage& r) {
  check_same_shape(r.shape(), dict.image_shape(), "dictionary_adjoint");
  const auto R = dft_forward(r);
  std::vector<ComplexImage> out;
  out.reserve(dict.count());
  for (std::size_t k = 0; k < dict.count(); ++k) {
    SpectralTensor prod(dict.image_shape());
    for (std::size_t w = 0; w < prod.size(); ++w) prod[w] = std::conj(dict[k][w]) * R[w];
    out.push_back(dft_inverse(prod));
  }
  return out;
}

CodeState admm_step(const ComplexImage& x, const CodeState& state, const DictionarySpectrum& dict,
                    const AdmmConfig& config, AdmmStepRecord* record) {
  config.validate();
  check_same_shape(x.shape(), dict.image_shape(), "admm_step");
  state.validate(dict.count(), dict.image_shape());
  const double gamma = config.gamma();

  auto x_spectrum = dft_forward(x);
  auto uz_spectrum = spectra_of_sum(state.u, state.z);
  auto s_spectrum = solve_s_spectrum(x_spectrum, uz_spectrum, dict, gamma);

  CodeState next;
  next.s.reserve(dict.count());
  for (const auto& v : s_spectrum) next.s.push_back(dft_inverse(v));

  // u-update and z-update, keeping s - z for the backward pass.
  const double tau = config.threshold();
  std::vector<ComplexImage> prox_input;
  prox_input.reserve(dict.count());
  next.u.reserve(dict.count());
  next.z.reserve(dict.count());
  for (std::size_t k = 0; k < dict.count(); ++k) {
    ComplexImage v = next.s[k] - state.z[k];
    ComplexImage u = v;
    for (double& c : u.channels()) c = soft_threshold(c, tau);
    ComplexImage z = state.z[k];
    z += u - next.s[k];
    next.u.push_back(std::move(u));
    next.z.push_back(std::move(z));
    prox_input.push_back(std::move(v));
  }

  if (record != nullptr) {
    record->x_spectrum = std::move(x_spectrum);
    record->uz_spectrum = std::move(uz_spectrum);
    record->s_spectrum = std::move(s_spectrum);
    record->prox_input = std::move(prox_input);
  }
  return next;
}

CodeState admm_step(const ComplexImage& x, const CodeState& state, const FilterBank& filters,
                    const AdmmConfig& config) {
  return admm_step(x, state, DictionarySpectrum(filters, x.shape()), config);
}

double l1_norm(const ComplexImage& x) {
  double acc = 0.0;
  for (double v : x.channels()) acc += std::abs(v);
  return acc;
}

double csc_objective(const ComplexImage& x, const CodeState& state, const FilterBank& filters,
                     const AdmmConfig& config) {
  const DictionarySpectrum dict(filters, x.shape());
  state.validate(dict.count(), x.shape());
  const double fidelity = norm_squared(x - dictionary_synthesis(dict, state.s));
  double sparsity = 0.0;
  double coupling = 0.0;
  for (std::size_t k = 0; k < state.count(); ++k) {
    sparsity += l1_norm(state.u[k]);
    ComplexImage r = state.u[k] - state.s[k];
    r += state.z[k];
    coupling += norm_squared(r);
  }
  return 0.5 * config.lambda * fidelity + config.alpha * sparsity + 0.5 * config.beta * coupling;
}

double sparse_coding_objective(const ComplexImage& x, const std::vector<ComplexImage>& maps, const FilterBank& filters,
                               double lambda, double alpha) {
  const DictionarySpectrum dict(filters, x.shape());
  double l1 = 0.0;
  for (const auto& m : maps) l1 += l1_norm(m);
  return 0.5 * lambda * norm_squared(x - dictionary_synthesis(dict, maps)) + alpha * l1;
}

DictionaryGradient::DictionaryGradient(const DictionarySpectrum& dict)
    : spectrum(dict.count(), SpectralTensor(dict.image_shape())) {}

std::vector<double> DictionaryGradient::kernel_gradient(const Shape& kernel_shape) const {
  std::vector<double> out;
  out.reserve(spectrum.size() * shape_size(kernel_shape));
  for (const auto& g : spectrum) {
    // d^f = F P(d) with real d, so d_bar = P^T Re(F^H g).
    const auto back = crop_filter(adjoint_dft(g), kernel_shape);
    out.insert(out.end(), back.begin(), back.end());
  }
  return out;
}

void admm_step_vjp(const AdmmStepRecord& record, const DictionarySpectrum& dict, const AdmmConfig& config,
                   std::vector<ComplexImage>& u_bar, std::vector<ComplexImage>& z_bar,
                   const std::vector<ComplexImage>* s_bar, ComplexImage& x_bar, DictionaryGradient& grad) {
  const std::size_t K = dict.count();
  const Shape& shape = dict.image_shape();
  check_maps(u_bar, K, shape, "admm_step_vjp u_bar");
  check_maps(z_bar, K, shape, "admm_step_vjp z_bar");
  const double gamma = config.gamma();
  const double tau = config.threshold();

  // z_out = z_prev + u_out - s;  u_out = S_tau(s - z_prev)
  std::vector<ComplexImage> s_total(K, ComplexImage(shape));
  std::vector<ComplexImage> z_prev_bar = z_bar;
  for (std::size_t k = 0; k < K; ++k) {
    if (s_bar != nullptr) s_total[k] = (*s_bar)[k];
    s_total[k] -= z_bar[k];
    ComplexImage u_total = u_bar[k] + z_bar[k];

    const auto v = record.prox_input[k].channels();
    auto ut = u_total.channels();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (std::abs(v[i]) > tau) {
        grad.threshold -= (v[i] > 0.0 ? 1.0 : -1.0) * ut[i];
      } else {
        ut[i] = 0.0;
      }
    }
    s_total[k] += u_total;
    z_prev_bar[k] -= u_total;
  }

  std::vector<SpectralTensor> sf_bar;
  sf_bar.reserve(K);
  for (const auto& s : s_total) sf_bar.push_back(adjoint_idft(s));

  // The system matrix conj(d) d^T + gamma I is Hermitian, so the adjoint of
  // the solve is the same solve.
  const auto r_bar = sherman_morrison_solve(dict, sf_bar, gamma);

  SpectralTensor X_bar(shape);
  std::vector<SpectralTensor> c_bar(K, SpectralTensor(shape));
  const auto& X = record.x_spectrum;
  const auto& c = record.uz_spectrum;
  const auto& s = record.s_spectrum;
  for (std::size_t w = 0; w < dict.points(); ++w) {
    Complex d_rbar{};
    Complex d_s{};
    for (std::size_t k = 0; k < K; ++k) {
      d_rbar += dict[k][w] * r_bar[k][w];
      d_s += dict[k][w] * s[k][w];
    }
    X_bar[w] = d_rbar;
    const Complex residual = X[w] - d_s;
    for (std::size_t k = 0; k < K; ++k) {
      const Complex rb = r_bar[k][w];
      c_bar[k][w] = gamma * rb;
      grad.gamma += (std::conj(rb) * (c[k][w] - s[k][w])).real();
      grad.spectrum[k][w] += std::conj(rb) * residual - d_rbar * std::conj(s[k][w]);
    }
  }

  x_bar += adjoint_dft(std::move(X_bar));
  for (std::size_t k = 0; k < K; ++k) {
    auto w_bar = adjoint_dft(std::move(c_bar[k]));
    z_prev_bar[k] += w_bar;
    u_bar[k] = std::move(w_bar);
  }
  z_bar = std::move(z_prev_bar);
}

std::vector<ComplexImage> synthesis_vjp(const DictionarySpectrum& dict, const std::vector<SpectralTensor>& s_spectrum,
                                        const ComplexImage& approx_bar, DictionaryGradient& grad) {
  check_same_shape(approx_bar.shape(), dict.image_shape(), "synthesis_vjp");
  const auto A_bar = adjoint_idft(approx_bar);
  std::vector<ComplexImage> s_bar;
  s_bar.reserve(dict.count());
  for (std::size_t k = 0; k < dict.count(); ++k) {
    SpectralTensor sf_bar(dict.image_shape());
    for (std::size_t w = 0; w < sf_bar.size(); ++w) {
      sf_bar[w] = std::conj(dict[k][w]) * A_bar[w];
      grad.spectrum[k][w] += std::conj(s_spectrum[k][w]) * A_bar[w];
    }
    // s^f = F s
    s_bar.push_back(adjoint_dft(std::move(sf_bar)));
  }
  return s_bar;
}

}  // namespace ucdl
