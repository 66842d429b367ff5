#include "ucdl/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ucdl/fft.hpp"

namespace ucdl {
namespace {

// Signed frequency index for unshifted DFT ordering.
double centered(std::size_t k, std::size_t n) {
  return k < (n + 1) / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
}

// Picks `budget` of the candidates: the lowest-frequency half deterministically,
// the rest by weighted sampling without replacement (Efraimidis-Spirakis keys).
std::vector<std::size_t> pick_variable_density(const std::vector<double>& radius, std::size_t budget,
                                               double width, std::mt19937_64& rng) {
  const std::size_t n = radius.size();
  budget = std::min(budget, n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return radius[a] < radius[b]; });

  const std::size_t n_center = std::max<std::size_t>(1, budget / 2);
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_center));

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<std::pair<double, std::size_t>> keys;
  for (std::size_t i = n_center; i < n; ++i) {
    const std::size_t c = order[i];
    const double w = std::exp(-0.5 * (radius[c] / width) * (radius[c] / width)) + 1e-3;
    double u = uniform(rng);
    if (u <= 0.0) u = 1e-300;
    keys.emplace_back(std::log(u) / w, c);
  }
  std::stable_sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; i + n_center < budget; ++i) chosen.push_back(keys[i].second);
  return chosen;
}

}  // namespace

const Shape& CoilMaps::spatial_shape() const {
  if (maps.empty()) throw Error(ErrorCode::InvalidConfig, "no coil maps");
  return maps.front().shape();
}

void CoilMaps::validate() const {
  const Shape& shape = spatial_shape();
  if (shape.size() != 2) throw Error(ErrorCode::ShapeMismatch, "coil maps must be 2D, got " + shape_string(shape));
  for (const auto& c : maps) check_same_shape(shape, c.shape(), "coil maps");
  for (std::size_t i = 0; i < maps.front().size(); ++i) {
    double power = 0.0;
    for (const auto& c : maps) power += std::norm(c[i]);
    if (!(power > 0.0)) throw Error(ErrorCode::InvalidConfig, "coil maps have a dead pixel at " + std::to_string(i));
  }
}

std::size_t SamplingMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(sampled.begin(), sampled.end(), std::uint8_t{1}));
}

void SamplingMask::validate() const {
  if (shape.size() != 3) throw Error(ErrorCode::ShapeMismatch, "mask must be (N_x, N_y, N_t)");
  if (sampled.size() != shape_size(shape)) throw Error(ErrorCode::ShapeMismatch, "mask length mismatch");
  const std::size_t nt = shape[2];
  std::vector<std::size_t> per_frame(nt, 0);
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    if (sampled[i] > 1) throw Error(ErrorCode::InvalidConfig, "mask entries must be 0 or 1");
    per_frame[i % nt] += sampled[i];
  }
  for (std::size_t t = 0; t < nt; ++t) {
    if (per_frame[t] == 0) throw Error(ErrorCode::InvalidConfig, "frame " + std::to_string(t) + " has no samples");
  }
}

ComplexImage SamplingMask::to_image() const {
  ComplexImage out(shape);
  for (std::size_t i = 0; i < sampled.size(); ++i) out[i] = sampled[i] ? 1.0 : 0.0;
  return out;
}

SamplingMask SamplingMask::from_image(const ComplexImage& image) {
  SamplingMask mask{image.shape(), std::vector<std::uint8_t>(image.size())};
  for (std::size_t i = 0; i < image.size(); ++i) mask.sampled[i] = std::abs(image[i]) > 0.5 ? 1 : 0;
  return mask;
}

MaskFamily parse_mask_family(const std::string& name) {
  if (name == "full") return MaskFamily::Full;
  if (name == "lines") return MaskFamily::Lines;
  if (name == "points") return MaskFamily::Points;
  throw Error(ErrorCode::InvalidConfig, "unknown mask family '" + name + "'");
}

std::string to_string(MaskFamily family) {
  switch (family) {
    case MaskFamily::Full: return "full";
    case MaskFamily::Lines: return "lines";
    case MaskFamily::Points: return "points";
  }
  return "?";
}

SamplingMask make_sampling_mask(const Shape& shape, MaskFamily family, double acceleration, std::uint64_t seed) {
  if (shape.size() != 3) throw Error(ErrorCode::ShapeMismatch, "mask shape must be (N_x, N_y, N_t)");
  if (!(acceleration >= 1.0)) throw Error(ErrorCode::InvalidConfig, "acceleration must be >= 1");
  const std::size_t nx = shape[0], ny = shape[1], nt = shape[2];
  SamplingMask mask{shape, std::vector<std::uint8_t>(shape_size(shape), 0)};
  auto set = [&](std::size_t x, std::size_t y, std::size_t t) { mask.sampled[(x * ny + y) * nt + t] = 1; };

  if (family == MaskFamily::Full) {
    std::fill(mask.sampled.begin(), mask.sampled.end(), std::uint8_t{1});
    return mask;
  }

  std::mt19937_64 rng(seed);
  for (std::size_t t = 0; t < nt; ++t) {
    if (family == MaskFamily::Lines) {
      std::vector<double> radius(ny);
      for (std::size_t y = 0; y < ny; ++y) radius[y] = std::abs(centered(y, ny));
      const auto budget = static_cast<std::size_t>(std::lround(static_cast<double>(ny) / acceleration));
      for (std::size_t y : pick_variable_density(radius, std::max<std::size_t>(1, budget), ny / 4.0, rng)) {
        for (std::size_t x = 0; x < nx; ++x) set(x, y, t);
      }
    } else {
      std::vector<double> radius(nx * ny);
      for (std::size_t x = 0; x < nx; ++x) {
        for (std::size_t y = 0; y < ny; ++y) radius[x * ny + y] = std::hypot(centered(x, nx), centered(y, ny));
      }
      const auto budget = static_cast<std::size_t>(std::lround(static_cast<double>(nx * ny) / acceleration));
      const double width = std::min(nx, ny) / 4.0;
      for (std::size_t p : pick_variable_density(radius, std::max<std::size_t>(1, budget), width, rng)) {
        set(p / ny, p % ny, t);
      }
    }
  }
  return mask;
}

CoilMaps make_coil_maps(std::size_t nx, std::size_t ny, std::size_t count) {
  if (count == 0) throw Error(ErrorCode::InvalidConfig, "need at least one coil");
  CoilMaps coils;
  const double cx = (static_cast<double>(nx) - 1.0) / 2.0;
  const double cy = (static_cast<double>(ny) - 1.0) / 2.0;
  const double ring = 0.6 * std::max(nx, ny) / 2.0;
  const double width = 0.5 * std::max(nx, ny);
  for (std::size_t j = 0; j < count; ++j) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(count);
    const double px = cx + ring * std::cos(angle);
    const double py = cy + ring * std::sin(angle);
    ComplexImage map(Shape{nx, ny});
    for (std::size_t x = 0; x < nx; ++x) {
      for (std::size_t y = 0; y < ny; ++y) {
        const double dx = static_cast<double>(x) - px;
        const double dy = static_cast<double>(y) - py;
        const double mag = std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
        const double phase = angle + 0.5 * (static_cast<double>(x) - cx) / static_cast<double>(nx);
        map[x * ny + y] = std::polar(mag, phase);
      }
    }
    coils.maps.push_back(std::move(map));
  }
  if (count == 1) {
    for (auto& v : coils.maps[0].data()) v = 1.0;
    return coils;
  }
  for (std::size_t i = 0; i < nx * ny; ++i) {
    double power = 0.0;
    for (const auto& c : coils.maps) power += std::norm(c[i]);
    const double inv = 1.0 / std::sqrt(power);
    for (auto& c : coils.maps) c[i] *= inv;
  }
  return coils;
}

FourierOperator::FourierOperator(CoilMaps coils, SamplingMask mask) : coils_(std::move(coils)), mask_(std::move(mask)) {
  coils_.validate();
  mask_.validate();
  const Shape& cs = coils_.spatial_shape();
  if (cs[0] != mask_.shape[0] || cs[1] != mask_.shape[1]) {
    throw Error(ErrorCode::ShapeMismatch,
                "coil maps " + shape_string(cs) + " do not match mask " + shape_string(mask_.shape));
  }
  for (std::size_t i = 0; i < mask_.sampled.size(); ++i) {
    if (mask_.sampled[i]) sampled_.push_back(i);
  }
  scale_ = 1.0 / std::sqrt(static_cast<double>(cs[0] * cs[1]));
}

ComplexImage FourierOperator::coil_image(const ComplexImage& x, std::size_t coil) const {
  const auto& c = coils_.maps[coil];
  const std::size_t nt = mask_.shape[2];
  ComplexImage out(mask_.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c[i / nt] * x[i];
  return out;
}

void FourierOperator::accumulate_conj_coil(const ComplexImage& image, std::size_t coil, ComplexImage& acc) const {
  const auto& c = coils_.maps[coil];
  const std::size_t nt = mask_.shape[2];
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += std::conj(c[i / nt]) * image[i];
}

std::vector<Complex> FourierOperator::forward(const ComplexImage& x) const {
  check_same_shape(x.shape(), mask_.shape, "FourierOperator::forward");
  std::vector<Complex> y(data_size());
  for (std::size_t j = 0; j < coils_.count(); ++j) {
    auto k = coil_image(x, j);
    fft_inplace(k.data(), k.shape(), 2, FftDirection::Forward);
    Complex* out = y.data() + j * sampled_.size();
    for (std::size_t m = 0; m < sampled_.size(); ++m) out[m] = scale_ * k[sampled_[m]];
  }
  return y;
}

ComplexImage FourierOperator::adjoint(std::span<const Complex> y) const {
  if (y.size() != data_size()) {
    throw Error(ErrorCode::ShapeMismatch, "data length " + std::to_string(y.size()) + " but operator expects " +
                                              std::to_string(data_size()));
  }
  // Unitary inverse = sqrt(n) * (1/n-normalized inverse); the 1/n is applied
  // inside fft_inplace, so scatter with a factor of n * scale_ = 1 / scale_.
  const double gain = 1.0 / scale_;
  ComplexImage acc(mask_.shape);
  ComplexImage k(mask_.shape);
  for (std::size_t j = 0; j < coils_.count(); ++j) {
    std::fill(k.data().begin(), k.data().end(), Complex{});
    const Complex* in = y.data() + j * sampled_.size();
    for (std::size_t m = 0; m < sampled_.size(); ++m) k[sampled_[m]] = gain * in[m];
    fft_inplace(k.data(), k.shape(), 2, FftDirection::Inverse);
    accumulate_conj_coil(k, j, acc);
  }
  return acc;
}

ComplexImage FourierOperator::normal(const ComplexImage& x) const {
  check_same_shape(x.shape(), mask_.shape, "FourierOperator::normal");
  ComplexImage acc(mask_.shape);
  for (std::size_t j = 0; j < coils_.count(); ++j) {
    auto k = coil_image(x, j);
    fft_inplace(k.data(), k.shape(), 2, FftDirection::Forward);
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (!mask_.sampled[i]) k[i] = Complex{};
    }
    fft_inplace(k.data(), k.shape(), 2, FftDirection::Inverse);
    accumulate_conj_coil(k, j, acc);
  }
  return acc;
}

void KSpaceSample::validate() const {
  mask.validate();
  coils.validate();
  if (y.size() != coils.count() * mask.count()) {
    throw Error(ErrorCode::ShapeMismatch, "k-space data has " + std::to_string(y.size()) + " entries, expected " +
                                              std::to_string(coils.count() * mask.count()));
  }
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "noise sigma must be >= 0");
}

std::vector<Complex> forward_apply(const ComplexImage& x, const CoilMaps& coils, const SamplingMask& mask) {
  return FourierOperator(coils, mask).forward(x);
}

ComplexImage adjoint_apply(std::span<const Complex> y, const CoilMaps& coils, const SamplingMask& mask) {
  return FourierOperator(coils, mask).adjoint(y);
}

KSpaceSample simulate_measurement(const ComplexImage& x_truth, const CoilMaps& coils, const SamplingMask& mask,
                                  double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "noise sigma must be >= 0");
  KSpaceSample sample{forward_apply(x_truth, coils, mask), mask, coils, sigma, seed};
  if (sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& v : sample.y) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      v += Complex{sigma * re, sigma * im};
    }
  }
  return sample;
}

}  // namespace ucdl
