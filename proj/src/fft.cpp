#include "ucdl/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace ucdl {
namespace {

// FFTW planning is not thread safe, execution of an existing plan is. Plans
// are created once per (shape, axes, direction) and kept for the lifetime of
// the process. FFTW_UNALIGNED keeps a plan valid (and its codelet choice
// fixed) for any buffer, which makes results independent of allocation
// alignment.
class PlanCache {
 public:
  using Key = std::tuple<Shape, std::size_t, int>;

  fftw_plan get(const Shape& shape, std::size_t axes, FftDirection dir) {
    Key key{shape, axes, dir == FftDirection::Forward ? FFTW_FORWARD : FFTW_BACKWARD};
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;

    std::vector<int> n(shape.begin(), shape.begin() + static_cast<std::ptrdiff_t>(axes));
    int batch = 1;
    for (std::size_t i = axes; i < shape.size(); ++i) batch *= static_cast<int>(shape[i]);
    const std::size_t total = shape_size(shape);

    auto* buffer = fftw_alloc_complex(total);
    fftw_plan plan = fftw_plan_many_dft(static_cast<int>(axes), n.data(), batch, buffer, nullptr, batch, 1, buffer,
                                        nullptr, batch, 1, std::get<2>(key), FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buffer);
    if (plan == nullptr) throw Error(ErrorCode::InvalidConfig, "FFTW could not plan shape " + shape_string(shape));
    plans_.emplace(std::move(key), plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<Key, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

void fft_inplace(std::span<Complex> data, const Shape& shape, std::size_t transform_axes, FftDirection dir) {
  if (transform_axes == 0 || transform_axes > shape.size()) {
    throw Error(ErrorCode::ShapeMismatch, "cannot transform " + std::to_string(transform_axes) + " axes of " +
                                              shape_string(shape));
  }
  if (data.size() != shape_size(shape)) throw Error(ErrorCode::ShapeMismatch, "fft buffer length mismatch");

  fftw_plan plan = plan_cache().get(shape, transform_axes, dir);
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, buf, buf);

  if (dir == FftDirection::Inverse) {
    std::size_t n = 1;
    for (std::size_t i = 0; i < transform_axes; ++i) n *= shape[i];
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : data) v *= scale;
  }
}

SpectralTensor dft_forward(const ComplexImage& x) {
  auto out = x.as<FrequencyDomain>();
  fft_inplace(out.data(), out.shape(), out.ndim(), FftDirection::Forward);
  return out;
}

ComplexImage dft_inverse(const SpectralTensor& X) {
  auto out = X.as<SpatialDomain>();
  fft_inplace(out.data(), out.shape(), out.ndim(), FftDirection::Inverse);
  return out;
}

}  // namespace ucdl
