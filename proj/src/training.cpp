#include "ucdl/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "ucdl/io.hpp"

namespace ucdl {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, std::uint64_t stream) {
  return splitmix64(splitmix64(base ^ (stream * 0xD1B54A32D192ED03ULL)) + index);
}

std::vector<ComplexImage> split_batch_like(const ComplexImage& x, RegularizationMode mode) {
  return to_batch(x, mode);
}

}  // namespace

double loss_mse(const ComplexImage& x_out, const ComplexImage& x_target) {
  check_same_shape(x_out.shape(), x_target.shape(), "loss_mse");
  return norm_squared(x_out - x_target);
}

ComplexImage loss_gradient(const ComplexImage& x_out, const ComplexImage& x_target) {
  check_same_shape(x_out.shape(), x_target.shape(), "loss_gradient");
  ComplexImage g = x_out - x_target;
  g *= 2.0;
  return g;
}

bool GradientSet::all_finite() const {
  auto ok = [](double v) { return std::isfinite(v); };
  return std::all_of(d_filters.begin(), d_filters.end(), ok) && ok(d_log_lambda) && ok(d_log_alpha) &&
         ok(d_log_beta);
}

std::vector<double> GradientSet::flatten() const {
  std::vector<double> out = d_filters;
  out.push_back(d_log_lambda);
  out.push_back(d_log_alpha);
  out.push_back(d_log_beta);
  return out;
}

GradientSet backward(const ForwardTrace& trace, const NetworkParams& params, const ComplexImage& x_bar) {
  const auto& config = trace.config;
  if (static_cast<int>(trace.outer.size()) != config.T) {
    throw Error(ErrorCode::TraceMismatch, "trace holds " + std::to_string(trace.outer.size()) +
                                              " outer iterations, config says " + std::to_string(config.T));
  }
  if (!trace.op) throw Error(ErrorCode::TraceMismatch, "trace has no operator");
  check_same_shape(x_bar.shape(), trace.op->image_shape(), "backward");

  GradientSet grads;
  grads.d_filters.assign(params.filters.values.size(), 0.0);
  if (config.T == 0) return grads;

  if (!trace.dict || trace.dict->count() != params.filters.count || trace.admm.lambda != params.lambda() ||
      trace.admm.alpha != params.alpha() || trace.admm.beta != params.beta() || trace.admm.inner_iters != config.J) {
    throw Error(ErrorCode::TraceMismatch, "parameters differ from the ones the trace was recorded with");
  }

  const auto& dict = *trace.dict;
  const auto& admm = trace.admm;
  const double lambda = admm.lambda;
  const LinearMap H = regularized_normal(*trace.op, lambda);
  const Shape& csc_shape = dict.image_shape();
  const std::size_t batch_size = trace.outer.front().admm.size();

  DictionaryGradient dgrad(dict);
  double lambda_bar = 0.0;
  std::vector<std::vector<ComplexImage>> u_bar(batch_size, std::vector<ComplexImage>(dict.count(), ComplexImage(csc_shape)));
  auto z_bar = u_bar;

  ComplexImage xb = x_bar;
  for (int t = config.T - 1; t >= 0; --t) {
    const auto& outer = trace.outer[static_cast<std::size_t>(t)];
    if (outer.admm.size() != batch_size) throw Error(ErrorCode::TraceMismatch, "batch size changed between iterations");

    // x_t = CG(B, H, x_{t-1}) with B = A^H y + lambda * approx
    const CgAdjoint cg = cg_solve_vjp(outer.cg, H, xb);
    lambda_bar += cg.lambda + real_inner(cg.rhs, outer.approx);
    ComplexImage approx_bar = lambda * cg.rhs;
    ComplexImage x_prev_bar = cg.x0;

    const auto approx_bar_batch = split_batch_like(approx_bar, config.mode);
    std::vector<ComplexImage> x_batch_bar(batch_size, ComplexImage(csc_shape));
    for (std::size_t b = 0; b < batch_size; ++b) {
      const auto& steps = outer.admm[b];
      if (static_cast<int>(steps.size()) != config.J) {
        throw Error(ErrorCode::TraceMismatch, "trace holds " + std::to_string(steps.size()) + " ADMM steps, config says " +
                                                  std::to_string(config.J));
      }
      const auto s_bar = synthesis_vjp(dict, steps.back().s_spectrum, approx_bar_batch[b], dgrad);
      for (int j = config.J - 1; j >= 0; --j) {
        admm_step_vjp(steps[static_cast<std::size_t>(j)], dict, admm, u_bar[b], z_bar[b],
                      j == config.J - 1 ? &s_bar : nullptr, x_batch_bar[b], dgrad);
      }
    }
    x_prev_bar += from_batch(x_batch_bar, config.mode);
    xb = std::move(x_prev_bar);
  }

  // gamma = beta / lambda, threshold = alpha / beta, all exp-parameterized.
  const double gamma = admm.gamma();
  const double tau = admm.threshold();
  grads.d_log_lambda = lambda_bar * lambda - dgrad.gamma * gamma;
  grads.d_log_beta = dgrad.gamma * gamma - dgrad.threshold * tau;
  grads.d_log_alpha = dgrad.threshold * tau;
  grads.d_filters = dgrad.kernel_gradient(params.filters.kernel_shape);

  if (!grads.all_finite()) throw Error(ErrorCode::NonFiniteValue, "gradient is not finite");
  return grads;
}

AdamState AdamState::for_params(const NetworkParams& params, double lr) {
  AdamState st;
  st.m.assign(params.parameter_count(), 0.0);
  st.v = st.m;
  st.lr = lr;
  return st;
}

NetworkParams adam_step(NetworkParams params, const GradientSet& grads, AdamState& state, bool update_filters) {
  const std::size_t n_filter = params.filters.values.size();
  if (grads.d_filters.size() != n_filter || state.m.size() != n_filter + 3 || state.v.size() != n_filter + 3) {
    throw Error(ErrorCode::ShapeMismatch, "Adam state, gradients and parameters disagree in size");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  auto update = [&](std::size_t i, double g, double& p) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    p -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  };

  if (update_filters) {
    for (std::size_t i = 0; i < n_filter; ++i) update(i, grads.d_filters[i], params.filters.values[i]);
  }
  update(n_filter, grads.d_log_lambda, params.log_lambda);
  update(n_filter + 1, grads.d_log_alpha, params.log_alpha);
  update(n_filter + 2, grads.d_log_beta, params.log_beta);

  if (update_filters) params = project_filters(std::move(params));
  return params;
}

void PhantomSpec::validate() const {
  if (shape.size() != 3) throw Error(ErrorCode::InvalidConfig, "phantom shape must be (N_x, N_y, N_t)");
  shape_size(shape);
  if (!(intensity_max >= intensity_min) || !(intensity_min >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "phantom intensity range is invalid");
  }
  if (!(motion_amplitude >= 0.0 && motion_amplitude < 0.5) || !(motion_period > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "phantom motion must have amplitude in [0, 0.5) and positive period");
  }
}

void to_json(nlohmann::json& j, const PhantomSpec& s) {
  j = nlohmann::json{{"shape", s.shape},
                     {"ellipse_count", s.ellipse_count},
                     {"motion_amplitude", s.motion_amplitude},
                     {"motion_period", s.motion_period},
                     {"intensity_min", s.intensity_min},
                     {"intensity_max", s.intensity_max},
                     {"phase_amplitude", s.phase_amplitude},
                     {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, PhantomSpec& s) {
  s.shape = j.at("shape").get<Shape>();
  s.ellipse_count = j.value("ellipse_count", s.ellipse_count);
  s.motion_amplitude = j.value("motion_amplitude", s.motion_amplitude);
  s.motion_period = j.value("motion_period", s.motion_period);
  s.intensity_min = j.value("intensity_min", s.intensity_min);
  s.intensity_max = j.value("intensity_max", s.intensity_max);
  s.phase_amplitude = j.value("phase_amplitude", s.phase_amplitude);
  s.seed = j.value("seed", s.seed);
}

ComplexImage make_phantom(const PhantomSpec& spec) {
  spec.validate();
  const std::size_t nx = spec.shape[0], ny = spec.shape[1], nt = spec.shape[2];
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  struct Ellipse {
    double cx, cy, a, b, angle, value, motion_phase;
  };
  const double lo = spec.intensity_min, hi = spec.intensity_max;
  Ellipse body{uniform(-0.03, 0.03), uniform(-0.03, 0.03), uniform(0.8, 0.9), uniform(0.65, 0.75),
               uniform(-0.2, 0.2),   uniform(lo, 0.5 * (lo + hi)), 0.0};
  std::vector<Ellipse> inner;
  for (std::size_t e = 0; e < spec.ellipse_count; ++e) {
    const double r = uniform(0.0, 0.35);
    const double theta = uniform(0.0, 2.0 * std::numbers::pi);
    inner.push_back({r * std::cos(theta), r * std::sin(theta), uniform(0.1, 0.3), uniform(0.1, 0.3),
                     uniform(0.0, std::numbers::pi), uniform(lo, hi), uniform(0.0, 2.0 * std::numbers::pi)});
  }
  const double p0 = uniform(-1.0, 1.0), p1 = uniform(-1.0, 1.0), p2 = uniform(-1.0, 1.0);

  auto inside = [](const Ellipse& e, double u, double v, double scale) {
    const double du = u - e.cx, dv = v - e.cy;
    const double c = std::cos(e.angle), s = std::sin(e.angle);
    const double pu = (c * du + s * dv) / (e.a * scale);
    const double pv = (-s * du + c * dv) / (e.b * scale);
    return pu * pu + pv * pv <= 1.0;
  };

  ComplexImage x(spec.shape);
  for (std::size_t i = 0; i < nx; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / (0.5 * static_cast<double>(nx)) - 1.0;
    for (std::size_t j = 0; j < ny; ++j) {
      const double v = (static_cast<double>(j) + 0.5) / (0.5 * static_cast<double>(ny)) - 1.0;
      const double phase = spec.phase_amplitude * (p0 + p1 * u + p2 * v) / 3.0;
      const Complex rot = std::polar(1.0, phase);
      for (std::size_t t = 0; t < nt; ++t) {
        double value = inside(body, u, v, 1.0) ? body.value : 0.0;
        for (const auto& e : inner) {
          const double scale =
              1.0 + spec.motion_amplitude *
                        std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / spec.motion_period + e.motion_phase);
          if (inside(e, u, v, scale)) value = e.value;
        }
        x[(i * ny + j) * nt + t] = value * rot;
      }
    }
  }
  return x;
}

void to_json(nlohmann::json& j, const DatasetSpec& s) {
  j = nlohmann::json{{"phantom", s.phantom},
                     {"coils", s.coils},
                     {"mask_family", to_string(s.mask_family)},
                     {"acceleration", s.acceleration},
                     {"sigma", s.sigma}};
}

void from_json(const nlohmann::json& j, DatasetSpec& s) {
  s.phantom = j.at("phantom").get<PhantomSpec>();
  s.coils = j.value("coils", s.coils);
  s.mask_family = parse_mask_family(j.value("mask_family", to_string(s.mask_family)));
  s.acceleration = j.value("acceleration", s.acceleration);
  s.sigma = j.value("sigma", s.sigma);
}

std::vector<TrainingPair> synth_dataset(const DatasetSpec& spec, std::size_t n_samples, std::size_t first_index) {
  spec.phantom.validate();
  const auto& shape = spec.phantom.shape;
  const CoilMaps coils = make_coil_maps(shape[0], shape[1], spec.coils);
  std::vector<TrainingPair> out;
  out.reserve(n_samples);
  for (std::size_t i = first_index; i < first_index + n_samples; ++i) {
    PhantomSpec ps = spec.phantom;
    ps.seed = derive_seed(spec.phantom.seed, i, 1);
    ComplexImage target = make_phantom(ps);
    const auto mask = make_sampling_mask(shape, spec.mask_family, spec.acceleration, derive_seed(spec.phantom.seed, i, 2));
    auto sample = simulate_measurement(target, coils, mask, spec.sigma, derive_seed(spec.phantom.seed, i, 3));
    out.push_back({std::move(sample), std::move(target)});
  }
  return out;
}

void save_sample(const std::filesystem::path& dir, const TrainingPair& pair) {
  std::filesystem::create_directories(dir);
  const auto& s = pair.sample;
  s.validate();
  io::write_tensor(dir / "target.ucdl", pair.target);
  io::write_tensor(dir / "kspace.ucdl", ComplexImage(Shape{s.coils.count(), s.mask.count()}, s.y));
  io::write_tensor(dir / "mask.ucdl", s.mask.to_image());
  const Shape& cs = s.coils.spatial_shape();
  std::vector<Complex> coil_values;
  for (const auto& c : s.coils.maps) coil_values.insert(coil_values.end(), c.data().begin(), c.data().end());
  io::write_tensor(dir / "coils.ucdl", ComplexImage(Shape{s.coils.count(), cs[0], cs[1]}, std::move(coil_values)));
  nlohmann::json j{{"kspace", "kspace.ucdl"}, {"mask", "mask.ucdl"}, {"coils", "coils.ucdl"},
                   {"target", "target.ucdl"}, {"sigma", s.noise_sigma}, {"seed", s.seed}};
  io::write_text(dir / "sample.json", j.dump(2) + "\n");
}

TrainingPair load_sample(const std::filesystem::path& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(dir / "sample.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, (dir / "sample.json").string() + ": " + e.what());
  }
  TrainingPair pair;
  pair.target = io::read_tensor(dir / j.value("target", "target.ucdl"));
  pair.sample.mask = SamplingMask::from_image(io::read_tensor(dir / j.at("mask").get<std::string>()));
  const auto coils = io::read_tensor(dir / j.at("coils").get<std::string>());
  if (coils.ndim() != 3) throw Error(ErrorCode::Io, "coil tensor must be (N_c, N_x, N_y)");
  const std::size_t nc = coils.shape()[0], plane = coils.shape()[1] * coils.shape()[2];
  for (std::size_t c = 0; c < nc; ++c) {
    std::vector<Complex> v(coils.data().begin() + static_cast<std::ptrdiff_t>(c * plane),
                           coils.data().begin() + static_cast<std::ptrdiff_t>((c + 1) * plane));
    pair.sample.coils.maps.emplace_back(Shape{coils.shape()[1], coils.shape()[2]}, std::move(v));
  }
  pair.sample.y = io::read_tensor(dir / j.at("kspace").get<std::string>()).vector();
  pair.sample.noise_sigma = j.value("sigma", 0.0);
  pair.sample.seed = j.value("seed", std::uint64_t{0});
  pair.sample.validate();
  return pair;
}

void save_samples(const std::filesystem::path& dir, const std::vector<TrainingPair>& pairs) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%04zu", i);
    save_sample(dir / name, pairs[i]);
  }
}

std::vector<TrainingPair> load_samples(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::Io, dir.string() + " is not a directory");
  std::vector<std::filesystem::path> entries;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_directory() && std::filesystem::exists(e.path() / "sample.json")) entries.push_back(e.path());
  }
  std::sort(entries.begin(), entries.end());
  std::vector<TrainingPair> out;
  out.reserve(entries.size());
  for (const auto& p : entries) out.push_back(load_sample(p));
  return out;
}

double mean_loss(const std::vector<TrainingPair>& data, const NetworkParams& params, const NetworkConfig& config) {
  if (data.empty()) throw Error(ErrorCode::InvalidConfig, "empty dataset");
  double acc = 0.0;
  for (const auto& pair : data) acc += loss_mse(forward_reconstruct(pair.sample, params, config), pair.target);
  return acc / static_cast<double>(data.size());
}

std::string format_losses_csv(const std::vector<EpochLoss>& log) {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss\n";
  char line[128];
  for (const auto& row : log) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", row.epoch, row.train_loss, row.val_loss);
    os << line;
  }
  return os.str();
}

TrainResult train(const std::vector<TrainingPair>& train_set, const std::vector<TrainingPair>& val_set,
                  const NetworkConfig& config, const TrainOptions& options, std::optional<NetworkParams> initial) {
  if (train_set.empty() || val_set.empty()) throw Error(ErrorCode::InvalidConfig, "training needs nonempty datasets");
  if (options.epochs < 0) throw Error(ErrorCode::InvalidConfig, "epochs must be >= 0");
  config.validate();

  TrainResult result;
  result.params = initial ? std::move(*initial) : init_network(config, options.seed);
  check_compatible(result.params, config);
  AdamState adam = AdamState::for_params(result.params, options.lr);

  std::filesystem::path ckpt_dir;
  if (options.run_dir) {
    ckpt_dir = *options.run_dir / "checkpoints";
    std::filesystem::create_directories(ckpt_dir);
    nlohmann::json cfg{{"network", config},
                       {"optimizer", {{"name", "adam"}, {"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2},
                                      {"eps", adam.eps}, {"batch_size", 1}}},
                       {"epochs", options.epochs},
                       {"seed", options.seed},
                       {"train_samples", train_set.size()},
                       {"val_samples", val_set.size()}};
    io::write_text(*options.run_dir / "config.json", cfg.dump(2) + "\n");
  }

  auto checkpoint = [&](int epoch) {
    if (!options.run_dir) return;
    char name[48];
    std::snprintf(name, sizeof name, "epoch_%03d.json", epoch);
    save_checkpoint(ckpt_dir / name, result.params, config);
    io::write_text(*options.run_dir / "losses.csv", format_losses_csv(result.log));
  };
  auto check_loss = [](double loss, const char* what) {
    if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteValue, std::string("non-finite ") + what + " loss");
  };

  const double initial_train = mean_loss(train_set, result.params, config);
  const double initial_val = mean_loss(val_set, result.params, config);
  check_loss(initial_train, "training");
  check_loss(initial_val, "validation");
  result.log.push_back({0, initial_train, initial_val});
  checkpoint(0);

  std::mt19937_64 shuffle_rng(derive_seed(options.seed, 0, 7));
  std::vector<std::size_t> order(train_set.size());
  std::int64_t step = 0;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const auto& pair = train_set[idx];
      ForwardTrace trace;
      const ComplexImage out = forward_reconstruct(pair.sample, result.params, config, &trace);
      const double loss = loss_mse(out, pair.target);
      check_loss(loss, "training");
      epoch_loss += loss;
      GradientSet grads = backward(trace, result.params, loss_gradient(out, pair.target));
      result.params = adam_step(std::move(result.params), grads, adam, config.train_filters);
      ++step;
      if (options.on_step) options.on_step(step, result.params);
    }
    const double val = mean_loss(val_set, result.params, config);
    check_loss(val, "validation");
    result.log.push_back({epoch, epoch_loss / static_cast<double>(train_set.size()), val});
    checkpoint(epoch);
  }
  return result;
}

}  // namespace ucdl
