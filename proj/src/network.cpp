#include "ucdl/network.hpp"

#include <cmath>
#include <random>

#include "ucdl/fft.hpp"
#include "ucdl/io.hpp"

namespace ucdl {

RegularizationMode parse_mode(const std::string& name) {
  if (name == "3d") return RegularizationMode::Volume3D;
  if (name == "2d") return RegularizationMode::PerFrame2D;
  throw Error(ErrorCode::InvalidConfig, "mode must be '2d' or '3d', got '" + name + "'");
}

std::string to_string(RegularizationMode mode) {
  return mode == RegularizationMode::Volume3D ? "3d" : "2d";
}

NetworkConfig NetworkConfig::defaults_for(RegularizationMode mode) {
  NetworkConfig c;
  c.mode = mode;
  if (mode == RegularizationMode::PerFrame2D) {
    c.K = 96;
    c.kf = 9;
  } else {
    c.K = 16;
    c.kf = 7;
  }
  return c;
}

void NetworkConfig::validate() const {
  if (T < 0) throw Error(ErrorCode::InvalidConfig, "T must be >= 0");
  if (J < 1) throw Error(ErrorCode::InvalidConfig, "J must be >= 1");
  if (n_cg < 1) throw Error(ErrorCode::InvalidConfig, "n_cg must be >= 1");
  if (K < 1 || kf < 1) throw Error(ErrorCode::InvalidConfig, "K and k_f must be >= 1");
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = nlohmann::json{{"T", c.T},   {"J", c.J},   {"n_cg", c.n_cg},           {"K", c.K},
                     {"kf", c.kf}, {"mode", to_string(c.mode)}, {"train_filters", c.train_filters}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("T")) c.T = j.at("T").get<int>();
  if (j.contains("J")) c.J = j.at("J").get<int>();
  if (j.contains("n_cg")) c.n_cg = j.at("n_cg").get<int>();
  if (j.contains("K")) c.K = j.at("K").get<std::size_t>();
  if (j.contains("kf")) c.kf = j.at("kf").get<std::size_t>();
  if (j.contains("train_filters")) c.train_filters = j.at("train_filters").get<bool>();
}

NetworkParams init_network(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  NetworkParams params;
  params.filters = FilterBank(config.K, config.kernel_shape());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (double& v : params.filters.values) v = gauss(rng);
  return project_filters(std::move(params));
}

NetworkParams project_filters(NetworkParams params) {
  auto& bank = params.filters;
  for (std::size_t k = 0; k < bank.count; ++k) {
    const double n = bank.kernel_norm(k);
    if (!(n >= 1e-30)) throw Error(ErrorCode::ZeroFilter, "kernel " + std::to_string(k) + " has norm " + std::to_string(n));
    for (double& v : bank.kernel_values(k)) v /= n;
  }
  return params;
}

void check_compatible(const NetworkParams& params, const NetworkConfig& config) {
  config.validate();
  params.filters.validate();
  if (params.filters.kernel_shape.size() != config.kernel_rank()) {
    throw Error(ErrorCode::InvalidConfig, "mode " + to_string(config.mode) + " needs rank-" +
                                              std::to_string(config.kernel_rank()) + " kernels, got " +
                                              shape_string(params.filters.kernel_shape));
  }
}

std::vector<ComplexImage> mode_2d_merge(const ComplexImage& x) {
  if (x.ndim() != 3) throw Error(ErrorCode::ShapeMismatch, "mode_2d_merge expects (N_x, N_y, N_t), got " + shape_string(x.shape()));
  const std::size_t nx = x.shape()[0], ny = x.shape()[1], nt = x.shape()[2];
  std::vector<ComplexImage> frames(nt, ComplexImage(Shape{nx, ny}));
  for (std::size_t p = 0; p < nx * ny; ++p) {
    for (std::size_t t = 0; t < nt; ++t) frames[t][p] = x[p * nt + t];
  }
  return frames;
}

ComplexImage mode_2d_split(const std::vector<ComplexImage>& frames) {
  if (frames.empty()) throw Error(ErrorCode::ShapeMismatch, "mode_2d_split: no frames");
  const Shape& fs = frames.front().shape();
  if (fs.size() != 2) throw Error(ErrorCode::ShapeMismatch, "mode_2d_split expects 2D frames");
  for (const auto& f : frames) check_same_shape(f.shape(), fs, "mode_2d_split");
  const std::size_t nt = frames.size();
  ComplexImage x(Shape{fs[0], fs[1], nt});
  for (std::size_t p = 0; p < fs[0] * fs[1]; ++p) {
    for (std::size_t t = 0; t < nt; ++t) x[p * nt + t] = frames[t][p];
  }
  return x;
}

std::vector<ComplexImage> to_batch(const ComplexImage& x, RegularizationMode mode) {
  if (mode == RegularizationMode::PerFrame2D) return mode_2d_merge(x);
  return {x};
}

ComplexImage from_batch(const std::vector<ComplexImage>& batch, RegularizationMode mode) {
  if (mode == RegularizationMode::PerFrame2D) return mode_2d_split(batch);
  if (batch.size() != 1) throw Error(ErrorCode::ShapeMismatch, "3D mode works on a single volume");
  return batch.front();
}

Reconstruction reconstruct(const KSpaceSample& sample, const NetworkParams& params, const NetworkConfig& config,
                           ForwardTrace* trace) {
  config.validate();
  sample.validate();
  auto op = std::make_shared<const FourierOperator>(sample.op());
  const ComplexImage aty = op->adjoint(sample.y);

  Reconstruction result{aty, {}};
  if (config.T == 0) {
    if (trace != nullptr) *trace = ForwardTrace{config, op, nullptr, {}, {}};
    return result;
  }
  check_compatible(params, config);

  const Shape& image_shape = op->image_shape();
  const Shape csc_shape = to_batch(ComplexImage(image_shape), config.mode).front().shape();
  auto dict = std::make_shared<const DictionarySpectrum>(params.filters, csc_shape);
  const AdmmConfig admm = params.admm(config.J);
  const DcConfig dc{params.lambda(), config.n_cg, 0.0};
  const LinearMap H = regularized_normal(*op, dc.lambda);

  if (trace != nullptr) {
    *trace = ForwardTrace{config, op, dict, admm, {}};
    trace->outer.reserve(static_cast<std::size_t>(config.T));
  }

  ComplexImage& x = result.image;
  std::size_t batch_size = to_batch(x, config.mode).size();
  result.codes.assign(batch_size, CodeState::zeros(dict->count(), csc_shape));

  for (int t = 0; t < config.T; ++t) {
    OuterIterationTrace outer;
    outer.admm.resize(batch_size);
    const auto batch = to_batch(x, config.mode);
    std::vector<ComplexImage> approx_batch;
    approx_batch.reserve(batch_size);
    for (std::size_t b = 0; b < batch_size; ++b) {
      AdmmStepRecord last;
      for (int j = 0; j < config.J; ++j) {
        AdmmStepRecord rec;
        result.codes[b] = admm_step(batch[b], result.codes[b], *dict, admm, &rec);
        if (trace != nullptr) {
          outer.admm[b].push_back(std::move(rec));
        } else if (j + 1 == config.J) {
          last = std::move(rec);
        }
      }
      const auto& s_spectrum = trace != nullptr ? outer.admm[b].back().s_spectrum : last.s_spectrum;
      approx_batch.push_back(dft_inverse(synthesize_spectrum(*dict, s_spectrum)));
    }
    ComplexImage approx = from_batch(approx_batch, config.mode);

    ComplexImage rhs = aty;
    axpy(dc.lambda, approx, rhs);
    try {
      x = cg_solve(rhs, H, x, dc, trace != nullptr ? &outer.cg : nullptr);
    } catch (const Error& e) {
      throw Error(e.code(), "outer iteration " + std::to_string(t) + ": " + e.what());
    }
    if (!all_finite(x)) {
      throw Error(ErrorCode::NonFiniteValue, "reconstruction diverged at outer iteration " + std::to_string(t));
    }
    if (trace != nullptr) {
      outer.approx = std::move(approx);
      trace->outer.push_back(std::move(outer));
    }
  }
  return result;
}

ComplexImage forward_reconstruct(const KSpaceSample& sample, const NetworkParams& params, const NetworkConfig& config,
                                 ForwardTrace* trace) {
  return reconstruct(sample, params, config, trace).image;
}

double reconstruction_objective(const KSpaceSample& sample, const ComplexImage& x,
                                const std::vector<std::vector<ComplexImage>>& maps, const NetworkParams& params,
                                const NetworkConfig& config) {
  check_compatible(params, config);
  const auto op = sample.op();
  const auto batch = to_batch(x, config.mode);
  if (maps.size() != batch.size()) throw Error(ErrorCode::ShapeMismatch, "one map set per batch item expected");
  const DictionarySpectrum dict(params.filters, batch.front().shape());
  std::vector<ComplexImage> approx;
  double l1 = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    approx.push_back(dictionary_synthesis(dict, maps[b]));
    for (const auto& m : maps[b]) l1 += l1_norm(m);
  }
  return dc_objective(op, sample.y, x, from_batch(approx, config.mode), params.lambda()) + params.alpha() * l1;
}

void save_checkpoint(const std::filesystem::path& manifest, const NetworkParams& params, const NetworkConfig& config) {
  const auto& bank = params.filters;
  bank.validate();
  Shape dims{bank.count};
  dims.insert(dims.end(), bank.kernel_shape.begin(), bank.kernel_shape.end());
  ComplexImage kernels(dims);
  for (std::size_t i = 0; i < bank.values.size(); ++i) kernels[i] = bank.values[i];

  auto tensor_path = manifest;
  tensor_path.replace_extension(".filters.ucdl");
  io::write_tensor(tensor_path, kernels);

  nlohmann::json j;
  j["format"] = "ucdl-checkpoint";
  j["version"] = 1;
  j["config"] = config;
  j["log_lambda"] = params.log_lambda;
  j["log_alpha"] = params.log_alpha;
  j["log_beta"] = params.log_beta;
  j["filters"] = tensor_path.filename().string();
  io::write_text(manifest, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& manifest) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, manifest.string() + ": " + e.what());
  }
  if (j.value("format", "") != "ucdl-checkpoint") throw Error(ErrorCode::Io, manifest.string() + " is not a checkpoint");

  Checkpoint ck;
  ck.config = j.at("config").get<NetworkConfig>();
  ck.params.log_lambda = j.at("log_lambda").get<double>();
  ck.params.log_alpha = j.at("log_alpha").get<double>();
  ck.params.log_beta = j.at("log_beta").get<double>();

  const auto kernels = io::read_tensor(manifest.parent_path() / j.at("filters").get<std::string>());
  const Shape& dims = kernels.shape();
  if (dims.size() < 2) throw Error(ErrorCode::Io, "filter tensor must have shape (K, kernel dims...)");
  std::vector<double> values(kernels.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = kernels[i].real();
  ck.params.filters = FilterBank(dims[0], Shape(dims.begin() + 1, dims.end()), std::move(values));
  return ck;
}

}  // namespace ucdl
