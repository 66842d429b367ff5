#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <json.hpp>

#include "ucdl/network.hpp"
#include "ucdl/operators.hpp"

namespace ucdl {

/// ||x_out - x_target||^2 over both channels of every pixel.
double loss_mse(const ComplexImage& x_out, const ComplexImage& x_target);

/// 2 (x_out - x_target), the gradient of loss_mse in the (d/dRe + i d/dIm)
/// convention used by every adjoint in the library.
ComplexImage loss_gradient(const ComplexImage& x_out, const ComplexImage& x_target);

struct GradientSet {
  std::vector<double> d_filters;  // same layout as FilterBank::values
  double d_log_lambda = 0.0;
  double d_log_alpha = 0.0;
  double d_log_beta = 0.0;

  bool all_finite() const;
  /// Flattened as filters, log_lambda, log_alpha, log_beta.
  std::vector<double> flatten() const;
};

/// Reverse-mode gradient of params -> <x_bar, forward_reconstruct(...)>
/// through every recorded ADMM step (Sherman-Morrison solve, soft threshold
/// with zero derivative at the kink, dual update), every CG iteration and the
/// exponential parameterization of lambda, alpha and beta.
/// Throws TraceMismatch if `params` is not the set the trace was recorded
/// with and NonFiniteValue if the result is not finite.
GradientSet backward(const ForwardTrace& trace, const NetworkParams& params, const ComplexImage& x_bar);

inline constexpr double kDefaultLearningRate = 5e-4;

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  double lr = kDefaultLearningRate;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const NetworkParams& params, double lr = kDefaultLearningRate);
};

/// One bias-corrected Adam update followed by projection of the kernels onto
/// the unit sphere. With `update_filters` false the kernels, their moments
/// and their projection are left untouched, so frozen filters stay
/// bit-identical.
NetworkParams adam_step(NetworkParams params, const GradientSet& grads, AdamState& state, bool update_filters = true);

/// Dynamic ellipse phantom: a static body ellipse holding `ellipse_count`
/// inner ellipses whose axes pulse periodically over the frames, with a mild
/// smooth random phase.
struct PhantomSpec {
  Shape shape{32, 32, 8};
  std::size_t ellipse_count = 4;
  double motion_amplitude = 0.15;  // relative change of the inner axes
  double motion_period = 8.0;      // frames per cycle
  double intensity_min = 0.2;
  double intensity_max = 1.0;
  double phase_amplitude = 0.3;    // radians
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const PhantomSpec& s);
void from_json(const nlohmann::json& j, PhantomSpec& s);

ComplexImage make_phantom(const PhantomSpec& spec);

struct TrainingPair {
  KSpaceSample sample;
  ComplexImage target;
};

struct DatasetSpec {
  PhantomSpec phantom;
  std::size_t coils = 4;
  MaskFamily mask_family = MaskFamily::Lines;
  double acceleration = 4.0;
  double sigma = kDefaultNoiseSigma;
};

void to_json(nlohmann::json& j, const DatasetSpec& s);
void from_json(const nlohmann::json& j, DatasetSpec& s);

/// n seeded (measurement, target) pairs. Sample i draws its phantom, mask and
/// noise from seeds derived from (spec.phantom.seed, first_index + i).
std::vector<TrainingPair> synth_dataset(const DatasetSpec& spec, std::size_t n_samples, std::size_t first_index = 0);

/// One directory per sample holding target, k-space, mask and coil tensors
/// plus a JSON sidecar.
void save_samples(const std::filesystem::path& dir, const std::vector<TrainingPair>& pairs);
std::vector<TrainingPair> load_samples(const std::filesystem::path& dir);
void save_sample(const std::filesystem::path& dir, const TrainingPair& pair);
TrainingPair load_sample(const std::filesystem::path& dir);

struct EpochLoss {
  int epoch = 0;  // 0 = before any update
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainOptions {
  int epochs = 16;
  double lr = kDefaultLearningRate;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> run_dir;
  /// Called after every optimizer step with the 1-based step index.
  std::function<void(std::int64_t, const NetworkParams&)> on_step;
};

struct TrainResult {
  NetworkParams params;
  std::vector<EpochLoss> log;
};

/// Mean loss_mse of the network output over a dataset.
double mean_loss(const std::vector<TrainingPair>& data, const NetworkParams& params, const NetworkConfig& config);

/// Per-sample forward, backward and Adam step over a seeded shuffle of the
/// training set each epoch. Losses are logged per epoch (row 0 before
/// training). With config.train_filters false only lambda, alpha and beta
/// are updated. Aborts with NonFiniteValue on a non-finite loss.
TrainResult train(const std::vector<TrainingPair>& train_set, const std::vector<TrainingPair>& val_set,
                  const NetworkConfig& config, const TrainOptions& options,
                  std::optional<NetworkParams> initial = std::nullopt);

std::string format_losses_csv(const std::vector<EpochLoss>& log);

}  // namespace ucdl
