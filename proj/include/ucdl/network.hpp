#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "ucdl/csc_admm.hpp"
#include "ucdl/dc_cg.hpp"
#include "ucdl/operators.hpp"

namespace ucdl {

/// How the sparse-coding regularizer sees a dynamic image: one 3D volume with
/// 3D kernels, or N_t independent 2D frames with 2D kernels (the temporal
/// axis plays the role of a batch axis).
enum class RegularizationMode { Volume3D, PerFrame2D };

RegularizationMode parse_mode(const std::string& name);
std::string to_string(RegularizationMode mode);

struct NetworkConfig {
  int T = 4;        // outer iterations (0 is accepted and returns A^H y)
  int J = 1;        // ADMM sweeps per outer iteration
  int n_cg = kDefaultCgIterations;
  std::size_t K = 16;
  std::size_t kf = 7;
  RegularizationMode mode = RegularizationMode::Volume3D;
  bool train_filters = true;

  /// K = 16, k_f = 7 for 3D; K = 96, k_f = 9 for 2D.
  static NetworkConfig defaults_for(RegularizationMode mode);
  std::size_t kernel_rank() const noexcept { return mode == RegularizationMode::Volume3D ? 3 : 2; }
  Shape kernel_shape() const { return Shape(kernel_rank(), kf); }
  void validate() const;
};

void to_json(nlohmann::json& j, const NetworkConfig& c);
void from_json(const nlohmann::json& j, NetworkConfig& c);

/// Trainable quantities. lambda, alpha and beta are stored as logarithms so
/// that they stay positive under unconstrained updates. All outer
/// iterations share this single set.
struct NetworkParams {
  FilterBank filters;
  double log_lambda = 0.0;
  double log_alpha = 0.0;
  double log_beta = 0.0;

  double lambda() const { return std::exp(log_lambda); }
  double alpha() const { return std::exp(log_alpha); }
  double beta() const { return std::exp(log_beta); }
  AdmmConfig admm(int inner_iters) const { return {lambda(), alpha(), beta(), inner_iters}; }
  /// K * prod(kernel_shape) + 3
  std::size_t parameter_count() const { return filters.values.size() + 3; }
};

/// Kernels i.i.d. standard normal, each scaled to unit norm; lambda = alpha
/// = beta = 1.
NetworkParams init_network(const NetworkConfig& config, std::uint64_t seed);

/// d_k <- d_k / ||d_k||_2. Throws ZeroFilter for a vanishing kernel.
NetworkParams project_filters(NetworkParams params);

/// Throws InvalidConfig when the kernel rank does not fit the mode.
void check_compatible(const NetworkParams& params, const NetworkConfig& config);

/// (N_x, N_y, N_t) -> N_t images of (N_x, N_y), and back.
std::vector<ComplexImage> mode_2d_merge(const ComplexImage& x);
ComplexImage mode_2d_split(const std::vector<ComplexImage>& frames);

struct OuterIterationTrace {
  std::vector<std::vector<AdmmStepRecord>> admm;  // [batch item][inner step]
  ComplexImage approx;                            // sum_k d_k * s_k in image layout
  CgTrace cg;
};

/// Forward intermediates required by the reverse pass.
struct ForwardTrace {
  NetworkConfig config;
  std::shared_ptr<const FourierOperator> op;
  std::shared_ptr<const DictionarySpectrum> dict;
  AdmmConfig admm;
  std::vector<OuterIterationTrace> outer;
};

struct Reconstruction {
  ComplexImage image;
  std::vector<CodeState> codes;  // one per batch item (1 in 3D mode, N_t in 2D mode)
};

/// X_0 = A^H y, then T times: J ADMM sweeps on the code state followed by a
/// data-consistency CG solve warm-started at the current image. The code
/// state starts at zero and carries over between outer iterations.
Reconstruction reconstruct(const KSpaceSample& sample, const NetworkParams& params, const NetworkConfig& config,
                           ForwardTrace* trace = nullptr);

ComplexImage forward_reconstruct(const KSpaceSample& sample, const NetworkParams& params, const NetworkConfig& config,
                                 ForwardTrace* trace = nullptr);

/// Split an image into the regularizer's batch, and the inverse.
std::vector<ComplexImage> to_batch(const ComplexImage& x, RegularizationMode mode);
ComplexImage from_batch(const std::vector<ComplexImage>& batch, RegularizationMode mode);

/// (1/2)||A x - y||^2 + (lambda/2)||x - sum_k d_k * m_k||^2 + alpha sum_k ||m_k||_1
/// with the coefficient maps m taken per batch item from `maps`.
double reconstruction_objective(const KSpaceSample& sample, const ComplexImage& x,
                                const std::vector<std::vector<ComplexImage>>& maps, const NetworkParams& params,
                                const NetworkConfig& config);

/// JSON manifest plus a sibling tensor file holding the kernels with shape
/// (K, kernel dims...).
void save_checkpoint(const std::filesystem::path& manifest, const NetworkParams& params, const NetworkConfig& config);

struct Checkpoint {
  NetworkParams params;
  NetworkConfig config;
};
Checkpoint load_checkpoint(const std::filesystem::path& manifest);

}  // namespace ucdl
