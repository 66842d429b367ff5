#pragma once

#include <functional>
#include <vector>

#include "ucdl/csc_admm.hpp"
#include "ucdl/operators.hpp"
#include "ucdl/tensor.hpp"

namespace ucdl {

inline constexpr int kDefaultCgIterations = 12;

struct DcConfig {
  double lambda = 1.0;
  int n_cg = kDefaultCgIterations;
  /// Stop once ||r|| / ||r_0|| falls to this value; 0 keeps the iteration
  /// count fixed.
  double residual_tol = 0.0;

  void validate() const;
};

/// A self-adjoint positive definite map on images.
using LinearMap = std::function<ComplexImage(const ComplexImage&)>;

/// H = A^H A + lambda I for a Fourier operator.
LinearMap regularized_normal(const FourierOperator& op, double lambda);

/// Everything the reverse pass of cg_solve needs. Index i runs over executed
/// iterations; `residual` has one more entry than the others.
struct CgTrace {
  ComplexImage x0;
  std::vector<ComplexImage> residual;    // r_0 .. r_n
  std::vector<ComplexImage> direction;   // p_0 .. p_{n-1}
  std::vector<ComplexImage> h_direction; // H p_i
  std::vector<double> rho;               // <r_i, r_i>, size n + 1
  std::vector<double> curvature;         // <p_i, H p_i>
  std::vector<double> step;              // a_i
  std::vector<double> momentum;          // b_i
  int iterations() const noexcept { return static_cast<int>(step.size()); }
};

/// B = A^H y + lambda * approx
ComplexImage build_rhs(const KSpaceSample& sample, const ComplexImage& approx, double lambda);
ComplexImage build_rhs(const FourierOperator& op, const std::vector<Complex>& y, const ComplexImage& approx,
                       double lambda);

/// Conjugate gradients on H x = rhs from x0, run for exactly n_cg iterations
/// unless the early-exit tolerance is enabled or the residual vanishes
/// exactly. Real inner products Re<a, b> are used throughout, i.e. CG on
/// the two-channel real view. `residual_norms`, if given, receives ||r_i||.
/// Throws NonFiniteValue when an iterate stops being finite.
ComplexImage cg_solve(const ComplexImage& rhs, const LinearMap& H, const ComplexImage& x0, const DcConfig& config,
                      CgTrace* trace = nullptr, std::vector<double>* residual_norms = nullptr);

/// Adjoints produced by cg_solve_vjp.
struct CgAdjoint {
  ComplexImage rhs;
  ComplexImage x0;
  double lambda = 0.0;  // derivative through H = G + lambda I
};

/// Reverse pass through the recorded CG iterations for H = G + lambda I.
CgAdjoint cg_solve_vjp(const CgTrace& trace, const LinearMap& H, const ComplexImage& x_bar);

/// One data-consistency block: synthesize sum_k d_k * s_k from the current
/// code maps, build the right-hand side and run CG warm-started at `x_prev`.
ComplexImage dc_step(const KSpaceSample& sample, const CodeState& state, const FilterBank& filters,
                     const ComplexImage& x_prev, const DcConfig& config);

/// (1/2)||A x - y||^2 + (lambda/2)||x - approx||^2
double dc_objective(const FourierOperator& op, const std::vector<Complex>& y, const ComplexImage& x,
                    const ComplexImage& approx, double lambda);

}  // namespace ucdl
