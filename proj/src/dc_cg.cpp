#include "ucdl/dc_cg.hpp"

#include <cmath>

namespace ucdl {

void DcConfig::validate() const {
  if (!(lambda >= 0.0) || n_cg < 1 || !(residual_tol >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "data consistency needs lambda >= 0, n_cg >= 1 and residual_tol >= 0");
  }
}

LinearMap regularized_normal(const FourierOperator& op, double lambda) {
  return [&op, lambda](const ComplexImage& x) {
    ComplexImage out = op.normal(x);
    axpy(lambda, x, out);
    return out;
  };
}

ComplexImage build_rhs(const FourierOperator& op, const std::vector<Complex>& y, const ComplexImage& approx,
                       double lambda) {
  check_same_shape(approx.shape(), op.image_shape(), "build_rhs");
  ComplexImage rhs = op.adjoint(y);
  axpy(lambda, approx, rhs);
  return rhs;
}

ComplexImage build_rhs(const KSpaceSample& sample, const ComplexImage& approx, double lambda) {
  return build_rhs(sample.op(), sample.y, approx, lambda);
}

ComplexImage cg_solve(const ComplexImage& rhs, const LinearMap& H, const ComplexImage& x0, const DcConfig& config,
                      CgTrace* trace, std::vector<double>* residual_norms) {
  config.validate();
  check_same_shape(rhs.shape(), x0.shape(), "cg_solve");

  ComplexImage x = x0;
  ComplexImage r = rhs - H(x);
  ComplexImage p = r;
  double rho = norm_squared(r);
  const double rho0 = rho;

  if (trace != nullptr) {
    *trace = CgTrace{};
    trace->x0 = x0;
    trace->residual.push_back(r);
    trace->rho.push_back(rho);
  }
  if (residual_norms != nullptr) residual_norms->assign(1, std::sqrt(rho));

  for (int i = 0; i < config.n_cg; ++i) {
    if (rho == 0.0) break;
    if (config.residual_tol > 0.0 && std::sqrt(rho / rho0) <= config.residual_tol) break;

    ComplexImage q = H(p);
    const double curvature = real_inner(p, q);
    if (!(curvature > 0.0)) {
      // A residual at round-off level can produce a zero curvature; that is
      // convergence, anything else is a broken operator.
      if (curvature == 0.0 && rho <= 1e-28 * rho0) break;
      throw Error(ErrorCode::NonFiniteValue, "CG curvature " + std::to_string(curvature) + " at iteration " +
                                                 std::to_string(i) + "; operator is not positive definite");
    }
    const double a = rho / curvature;
    axpy(a, p, x);
    axpy(-a, q, r);
    const double rho_next = norm_squared(r);
    const double b = rho_next / rho;

    if (!all_finite(x)) {
      throw Error(ErrorCode::NonFiniteValue, "CG iterate is not finite at iteration " + std::to_string(i));
    }
    if (trace != nullptr) {
      trace->direction.push_back(p);
      trace->h_direction.push_back(std::move(q));
      trace->curvature.push_back(curvature);
      trace->step.push_back(a);
      trace->momentum.push_back(b);
      trace->residual.push_back(r);
      trace->rho.push_back(rho_next);
    }
    if (residual_norms != nullptr) residual_norms->push_back(std::sqrt(rho_next));

    // p <- r + b p
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = r[j] + b * p[j];
    rho = rho_next;
  }
  return x;
}

CgAdjoint cg_solve_vjp(const CgTrace& trace, const LinearMap& H, const ComplexImage& x_bar) {
  const Shape& shape = trace.x0.shape();
  check_same_shape(x_bar.shape(), shape, "cg_solve_vjp");
  const int n = trace.iterations();

  CgAdjoint adj;
  ComplexImage xb = x_bar;
  ComplexImage rb(shape);  // adjoint of r_{i+1} from its later uses
  ComplexImage pb(shape);  // adjoint of p_{i+1}
  double rho_b = 0.0;      // adjoint of rho_{i+1}

  for (int i = n - 1; i >= 0; --i) {
    const auto& p = trace.direction[i];
    const auto& q = trace.h_direction[i];
    const auto& r_next = trace.residual[i + 1];
    const double a = trace.step[i];
    const double b = trace.momentum[i];
    const double rho = trace.rho[i];
    const double rho_next = trace.rho[i + 1];
    const double sigma = trace.curvature[i];

    // p_{i+1} = r_{i+1} + b_i p_i
    rb += pb;
    const double b_bar = real_inner(pb, p);
    ComplexImage p_bar = b * pb;
    // b_i = rho_{i+1} / rho_i
    rho_b += b_bar / rho;
    double rho_i_bar = -b_bar * rho_next / (rho * rho);
    // rho_{i+1} = <r_{i+1}, r_{i+1}>
    axpy(2.0 * rho_b, r_next, rb);
    // r_{i+1} = r_i - a_i q_i ; x_{i+1} = x_i + a_i p_i
    double a_bar = -real_inner(rb, q) + real_inner(xb, p);
    ComplexImage q_bar = -a * rb;
    axpy(a, xb, p_bar);
    // a_i = rho_i / sigma_i
    rho_i_bar += a_bar / sigma;
    const double sigma_bar = -a_bar * rho / (sigma * sigma);
    // sigma_i = <p_i, q_i>
    axpy(sigma_bar, q, p_bar);
    axpy(sigma_bar, p, q_bar);
    // q_i = H p_i, H self-adjoint
    p_bar += H(q_bar);
    adj.lambda += real_inner(q_bar, p);

    pb = std::move(p_bar);
    rho_b = rho_i_bar;
    // rb now carries the adjoint of r_i from r_{i+1} = r_i - a_i q_i.
  }

  // rho_0 = <r_0, r_0>, p_0 = r_0, r_0 = rhs - H x0
  axpy(2.0 * rho_b, trace.residual[0], rb);
  rb += pb;
  adj.rhs = rb;
  adj.x0 = xb - H(rb);
  adj.lambda -= real_inner(rb, trace.x0);
  return adj;
}

ComplexImage dc_step(const KSpaceSample& sample, const CodeState& state, const FilterBank& filters,
                     const ComplexImage& x_prev, const DcConfig& config) {
  const auto op = sample.op();
  const auto approx = dictionary_synthesis(filters, state.s);
  return cg_solve(build_rhs(op, sample.y, approx, config.lambda), regularized_normal(op, config.lambda), x_prev,
                  config);
}

double dc_objective(const FourierOperator& op, const std::vector<Complex>& y, const ComplexImage& x,
                    const ComplexImage& approx, double lambda) {
  const auto ax = op.forward(x);
  double misfit = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) misfit += std::norm(ax[i] - y[i]);
  return 0.5 * misfit + 0.5 * lambda * norm_squared(x - approx);
}

}  // namespace ucdl
