#pragma once

// Central finite-difference check of training::backward on small networks.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "ucdl/training.hpp"

namespace gradcheck {

using namespace ucdl;

struct Instance {
  NetworkConfig config;
  KSpaceSample sample;
  ComplexImage target;
  NetworkParams params;
};

struct Report {
  std::vector<double> analytic;
  std::vector<double> numeric;
  double worst_rel = 0.0;
  double kink_margin = 0.0;
};

/// Distance of the closest soft-threshold input to the kink |v| = tau, over
/// every recorded ADMM step.
inline double kink_margin(const ForwardTrace& trace) {
  double margin = 1e300;
  const double tau = trace.admm.threshold();
  for (const auto& outer : trace.outer)
    for (const auto& item : outer.admm)
      for (const auto& rec : item)
        for (const auto& v : rec.prox_input)
          for (double c : v.channels()) margin = std::min(margin, std::abs(std::abs(c) - tau));
  return margin;
}

inline double loss_of(const Instance& inst, const NetworkParams& p) {
  return loss_mse(forward_reconstruct(inst.sample, p, inst.config), inst.target);
}

/// Draws an instance whose soft-threshold inputs stay at least `margin` away
/// from the kink, retrying with fresh seeds otherwise.
inline Instance make_instance(NetworkConfig config, const Shape& shape, std::uint64_t seed, double margin = 1e-4) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    std::mt19937_64 rng(seed * 1000 + attempt);
    const auto truth = oracle::random_image(shape, rng);
    const auto coils = make_coil_maps(shape[0], shape[1], 2);
    const auto mask = make_sampling_mask(shape, MaskFamily::Points, 2.0, seed + attempt);
    Instance inst{config, simulate_measurement(truth, coils, mask, 0.1, seed + attempt), truth,
                  init_network(config, seed + attempt)};
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    inst.params.log_lambda = u(rng);
    inst.params.log_alpha = -1.5 + u(rng);
    inst.params.log_beta = u(rng);
    ForwardTrace trace;
    (void)forward_reconstruct(inst.sample, inst.params, config, &trace);
    if (kink_margin(trace) >= margin) return inst;
  }
}

inline Report run(const Instance& inst, double h = 1e-6) {
  Report rep;
  ForwardTrace trace;
  const auto out = forward_reconstruct(inst.sample, inst.params, inst.config, &trace);
  rep.kink_margin = kink_margin(trace);
  rep.analytic = backward(trace, inst.params, loss_gradient(out, inst.target)).flatten();

  const std::size_t nf = inst.params.filters.values.size();
  auto component = [&](NetworkParams& p, std::size_t i) -> double& {
    if (i < nf) return p.filters.values[i];
    if (i == nf) return p.log_lambda;
    if (i == nf + 1) return p.log_alpha;
    return p.log_beta;
  };
  for (std::size_t i = 0; i < rep.analytic.size(); ++i) {
    NetworkParams plus = inst.params, minus = inst.params;
    component(plus, i) += h;
    component(minus, i) -= h;
    const double fd = (loss_of(inst, plus) - loss_of(inst, minus)) / (2.0 * h);
    rep.numeric.push_back(fd);
    const double den = std::max(std::abs(fd), std::abs(rep.analytic[i]));
    const double rel = den == 0.0 ? 0.0 : std::abs(fd - rep.analytic[i]) / den;
    rep.worst_rel = std::max(rep.worst_rel, rel);
  }
  return rep;
}

}  // namespace gradcheck
