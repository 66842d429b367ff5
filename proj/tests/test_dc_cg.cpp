#include <doctest.h>

#include <limits>
#include <random>

#include "oracles.hpp"
#include "ucdl/dc_cg.hpp"

using namespace ucdl;
using oracle::CMatrix;
using oracle::CVector;

namespace {

FourierOperator unit_full_operator(const Shape& shape) {
  ComplexImage c(Shape{shape[0], shape[1]});
  for (auto& v : c.data()) v = 1.0;
  return FourierOperator(CoilMaps{{c}}, make_sampling_mask(shape, MaskFamily::Full, 1.0, 0));
}

CMatrix normal_matrix(const FourierOperator& op) {
  const Shape& shape = op.image_shape();
  return oracle::probe_matrix(
      [&](const ComplexImage& e) { return op.normal(e).vector(); }, shape, shape_size(shape));
}

std::vector<Complex> random_kspace(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Complex> y(n);
  for (auto& v : y) v = {g(rng), g(rng)};
  return y;
}

}  // namespace

TEST_CASE("identity normal operator has a closed form") {
  std::mt19937_64 rng(51);
  const Shape shape{6, 5, 2};
  const auto op = unit_full_operator(shape);
  for (double lambda : {0.0, 0.3, 1.0, 7.5}) {
    const auto rhs = oracle::random_image(shape, rng);
    const auto x = cg_solve(rhs, regularized_normal(op, lambda), ComplexImage(shape), {lambda, 1, 0.0});
    CHECK(oracle::rel_diff(x, (1.0 / (1.0 + lambda)) * rhs) <= 1e-12);
  }
}

TEST_CASE("zero system stays at zero") {
  const Shape shape{4, 4, 1};
  const auto op = unit_full_operator(shape);
  CgTrace trace;
  const auto x = cg_solve(ComplexImage(shape), regularized_normal(op, 1.0), ComplexImage(shape), {}, &trace);
  CHECK(norm(x) == 0.0);
  CHECK(trace.iterations() == 0);
}

TEST_CASE("cg matches dense solve on 64-unknown instances") {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 6; ++trial) {
    const Shape shape = trial % 2 ? Shape{8, 8, 1} : Shape{4, 4, 4};
    const FourierOperator op(make_coil_maps(shape[0], shape[1], 1 + trial % 3),
                             make_sampling_mask(shape, trial % 3 ? MaskFamily::Points : MaskFamily::Lines, 3.0, trial));
    const double lambda = 0.05 + 0.3 * trial;
    const auto rhs = oracle::random_image(shape, rng);
    const CMatrix H = normal_matrix(op) + lambda * CMatrix::Identity(64, 64);
    const CVector ref = H.lu().solve(oracle::to_vector(rhs));
    for (int n_cg : {50, 64, 128}) {
      const auto x = cg_solve(rhs, regularized_normal(op, lambda), oracle::random_image(shape, rng), {lambda, n_cg, 0.0});
      CHECK(oracle::rel_diff(x, oracle::to_image(ref, shape)) <= 1e-8);
    }
  }
}

TEST_CASE("energy-norm error is nonincreasing") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape shape{6, 6, 2};
    const FourierOperator op(make_coil_maps(6, 6, 1 + trial % 3),
                             make_sampling_mask(shape, trial % 2 ? MaskFamily::Points : MaskFamily::Lines, 4.0, trial));
    const double lambda = 0.1 + 0.1 * trial;
    const auto rhs = oracle::random_image(shape, rng);
    const CMatrix H = normal_matrix(op) + lambda * CMatrix::Identity(72, 72);
    const CVector xs = H.lu().solve(oracle::to_vector(rhs));
    double prev = std::numeric_limits<double>::infinity();
    for (int n = 0; n <= 12; ++n) {
      const auto x = n == 0 ? ComplexImage(shape)
                            : cg_solve(rhs, regularized_normal(op, lambda), ComplexImage(shape), {lambda, n, 0.0});
      const CVector e = oracle::to_vector(x) - xs;
      const double energy = (e.adjoint() * H * e)(0).real();
      CHECK(energy <= prev * (1.0 + 1e-10) + 1e-28);
      prev = energy;
    }
  }
}

TEST_CASE("residual norms are nonincreasing for a single coil") {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape shape{8, 6, 2};
    const FourierOperator op(make_coil_maps(8, 6, 1),
                             make_sampling_mask(shape, trial % 2 ? MaskFamily::Points : MaskFamily::Lines, 4.0, trial));
    std::vector<double> norms;
    const double lambda = 0.1 + 0.1 * trial;
    (void)cg_solve(oracle::random_image(shape, rng), regularized_normal(op, lambda), oracle::random_image(shape, rng),
                   {lambda, 12, 0.0}, nullptr, &norms);
    REQUIRE(norms.size() >= 2);
    for (std::size_t i = 1; i < norms.size(); ++i) CHECK(norms[i] <= norms[i - 1] * (1.0 + 1e-12));
  }
}

TEST_CASE("early exit tolerance") {
  std::mt19937_64 rng(54);
  const Shape shape{8, 8, 2};
  const FourierOperator op(make_coil_maps(8, 8, 3), make_sampling_mask(shape, MaskFamily::Points, 3.0, 2));
  std::vector<double> norms;
  CgTrace trace;
  (void)cg_solve(oracle::random_image(shape, rng), regularized_normal(op, 0.1), ComplexImage(shape), {0.1, 500, 1e-6},
                 &trace, &norms);
  CHECK(trace.iterations() < 500);
  CHECK(norms.back() <= 1e-6 * norms.front());
}

TEST_CASE("non-finite input is reported") {
  const Shape shape{4, 4, 1};
  const auto op = unit_full_operator(shape);
  ComplexImage rhs(shape);
  rhs[3] = std::numeric_limits<double>::quiet_NaN();
  try {
    (void)cg_solve(rhs, regularized_normal(op, 1.0), ComplexImage(shape), {});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteValue);
    CHECK(e.is_numerical());
  }
  CHECK_THROWS_AS(DcConfig({1.0, 0, 0.0}).validate(), Error);
}

TEST_CASE("build_rhs") {
  std::mt19937_64 rng(55);
  const Shape shape{4, 4, 1};
  const FourierOperator op(make_coil_maps(4, 4, 1), make_sampling_mask(shape, MaskFamily::Lines, 2.0, 3));
  CHECK(norm(build_rhs(op, std::vector<Complex>(op.data_size()), ComplexImage(shape), 2.0)) == 0.0);

  const auto y = random_kspace(op.data_size(), rng);
  const auto approx = oracle::random_image(shape, rng);
  CHECK(build_rhs(op, y, approx, 0.0) == op.adjoint(y));

  const CMatrix A = oracle::probe_matrix([&](const ComplexImage& e) { return op.forward(e); }, shape, op.data_size());
  CVector yv(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) yv(static_cast<Eigen::Index>(i)) = y[i];
  const CVector ref = A.adjoint() * yv + 0.7 * oracle::to_vector(approx);
  CHECK(oracle::rel_diff(build_rhs(op, y, approx, 0.7), oracle::to_image(ref, shape)) < 1e-13);
}

TEST_CASE("dc_step approaches the synthesis for large lambda") {
  std::mt19937_64 rng(56);
  const Shape shape{8, 8, 3};
  const auto coils = make_coil_maps(8, 8, 2);
  const auto mask = make_sampling_mask(shape, MaskFamily::Lines, 4.0, 1);
  const auto bank = oracle::random_bank(2, Shape{3, 3, 3}, rng);
  CodeState st = CodeState::zeros(2, shape);
  st.s = {oracle::random_image(shape, rng), oracle::random_image(shape, rng)};
  const auto approx = dictionary_synthesis(bank, st.s);
  const auto sample = simulate_measurement(approx, coils, mask, 0.0, 0);
  const auto x = dc_step(sample, st, bank, ComplexImage(shape), {1e6, 12, 0.0});
  CHECK(oracle::rel_diff(x, approx) <= 1e-4);
}

TEST_CASE("dc_step decreases the data-consistency objective") {
  std::mt19937_64 rng(57);
  for (int trial = 0; trial < 10; ++trial) {
    const Shape shape{6, 6, 3};
    const auto coils = make_coil_maps(6, 6, 2);
    const auto mask = make_sampling_mask(shape, MaskFamily::Points, 3.0, trial);
    const auto bank = oracle::random_bank(2, Shape{3, 3, 3}, rng);
    CodeState st = CodeState::zeros(2, shape);
    st.s = {oracle::random_image(shape, rng), oracle::random_image(shape, rng)};
    const auto sample = simulate_measurement(oracle::random_image(shape, rng), coils, mask, 0.1, trial);
    const auto x_prev = oracle::random_image(shape, rng);
    const DcConfig cfg{0.5, 12, 0.0};
    const auto x = dc_step(sample, st, bank, x_prev, cfg);
    const auto approx = dictionary_synthesis(bank, st.s);
    const auto op = sample.op();
    CHECK(dc_objective(op, sample.y, x, approx, cfg.lambda) < dc_objective(op, sample.y, x_prev, approx, cfg.lambda));
    CHECK(dc_step(sample, st, bank, x_prev, cfg) == x);
  }
}

TEST_CASE("cg VJP matches central differences") {
  std::mt19937_64 rng(58);
  const Shape shape{5, 4, 2};
  const FourierOperator op(make_coil_maps(5, 4, 2), make_sampling_mask(shape, MaskFamily::Points, 2.0, 4));
  const auto rhs = oracle::random_image(shape, rng);
  const auto x0 = oracle::random_image(shape, rng);
  const auto g = oracle::random_image(shape, rng);
  const double lambda = 0.6;
  for (int n_cg : {1, 2, 3, 6}) {
    auto loss = [&](const ComplexImage& b, const ComplexImage& s, double lam) {
      return real_inner(g, cg_solve(b, regularized_normal(op, lam), s, {lam, n_cg, 0.0}));
    };
    CgTrace trace;
    (void)cg_solve(rhs, regularized_normal(op, lambda), x0, {lambda, n_cg, 0.0}, &trace);
    const auto adj = cg_solve_vjp(trace, regularized_normal(op, lambda), g);
    const double h = 1e-6;
    for (std::size_t i = 0; i < 2 * rhs.size(); i += 2) {
      auto bp = rhs, bm = rhs;
      bp.channels()[i] += h;
      bm.channels()[i] -= h;
      const double fd = (loss(bp, x0, lambda) - loss(bm, x0, lambda)) / (2 * h);
      CHECK(adj.rhs.channels()[i] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
      auto sp = x0, sm = x0;
      sp.channels()[i + 1] += h;
      sm.channels()[i + 1] -= h;
      const double fd0 = (loss(rhs, sp, lambda) - loss(rhs, sm, lambda)) / (2 * h);
      CHECK(adj.x0.channels()[i + 1] == doctest::Approx(fd0).epsilon(1e-6).scale(1.0));
    }
    const double fdl = (loss(rhs, x0, lambda + 1e-6) - loss(rhs, x0, lambda - 1e-6)) / 2e-6;
    CHECK(adj.lambda == doctest::Approx(fdl).epsilon(1e-6).scale(1.0));
  }
}
