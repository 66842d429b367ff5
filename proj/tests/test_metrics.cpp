#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "ucdl/metrics.hpp"

using namespace ucdl;

namespace {

MagnitudeImage random_magnitude(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MagnitudeImage m{h, w, std::vector<double>(h * w)};
  for (double& v : m.values) v = u(rng);
  return m;
}

std::vector<double> gaussian2d(std::size_t wh, std::size_t ww) {
  std::vector<double> g(wh * ww);
  double sum = 0.0;
  for (std::size_t i = 0; i < wh; ++i)
    for (std::size_t j = 0; j < ww; ++j) {
      const double di = i - (wh - 1) / 2.0, dj = j - (ww - 1) / 2.0;
      g[i * ww + j] = std::exp(-(di * di + dj * dj) / (2 * 1.5 * 1.5));
      sum += g[i * ww + j];
    }
  for (double& v : g) v /= sum;
  return g;
}

// Direct SSIM: every valid window recomputed from scratch with a separately
// built 2D Gaussian.
double reference_ssim(const MagnitudeImage& x, const MagnitudeImage& y) {
  const std::size_t wh = std::min<std::size_t>(11, y.height), ww = std::min<std::size_t>(11, y.width);
  const auto g = gaussian2d(wh, ww);
  const double L = *std::max_element(y.values.begin(), y.values.end());
  const double c1 = 1e-4 * L * L, c2 = 9e-4 * L * L;
  double total = 0.0;
  int n = 0;
  for (std::size_t r = 0; r + wh <= y.height; ++r)
    for (std::size_t c = 0; c + ww <= y.width; ++c) {
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < wh; ++i)
        for (std::size_t j = 0; j < ww; ++j) {
          mx += g[i * ww + j] * x.at(r + i, c + j);
          my += g[i * ww + j] * y.at(r + i, c + j);
        }
      double vx = 0, vy = 0, cxy = 0;
      for (std::size_t i = 0; i < wh; ++i)
        for (std::size_t j = 0; j < ww; ++j) {
          const double a = x.at(r + i, c + j) - mx, b = y.at(r + i, c + j) - my;
          vx += g[i * ww + j] * a * a;
          vy += g[i * ww + j] * b * b;
          cxy += g[i * ww + j] * a * b;
        }
      total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++n;
    }
  return total / n;
}

}  // namespace

TEST_CASE("centred ROI") {
  const Roi r = centered_roi(10, 9, 4, 4);
  CHECK(r.offset[0] == 3);
  CHECK(r.offset[1] == 2);  // odd leftover: extra pixel on the high side
  CHECK_THROWS_AS(centered_roi(4, 4, 5, 2), Error);
  CHECK_THROWS_AS(centered_roi(4, 4, 0, 2), Error);
}

TEST_CASE("roi crop") {
  std::mt19937_64 rng(81);
  const auto x = oracle::random_image(Shape{10, 12}, rng);
  const auto full = roi_crop(x, 10, 12);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(full.values[i] == std::abs(x[i]));
  // A crop of a crop equals a single crop of the smaller size.
  const auto big = roi_crop(x, 8, 8);
  ComplexImage as_image(Shape{8, 8});
  for (std::size_t i = 0; i < 64; ++i) as_image[i] = big.values[i];
  CHECK(roi_crop(as_image, 4, 6).values == roi_crop(x, 4, 6).values);
  CHECK_THROWS_AS(roi_crop(x, 11, 2), Error);

  const auto vol = oracle::random_image(Shape{6, 6, 3}, rng);
  const auto f = roi_crop_frame(vol, 2, 2, 2);
  CHECK(f.values[0] == std::abs(vol[(2 * 6 + 2) * 3 + 2]));
}

TEST_CASE("metric arithmetic") {
  MagnitudeImage ref{2, 2, {1.0, 0.0, 0.0, 0.0}};
  MagnitudeImage x{2, 2, {1.0, 0.2, 0.0, 0.0}};
  CHECK(psnr(x, ref) == doctest::Approx(20.0));  // MSE = 0.04 / 4 = 0.01
  CHECK(nrmse(x, ref) == doctest::Approx(0.2));
  CHECK(std::isinf(psnr(ref, ref)));
  CHECK(nrmse(ref, ref) == 0.0);
  MagnitudeImage zero{2, 2, {0, 0, 0, 0}};
  CHECK_THROWS_AS(nrmse(x, zero), Error);
  CHECK_THROWS_AS(psnr(x, MagnitudeImage{1, 4, {0, 0, 0, 0}}), Error);
}

TEST_CASE("ssim against a direct evaluation") {
  std::mt19937_64 rng(82);
  for (auto [h, w] : std::vector<std::pair<std::size_t, std::size_t>>{{16, 16}, {20, 13}, {8, 8}, {11, 11}}) {
    const auto a = random_magnitude(h, w, rng);
    auto b = a;
    for (double& v : b.values) v += 0.1 * std::uniform_real_distribution<double>(-1, 1)(rng);
    CHECK(ssim(b, a) == doctest::Approx(reference_ssim(b, a)).epsilon(1e-10));
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ssim(b, a) <= 1.0);
  }
}

TEST_CASE("ssim of an image against its negation on zero-mean data") {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 10; ++trial) {
    // One 11x11 window whose Gaussian-weighted mean is exactly removed.
    MagnitudeImage a = random_magnitude(11, 11, rng);
    const auto g = gaussian2d(11, 11);
    double mean = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) mean += g[i] * a.values[i];
    for (double& v : a.values) v -= mean;
    MagnitudeImage neg = a;
    for (double& v : neg.values) v = -v;
    CHECK(ssim(neg, a) <= 0.0);
  }
}

TEST_CASE("swapping arguments: ssim symmetric up to its range constant, nrmse changes normalizer") {
  std::mt19937_64 rng(84);
  auto a = random_magnitude(16, 16, rng);
  auto b = a;
  for (double& v : b.values) v *= 0.9;
  // Equal dynamic range keeps SSIM exactly symmetric.
  b.values[0] = a.values[0] = 1.0;
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  CHECK(nrmse(a, b) * std::sqrt(nb) == doctest::Approx(nrmse(b, a) * std::sqrt(na)).epsilon(1e-14));
}

TEST_CASE("evaluate_metrics on volumes averages frames") {
  std::mt19937_64 rng(85);
  const auto ref = oracle::random_image(Shape{16, 16, 3}, rng);
  auto x = ref;
  for (auto& v : x.data()) v *= 1.05;
  const auto rep = evaluate_metrics(x, ref);
  CHECK(rep.roi.size[0] == 8);
  CHECK(rep.roi.size[1] == 8);
  double p = 0.0;
  for (std::size_t t = 0; t < 3; ++t) p += psnr(roi_crop_frame(x, t, 8, 8), roi_crop_frame(ref, t, 8, 8));
  CHECK(rep.psnr == doctest::Approx(p / 3.0));
  CHECK(rep.nrmse == doctest::Approx(0.05));

  const auto same = evaluate_metrics(ref, ref, 12, 10);
  CHECK(same.nrmse == 0.0);
  CHECK(same.ssim == doctest::Approx(1.0));
  const auto j = to_json(same);
  CHECK(j["psnr"] == "inf");
  CHECK(j["roi"] == nlohmann::json::array({12, 10}));
  CHECK(csv_row(same).rfind("inf,0,1,12,10", 0) == 0);
  CHECK(csv_header() == "psnr,nrmse,ssim,roi_h,roi_w");
  CHECK(to_json(rep)["psnr"].is_number());
}
