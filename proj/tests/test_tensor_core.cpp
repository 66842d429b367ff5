#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "ucdl/convolution.hpp"
#include "ucdl/fft.hpp"
#include "ucdl/io.hpp"
#include "ucdl/tensor.hpp"

using namespace ucdl;

TEST_CASE("tensor shape checks") {
  CHECK_THROWS_AS(ComplexImage(Shape{}), Error);
  CHECK_THROWS_AS(ComplexImage(Shape{2, 2}, std::vector<Complex>(3)), Error);
  ComplexImage a(Shape{2, 3});
  ComplexImage b(Shape{3, 2});
  CHECK_THROWS_AS(a += b, Error);
  CHECK(strides_of(Shape{2, 3, 4}) == std::vector<std::size_t>{12, 4, 1});
  CHECK(shape_string(Shape{2, 3}) == "(2,3)");
}

TEST_CASE("channels view interleaves real and imaginary parts") {
  ComplexImage x(Shape{2}, {Complex{1, 2}, Complex{3, 4}});
  const auto ch = x.channels();
  REQUIRE(ch.size() == 4);
  CHECK(ch[0] == 1.0);
  CHECK(ch[1] == 2.0);
  CHECK(ch[3] == 4.0);
  ComplexImage y(Shape{2}, {Complex{0, 1}, Complex{1, 0}});
  CHECK(real_inner(x, y) == doctest::Approx(2.0 + 3.0));
  CHECK(inner_product(x, y).real() == doctest::Approx(real_inner(x, y)));
}

TEST_CASE("fft matches naive DFT for assorted sizes") {
  std::mt19937_64 rng(11);
  for (const Shape& shape : {Shape{1}, Shape{7}, Shape{8}, Shape{5, 6}, Shape{3, 4, 5}, Shape{6, 6, 2}}) {
    const auto x = oracle::random_image(shape, rng);
    const auto ref = oracle::naive_dft(x, -1);
    const auto got = dft_forward(x).as<SpatialDomain>();
    CHECK(oracle::rel_diff(got, ref) < 1e-12);
    const auto back = dft_inverse(dft_forward(x));
    CHECK(oracle::rel_diff(back, x) < 1e-13);
  }
}

TEST_CASE("unnormalized inverse convention") {
  std::mt19937_64 rng(12);
  const Shape shape{4, 3};
  const auto X = oracle::random_image(shape, rng);
  auto ref = oracle::naive_dft(X, +1);
  ref *= 1.0 / 12.0;
  CHECK(oracle::rel_diff(dft_inverse(X.as<FrequencyDomain>()), ref) < 1e-12);
}

TEST_CASE("batched fft over leading axes") {
  std::mt19937_64 rng(13);
  const Shape shape{4, 5, 3};
  auto x = oracle::random_image(shape, rng);
  auto y = x;
  fft_inplace(y.data(), shape, 2, FftDirection::Forward);
  for (std::size_t t = 0; t < 3; ++t) {
    ComplexImage frame(Shape{4, 5});
    for (std::size_t p = 0; p < 20; ++p) frame[p] = x[p * 3 + t];
    const auto ref = oracle::naive_dft(frame);
    for (std::size_t p = 0; p < 20; ++p) CHECK(std::abs(y[p * 3 + t] - ref[p]) < 1e-12);
  }
}

TEST_CASE("parseval") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const Shape shape{3 + static_cast<std::size_t>(trial % 5), 4, 2 + static_cast<std::size_t>(trial % 3)};
    const auto x = oracle::random_image(shape, rng);
    const auto X = dft_forward(x);
    CHECK(norm_squared(X) == doctest::Approx(static_cast<double>(x.size()) * norm_squared(x)).epsilon(1e-12));
  }
}

TEST_CASE("kernel padding puts the centre at the origin") {
  const std::vector<double> k{1, 2, 3, 4, 5, 6, 7, 8, 9};
  const KernelView kv{Shape{3, 3}, k};
  const auto p = zero_pad_filter(kv, Shape{5, 5});
  CHECK(p[0] == Complex(5.0));
  CHECK(p[1] == Complex(6.0));
  CHECK(p[4] == Complex(4.0));
  CHECK(p[4 * 5 + 4] == Complex(1.0));
  CHECK(crop_filter(p, Shape{3, 3}) == k);
  CHECK_THROWS_AS(zero_pad_filter(kv, Shape{2, 5}), Error);
  CHECK_THROWS_AS(zero_pad_filter(kv, Shape{5, 5, 5}), Error);
  CHECK(kernel_origin(4) == 2);
}

TEST_CASE("circular convolution equals direct sum") {
  std::mt19937_64 rng(15);
  for (const auto& [img, ker] : std::vector<std::pair<Shape, Shape>>{
           {{8, 8}, {3, 3}}, {{7, 5}, {4, 2}}, {{6, 6, 3}, {3, 3, 3}}, {{5, 4, 2}, {5, 4, 2}}, {{9}, {4}}}) {
    const auto s = oracle::random_image(img, rng);
    const auto vals = oracle::random_real(shape_size(ker), rng);
    const KernelView kv{ker, vals};
    CHECK(oracle::rel_diff(circular_convolve(kv, s), oracle::direct_convolve(kv, s)) < 1e-12);
  }
}

TEST_CASE("convolution with the identity kernel is a no-op") {
  std::mt19937_64 rng(16);
  const auto s = oracle::random_image(Shape{6, 5}, rng);
  std::vector<double> delta(9, 0.0);
  delta[4] = 1.0;
  CHECK(oracle::rel_diff(circular_convolve(KernelView{Shape{3, 3}, delta}, s), s) < 1e-14);
}

TEST_CASE("property: convolution is linear and commutes with shifts") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 25; ++trial) {
    const Shape shape{5 + static_cast<std::size_t>(trial % 4), 6};
    const auto a = oracle::random_image(shape, rng);
    const auto b = oracle::random_image(shape, rng);
    const auto vals = oracle::random_real(9, rng);
    const KernelView kv{Shape{3, 3}, vals};
    const Complex c{0.3, -1.2};
    auto lhs = circular_convolve(kv, c * a + b);
    auto rhs = c * circular_convolve(kv, a) + circular_convolve(kv, b);
    CHECK(oracle::rel_diff(lhs, rhs) < 1e-12);

    ComplexImage shifted(shape);
    const std::size_t nx = shape[0], ny = shape[1];
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j) shifted[((i + 1) % nx) * ny + j] = a[i * ny + j];
    const auto ca = circular_convolve(kv, a);
    ComplexImage ca_shift(shape);
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < ny; ++j) ca_shift[((i + 1) % nx) * ny + j] = ca[i * ny + j];
    CHECK(oracle::rel_diff(circular_convolve(kv, shifted), ca_shift) < 1e-12);
  }
}

TEST_CASE("tensor file round trip") {
  std::mt19937_64 rng(18);
  const auto x = oracle::random_image(Shape{3, 2, 4}, rng);
  const auto bytes = io::encode_tensor(x);
  CHECK(bytes.size() == 4 + 4 + 4 + 3 * 8 + 4 + x.size() * 16);
  CHECK(io::decode_tensor(bytes) == x);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(io::decode_tensor(bad), Error);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(io::decode_tensor(bad), Error);

  const auto path = std::filesystem::temp_directory_path() / "ucdl_tensor_roundtrip.ucdl";
  io::write_tensor(path, x);
  CHECK(io::read_tensor(path) == x);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(io::read_tensor(path), Error);
}
