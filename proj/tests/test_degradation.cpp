#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "mlmc/degradation.hpp"
#include "mlmc/sampler.hpp"

using namespace mlmc;

namespace {

// direct-summation oracle with the same reflect-101 boundary convention
int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

Image blur_oracle(const Image& x, const Kernel& k) {
  const int r = k.side / 2;
  Image out(x.height, x.width, x.channels);
  for (int c = 0; c < x.channels; ++c)
    for (int y = 0; y < x.height; ++y)
      for (int xx = 0; xx < x.width; ++xx) {
        double acc = 0.0;
        for (int ky = 0; ky < k.side; ++ky)
          for (int kx = 0; kx < k.side; ++kx)
            acc += k.at(ky, kx) * x.at(c, reflect(y + ky - r, x.height),
                                       reflect(xx + kx - r, x.width));
        out.at(c, y, xx) = acc;
      }
  return out;
}

Image random_image(std::mt19937_64& rng, int h, int w, int c = 1) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Image img(h, w, c);
  for (auto& v : img.data) v = dist(rng);
  return img;
}

Kernel random_kernel(std::mt19937_64& rng, int side) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Kernel k(side);
  for (auto& v : k.grid) v = dist(rng);
  k.normalize();
  return k;
}

}  // namespace

TEST_CASE("blur keeps constants for any sum-one kernel") {
  std::mt19937_64 rng(1);
  Image x(9, 9, 1, 0.42);
  Kernel k = random_kernel(rng, 5);
  Image y = blur(x, k);
  for (double v : y.data) CHECK(std::abs(v - 0.42) < 1e-12);
}

TEST_CASE("delta kernel blur is the identity") {
  std::mt19937_64 rng(2);
  Image x = random_image(rng, 12, 10);
  Image y = blur(x, Kernel::delta(7));
  for (size_t i = 0; i < x.data.size(); ++i) CHECK(x.data[i] == y.data[i]);
}

TEST_CASE("blur matches the brute-force oracle on 50 seeded pairs") {
  for (int seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    Image x = random_image(rng, 16, 16);
    Kernel k = random_kernel(rng, 11);
    Image fast = blur(x, k);
    Image slow = blur_oracle(x, k);
    for (size_t i = 0; i < fast.data.size(); ++i)
      CHECK(std::abs(fast.data[i] - slow.data[i]) < 1e-12);
  }
}

TEST_CASE("blur is linear in the image") {
  std::mt19937_64 rng(5);
  Image a = random_image(rng, 12, 12);
  Image b = random_image(rng, 12, 12);
  Kernel k = random_kernel(rng, 5);
  const double alpha = 0.3, beta = 1.2;
  Image mix(12, 12, 1);
  for (size_t i = 0; i < mix.data.size(); ++i)
    mix.data[i] = alpha * a.data[i] + beta * b.data[i];
  Image lhs = blur(mix, k);
  Image ra = blur(a, k), rb = blur(b, k);
  for (size_t i = 0; i < lhs.data.size(); ++i)
    CHECK(std::abs(lhs.data[i] - (alpha * ra.data[i] + beta * rb.data[i])) <
          1e-12);
}

TEST_CASE("downsample keeps every s-th pixel from offset 0") {
  Image x(4, 4, 1);
  for (int y = 0; y < 4; ++y)
    for (int xx = 0; xx < 4; ++xx) x.at(0, y, xx) = y * 10 + xx;
  Image d = downsample(x, 2);
  CHECK(d.height == 2);
  CHECK(d.at(0, 0, 0) == 0.0);
  CHECK(d.at(0, 0, 1) == 2.0);
  CHECK(d.at(0, 1, 0) == 20.0);
  CHECK(d.at(0, 1, 1) == 22.0);

  Image odd(5, 5, 1, 0.5);
  CHECK(downsample(odd, 2).height == 3);  // ceil rule
  CHECK(downsample(odd, 1).data == odd.data);
}

TEST_CASE("degrade with identity chain returns the input") {
  std::mt19937_64 rng(7);
  Image x = random_image(rng, 8, 8);
  DegradationConfig cfg;
  cfg.scale = 1;
  cfg.noise_sigma = 0.0;
  Image y = degrade(x, Kernel::delta(7), cfg, rng);
  for (size_t i = 0; i < x.data.size(); ++i)
    CHECK(std::abs(x.data[i] - y.data[i]) < 1e-15);
}

TEST_CASE("degrade noise level matches the configured sigma") {
  // law-of-large-numbers check over 10 seeds on a mid-gray image
  DegradationConfig cfg;
  cfg.scale = 1;
  cfg.noise_sigma = 0.0392;
  Image x(64, 64, 1, 0.5);
  Kernel k = Kernel::delta(5);
  double acc = 0.0;
  long n = 0;
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    Image y = degrade(x, k, cfg, rng);
    for (double v : y.data) {
      const double r = v - 0.5;
      acc += r * r;
      ++n;
    }
  }
  const double std_est = std::sqrt(acc / n);
  CHECK(std_est > 0.0392 * 0.85);
  CHECK(std_est < 0.0392 * 1.15);
}

TEST_CASE("psnr formula and cap") {
  Image a(8, 8, 1, 0.5);
  CHECK(psnr(a, a) == 100.0);
  Image b = a;
  for (auto& v : b.data) v += 0.1;  // MSE 0.01
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
  Image c = a;
  for (auto& v : c.data) v += 0.01;  // MSE 1e-4
  CHECK(psnr(a, c) == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(psnr(a, b) == psnr(b, a));
}

TEST_CASE("psnr decreases as MSE grows") {
  std::mt19937_64 rng(9);
  Image a = random_image(rng, 16, 16);
  double prev = 101.0;
  for (double delta : {0.01, 0.02, 0.05, 0.1}) {
    Image b = a;
    for (auto& v : b.data) v += delta;
    const double p = psnr(a, b);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("psnr rejects shape mismatches") {
  Image a(8, 8, 1), b(8, 9, 1);
  CHECK_THROWS_AS(psnr(a, b), std::invalid_argument);
}

TEST_CASE("ssim self-similarity and dissimilarity") {
  std::mt19937_64 rng(10);
  Image a = random_image(rng, 16, 16);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  Image inv = a;
  for (auto& v : inv.data) v = 1.0 - v;
  CHECK(ssim(a, inv) < 1.0);
}

TEST_CASE("ssim rejects images smaller than the window") {
  Image a(8, 8, 1, 0.5);
  CHECK_THROWS_AS(ssim(a, a), std::invalid_argument);
}

TEST_CASE("ssim matches the frozen reference value on a shifted checkerboard") {
  Image a(32, 32, 1), b(32, 32, 1);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      a.at(0, y, x) = ((y / 4 + x / 4) % 2 == 0) ? 1.0 : 0.0;
      b.at(0, y, x) = ((y / 4 + (x + 1) / 4) % 2 == 0) ? 1.0 : 0.0;
    }
  // reference value from scikit-image structural_similarity
  // (gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
  //  data_range=1), computed once and frozen
  CHECK(ssim(a, b) == doctest::Approx(0.48495890094757227).epsilon(1e-6));
}

TEST_CASE("kernel psnr cap, hand evaluation, and asymmetry") {
  Kernel delta = Kernel::delta(11);
  CHECK(kernel_psnr(delta, delta) == 100.0);

  Kernel uniform(11, 1.0 / 121.0);
  // direct formula: peak = max(delta) = 1,
  // MSE = ((1 - 1/121)^2 + 120 * (1/121)^2) / 121
  const double u = 1.0 / 121.0;
  const double mse = ((1.0 - u) * (1.0 - u) + 120.0 * u * u) / 121.0;
  const double expected = 10.0 * std::log10(1.0 / mse);
  CHECK(kernel_psnr(uniform, delta) == doctest::Approx(expected).epsilon(1e-12));
  // swapping arguments changes the peak term
  CHECK(kernel_psnr(delta, uniform) != kernel_psnr(uniform, delta));

  CHECK_THROWS_AS(kernel_psnr(Kernel::delta(9), delta), std::invalid_argument);
}

TEST_CASE("bicubic upsample keeps constants and s=1 is the identity") {
  Image c(8, 8, 1, 0.7);
  Image up = bicubic_upsample(c, 2);
  CHECK(up.height == 16);
  for (double v : up.data) CHECK(std::abs(v - 0.7) < 1e-12);
  Image same = bicubic_upsample(c, 1);
  CHECK(same.data == c.data);
}

TEST_CASE("bicubic upsample reproduces a linear ramp in the interior") {
  Image ramp(8, 8, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) ramp.at(0, y, x) = x / 16.0;
  Image up = bicubic_upsample(ramp, 2);
  for (int y = 4; y < 12; ++y)
    for (int x = 4; x < 12; ++x) {
      // analytic ramp at the upsampled pixel center
      const double expected = ((x + 0.5) / 2.0 - 0.5) / 16.0;
      CHECK(std::abs(up.at(0, y, x) - expected) < 1e-6);
    }
}

TEST_CASE("degrade maps [0,1] images into [0,1]") {
  std::mt19937_64 rng(21);
  DegradationConfig cfg;
  cfg.scale = 2;
  cfg.noise_sigma = 0.0784;
  for (int trial = 0; trial < 10; ++trial) {
    Image x = random_image(rng, 20, 20);
    Kernel k = random_kernel(rng, 11);
    Image y = degrade(x, k, cfg, rng);
    for (double v : y.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}
