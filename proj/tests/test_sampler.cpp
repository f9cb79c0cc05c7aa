#include <doctest.h>

#include <cmath>
#include <random>

#include "mlmc/sampler.hpp"

using namespace mlmc;

TEST_CASE("isotropic gaussian kernel has the full square symmetry") {
  GaussianParams p;
  p.sigma1 = p.sigma2 = 1.3;
  Kernel k = gaussian_kernel(p, 9);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) {
      CHECK(std::abs(k.at(y, x) - k.at(x, y)) < 1e-12);          // transpose
      CHECK(std::abs(k.at(y, x) - k.at(8 - y, x)) < 1e-12);      // vertical
      CHECK(std::abs(k.at(y, x) - k.at(y, 8 - x)) < 1e-12);      // horizontal
    }
}

TEST_CASE("gaussian kernel center matches direct formula evaluation") {
  GaussianParams p;
  p.sigma1 = p.sigma2 = 1.0;
  Kernel k = gaussian_kernel(p, 11);
  // normalized isotropic gaussian evaluated over the same grid
  double total = 0.0;
  for (int y = -5; y <= 5; ++y)
    for (int x = -5; x <= 5; ++x)
      total += std::exp(-0.5 * (x * x + y * y));
  CHECK(k.at(5, 5) == doctest::Approx(1.0 / total).epsilon(1e-12));
}

TEST_CASE("gaussian kernel sums to 1 and is nonnegative for random params") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = sample_gaussian_params(rng, 2, SamplingRanges::in_distribution());
    Kernel k = gaussian_kernel(p, 11);
    double s = 0.0;
    for (double v : k.grid) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("tiny sigma falls back to a delta kernel") {
  GaussianParams p;
  p.sigma1 = p.sigma2 = 1e-200;
  Kernel k = gaussian_kernel(p, 7);
  CHECK(k.at(3, 3) == 1.0);
  CHECK(k.sum() == 1.0);
}

TEST_CASE("gaussian kernel is continuous in sigma") {
  GaussianParams p;
  p.sigma1 = 1.7;
  p.sigma2 = 0.9;
  p.theta = 0.4;
  Kernel a = gaussian_kernel(p, 11);
  p.sigma1 += 1e-6;
  Kernel b = gaussian_kernel(p, 11);
  double diff = 0.0;
  for (size_t i = 0; i < a.grid.size(); ++i)
    diff = std::max(diff, std::abs(a.grid[i] - b.grid[i]));
  CHECK(diff < 1e-4);
}

TEST_CASE("covariance is pi-periodic in the rotation angle") {
  GaussianParams p;
  p.sigma1 = 2.0;
  p.sigma2 = 0.7;
  p.theta = 0.61;
  Kernel a = gaussian_kernel(p, 11);
  p.theta += 3.14159265358979323846;
  Kernel b = gaussian_kernel(p, 11);
  for (size_t i = 0; i < a.grid.size(); ++i)
    CHECK(std::abs(a.grid[i] - b.grid[i]) < 1e-12);
}

TEST_CASE("sampled widths respect the s=2 default range") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    auto p = sample_gaussian_params(rng, 2, SamplingRanges::in_distribution());
    CHECK(p.sigma1 >= 0.35);
    CHECK(p.sigma1 <= 5.0);
    CHECK(p.sigma2 >= 0.35);
    CHECK(p.sigma2 <= 5.0);
    CHECK(p.theta >= 0.0);
    CHECK(p.theta <= 3.14159265358979323846);
  }
}

TEST_CASE("degenerate width range pins sigma") {
  std::mt19937_64 rng(2);
  SamplingRanges r;
  r.width_lo_per_s = r.width_hi_per_s = 0.5;  // lo == hi at s=2 gives sigma 1
  auto p = sample_gaussian_params(rng, 2, r);
  CHECK(p.sigma1 == 1.0);
  CHECK(p.sigma2 == 1.0);
}

TEST_CASE("empirical sigma mean matches the uniform law") {
  std::mt19937_64 rng(3);
  const auto ranges = SamplingRanges::in_distribution();
  double acc = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    auto p = sample_gaussian_params(rng, 2, ranges);
    acc += p.sigma1 + p.sigma2;
  }
  const double mean = acc / (2 * n);
  const double expected = (0.35 + 5.0) / 2.0;
  CHECK(std::abs(mean - expected) < 0.03 * expected);
}

TEST_CASE("kernel batches are sized, valid, and seed-reproducible") {
  std::mt19937_64 rng(4);
  auto batch = sample_kernel_batch(rng, 10, 2, 11,
                                   SamplingRanges::in_distribution());
  CHECK(batch.size() == 10);
  for (const auto& k : batch) CHECK(std::abs(k.sum() - 1.0) < 1e-9);

  std::mt19937_64 r1(99), r2(99);
  auto b1 = sample_kernel_batch(r1, 3, 2, 11, SamplingRanges::in_distribution());
  auto b2 = sample_kernel_batch(r2, 3, 2, 11, SamplingRanges::in_distribution());
  for (size_t i = 0; i < b1.size(); ++i) CHECK(b1[i].grid == b2[i].grid);

  std::mt19937_64 r3(5);
  CHECK(sample_kernel_batch(r3, 1, 2, 11, SamplingRanges::in_distribution())
            .size() == 1);
}

TEST_CASE("motion kernels are normalized and non-degenerate") {
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    Kernel k = motion_kernel(rng, 11, 20);
    double s = 0.0, mx = 0.0;
    for (double v : k.grid) {
      CHECK(v >= 0.0);
      s += v;
      mx = std::max(mx, v);
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
    int above = 0;
    for (double v : k.grid)
      if (v > 0.01 * mx) ++above;
    CHECK(above >= 2);
  }
}

TEST_CASE("single-step motion kernel is a small blurred point") {
  std::mt19937_64 rng(8);
  Kernel k = motion_kernel(rng, 11, 1);
  CHECK(std::abs(k.sum() - 1.0) < 1e-9);
  // mass concentrated near the center
  double center_mass = 0.0;
  for (int y = 3; y <= 7; ++y)
    for (int x = 3; x <= 7; ++x) center_mass += k.at(y, x);
  CHECK(center_mass > 0.99);
}
