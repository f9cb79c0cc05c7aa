#pragma once

#include <random>
#include <vector>

#include "mlmc/image.hpp"

namespace mlmc {

struct GaussianParams {
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double theta = 0.0;       // rotation angle, radians
  double center_y = 0.0;    // offset from the geometric center, pixels
  double center_x = 0.0;
};

struct SamplingRanges {
  double width_lo_per_s = 0.175;  // sigma range is [lo*s, hi*s]
  double width_hi_per_s = 2.5;
  double angle_lo = 0.0;
  double angle_hi = 3.14159265358979323846;
  double center_jitter = 1.0;

  static SamplingRanges in_distribution() { return {}; }
  static SamplingRanges out_of_distribution() {
    SamplingRanges r;
    r.width_lo_per_s = 0.35;
    r.width_hi_per_s = 5.0;
    return r;
  }
};

// Anisotropic Gaussian on the discrete grid: covariance
// R(theta) diag(sigma1^2, sigma2^2) R(theta)^T, normalized to sum 1.
// Falls back to a delta at the rounded center if the mass underflows.
Kernel gaussian_kernel(const GaussianParams& p, int side);

GaussianParams sample_gaussian_params(std::mt19937_64& rng, int scale,
                                      const SamplingRanges& ranges);

std::vector<Kernel> sample_kernel_batch(std::mt19937_64& rng, int count,
                                        int scale, int side,
                                        const SamplingRanges& ranges);

// Random-walk trajectory rasterized onto the grid, blurred with a one-pixel
// Gaussian, then normalized.
Kernel motion_kernel(std::mt19937_64& rng, int side, int steps);

}  // namespace mlmc
