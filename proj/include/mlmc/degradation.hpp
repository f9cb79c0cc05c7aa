#pragma once

#include <random>

#include "mlmc/image.hpp"

namespace mlmc {

struct DegradationConfig {
  int scale = 2;              // s in {2,3,4}
  double noise_sigma = 0.0;   // fraction of peak value
  std::uint64_t seed = 0;

  int kernel_side() const { return 4 * scale + 3; }
};

// 2D correlation per channel (no kernel flip), reflect padding, same size.
Image blur(const Image& x, const Kernel& k);

// Keep every s-th pixel starting at (0,0); output dims = ceil(dim/s).
Image downsample(const Image& x, int s);

// y = clamp(downsample(blur(x,k), s) + N(0, noise_sigma^2), 0, 1)
Image degrade(const Image& x, const Kernel& k, const DegradationConfig& cfg,
              std::mt19937_64& rng);

// Peak 1; identical inputs map to the 100 dB cap.
double psnr(const Image& a, const Image& b);

// Mean local SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01 K2=0.03, peak 1,
// channels averaged. Requires min(dim) >= 11.
double ssim(const Image& a, const Image& b);

// 10*log10(max(k_gt)^2 / MSE); equal kernels map to the 100 dB cap.
double kernel_psnr(const Kernel& k_est, const Kernel& k_gt);

// Catmull-Rom bicubic (a = -0.5), clamped to [0,1].
Image bicubic_upsample(const Image& y, int s);

}  // namespace mlmc
