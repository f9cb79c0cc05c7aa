#include "mlmc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mlmc {

Kernel gaussian_kernel(const GaussianParams& p, int side) {
  if (side <= 0 || side % 2 == 0)
    throw std::invalid_argument("gaussian_kernel: side must be odd");
  if (p.sigma1 <= 0.0 || p.sigma2 <= 0.0)
    throw std::invalid_argument("gaussian_kernel: sigmas must be positive");

  const double ct = std::cos(p.theta), st = std::sin(p.theta);
  const double v1 = p.sigma1 * p.sigma1, v2 = p.sigma2 * p.sigma2;
  // inverse covariance of R diag(v1,v2) R^T
  const double ia = ct * ct / v1 + st * st / v2;
  const double ib = st * ct * (1.0 / v1 - 1.0 / v2);
  const double id = st * st / v1 + ct * ct / v2;

  const int r = side / 2;
  Kernel k(side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double dy = (y - r) - p.center_y;
      const double dx = (x - r) - p.center_x;
      const double q = ia * dx * dx + 2.0 * ib * dx * dy + id * dy * dy;
      k.at(y, x) = std::exp(-0.5 * q);
    }
  }
  const double mass = k.sum();
  if (!(mass > 0.0)) {
    const int cy = std::clamp(r + static_cast<int>(std::lround(p.center_y)), 0,
                              side - 1);
    const int cx = std::clamp(r + static_cast<int>(std::lround(p.center_x)), 0,
                              side - 1);
    k = Kernel(side);
    k.at(cy, cx) = 1.0;
    return k;
  }
  for (auto& v : k.grid) v /= mass;
  return k;
}

GaussianParams sample_gaussian_params(std::mt19937_64& rng, int scale,
                                      const SamplingRanges& ranges) {
  const double lo = ranges.width_lo_per_s * scale;
  const double hi = ranges.width_hi_per_s * scale;
  if (!(0.0 < lo && lo <= hi))
    throw std::invalid_argument("sample_gaussian_params: bad width range");
  std::uniform_real_distribution<double> width(lo, hi);
  std::uniform_real_distribution<double> angle(ranges.angle_lo, ranges.angle_hi);
  std::uniform_real_distribution<double> jitter(-ranges.center_jitter,
                                                ranges.center_jitter);
  GaussianParams p;
  p.sigma1 = width(rng);
  p.sigma2 = width(rng);
  p.theta = ranges.angle_lo == ranges.angle_hi ? ranges.angle_lo : angle(rng);
  p.center_y = ranges.center_jitter == 0.0 ? 0.0 : jitter(rng);
  p.center_x = ranges.center_jitter == 0.0 ? 0.0 : jitter(rng);
  return p;
}

std::vector<Kernel> sample_kernel_batch(std::mt19937_64& rng, int count,
                                        int scale, int side,
                                        const SamplingRanges& ranges) {
  if (count < 1)
    throw std::invalid_argument("sample_kernel_batch: count must be >= 1");
  std::vector<Kernel> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i)
    out.push_back(gaussian_kernel(sample_gaussian_params(rng, scale, ranges),
                                  side));
  return out;
}

Kernel motion_kernel(std::mt19937_64& rng, int side, int steps) {
  if (side <= 0 || side % 2 == 0)
    throw std::invalid_argument("motion_kernel: side must be odd");
  if (steps < 1) throw std::invalid_argument("motion_kernel: steps must be >= 1");

  std::uniform_real_distribution<double> uang(0.0, 2.0 * 3.14159265358979323846);
  std::normal_distribution<double> turn(0.0, 0.5);
  const double r = side / 2.0 - 0.5;

  Kernel raster(side);
  double y = side / 2, x = side / 2;
  double ang = uang(rng);
  raster.at(static_cast<int>(y), static_cast<int>(x)) += 1.0;
  for (int i = 1; i < steps; ++i) {
    ang += turn(rng);
    y = std::clamp(y + 0.8 * std::sin(ang), 0.5, side - 0.5 - 1e-9);
    x = std::clamp(x + 0.8 * std::cos(ang), 0.5, side - 0.5 - 1e-9);
    raster.at(static_cast<int>(y), static_cast<int>(x)) += 1.0;
  }

  // one-pixel Gaussian smoothing, zero padding on the kernel grid
  GaussianParams gp;
  gp.sigma1 = gp.sigma2 = 1.0;
  Kernel g = gaussian_kernel(gp, 5);
  Kernel out(side);
  for (int oy = 0; oy < side; ++oy)
    for (int ox = 0; ox < side; ++ox) {
      double acc = 0.0;
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          const int sy = oy + dy, sx = ox + dx;
          if (sy < 0 || sy >= side || sx < 0 || sx >= side) continue;
          acc += g.at(dy + 2, dx + 2) * raster.at(sy, sx);
        }
      out.at(oy, ox) = acc;
    }
  out.normalize();
  return out;
}

}  // namespace mlmc
