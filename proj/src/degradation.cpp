#include "mlmc/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mlmc {

Image::Image(int h, int w, int c, double fill)
    : height(h), width(w), channels(c),
      data(static_cast<size_t>(h) * w * c, fill) {
  if (h <= 0 || w <= 0 || (c != 1 && c != 3))
    throw std::invalid_argument("image: dims must be positive, channels 1 or 3");
}

void Image::clamp01() {
  for (auto& v : data) v = std::clamp(v, 0.0, 1.0);
}

Kernel::Kernel(int side, double fill)
    : side(side), grid(static_cast<size_t>(side) * side, fill) {
  if (side <= 0 || side % 2 == 0)
    throw std::invalid_argument("kernel: side must be odd and positive");
}

double Kernel::sum() const {
  double s = 0.0;
  for (double v : grid) s += v;
  return s;
}

void Kernel::normalize() {
  double s = sum();
  if (!(s > 0.0)) throw std::runtime_error("kernel: mass is not positive");
  for (auto& v : grid) v /= s;
}

Kernel Kernel::delta(int side) {
  Kernel k(side);
  k.at(side / 2, side / 2) = 1.0;
  return k;
}

namespace {

int reflect_idx(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels)
    throw std::invalid_argument(
        std::string(what) + ": shape mismatch [" + std::to_string(a.height) +
        "x" + std::to_string(a.width) + "x" + std::to_string(a.channels) +
        "] vs [" + std::to_string(b.height) + "x" + std::to_string(b.width) +
        "x" + std::to_string(b.channels) + "]");
}

}  // namespace

Image blur(const Image& x, const Kernel& k) {
  if (k.side % 2 == 0)
    throw std::invalid_argument("blur: kernel side must be odd");
  const int r = k.side / 2;
  Image out(x.height, x.width, x.channels);
  for (int c = 0; c < x.channels; ++c) {
    for (int y = 0; y < x.height; ++y) {
      for (int xx = 0; xx < x.width; ++xx) {
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy) {
          const int sy = reflect_idx(y + dy, x.height);
          for (int dx = -r; dx <= r; ++dx) {
            const int sx = reflect_idx(xx + dx, x.width);
            acc += k.at(dy + r, dx + r) * x.at(c, sy, sx);
          }
        }
        out.at(c, y, xx) = acc;
      }
    }
  }
  return out;
}

Image downsample(const Image& x, int s) {
  if (s < 1) throw std::invalid_argument("downsample: scale must be >= 1");
  const int oh = (x.height + s - 1) / s, ow = (x.width + s - 1) / s;
  Image out(oh, ow, x.channels);
  for (int c = 0; c < x.channels; ++c)
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx)
        out.at(c, y, xx) = x.at(c, y * s, xx * s);
  return out;
}

Image degrade(const Image& x, const Kernel& k, const DegradationConfig& cfg,
              std::mt19937_64& rng) {
  Image y = downsample(blur(x, k), cfg.scale);
  if (cfg.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (auto& v : y.data) v += noise(rng);
  }
  y.clamp01();
  return y;
}

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  double mse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse <= 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  const int win = 11;
  if (a.height < win || a.width < win)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  static const std::vector<double> w = [] {
    const double sigma = 1.5;
    std::vector<double> g(11 * 11);
    double s = 0.0;
    for (int y = 0; y < 11; ++y)
      for (int x = 0; x < 11; ++x) {
        const double dy = y - 5, dx = x - 5;
        g[y * 11 + x] = std::exp(-(dy * dy + dx * dx) / (2 * sigma * sigma));
        s += g[y * 11 + x];
      }
    for (auto& v : g) v /= s;
    return g;
  }();
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  long count = 0;
  for (int c = 0; c < a.channels; ++c) {
    for (int y = 0; y + win <= a.height; ++y) {
      for (int x = 0; x + win <= a.width; ++x) {
        double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
        for (int i = 0; i < win; ++i)
          for (int j = 0; j < win; ++j) {
            const double wa = a.at(c, y + i, x + j);
            const double wb = b.at(c, y + i, x + j);
            const double wt = w[i * win + j];
            mu_a += wt * wa;
            mu_b += wt * wb;
            aa += wt * wa * wa;
            bb += wt * wb * wb;
            ab += wt * wa * wb;
          }
        const double va = aa - mu_a * mu_a;
        const double vb = bb - mu_b * mu_b;
        const double cov = ab - mu_a * mu_b;
        total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                 ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

double kernel_psnr(const Kernel& k_est, const Kernel& k_gt) {
  if (k_est.side != k_gt.side)
    throw std::invalid_argument("kernel_psnr: size mismatch " +
                                std::to_string(k_est.side) + " vs " +
                                std::to_string(k_gt.side));
  double mse = 0.0;
  for (size_t i = 0; i < k_gt.grid.size(); ++i) {
    const double d = k_est.grid[i] - k_gt.grid[i];
    mse += d * d;
  }
  mse /= static_cast<double>(k_gt.grid.size());
  if (mse <= 0.0) return 100.0;
  const double peak = *std::max_element(k_gt.grid.begin(), k_gt.grid.end());
  return std::min(100.0, 10.0 * std::log10(peak * peak / mse));
}

namespace {

double cubic_weight(double t) {
  // Catmull-Rom, a = -0.5
  const double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
  if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
  return 0.0;
}

}  // namespace

Image bicubic_upsample(const Image& y, int s) {
  if (s < 1) throw std::invalid_argument("bicubic_upsample: scale must be >= 1");
  if (s == 1) return y;
  const int oh = y.height * s, ow = y.width * s;
  Image out(oh, ow, y.channels);
  for (int c = 0; c < y.channels; ++c) {
    for (int oy = 0; oy < oh; ++oy) {
      const double sy = (oy + 0.5) / s - 0.5;
      const int iy = static_cast<int>(std::floor(sy));
      for (int ox = 0; ox < ow; ++ox) {
        const double sx = (ox + 0.5) / s - 0.5;
        const int ix = static_cast<int>(std::floor(sx));
        double acc = 0.0;
        for (int dy = -1; dy <= 2; ++dy) {
          const double wy = cubic_weight(sy - (iy + dy));
          if (wy == 0.0) continue;
          const int py = std::clamp(iy + dy, 0, y.height - 1);
          for (int dx = -1; dx <= 2; ++dx) {
            const double wx = cubic_weight(sx - (ix + dx));
            if (wx == 0.0) continue;
            const int px = std::clamp(ix + dx, 0, y.width - 1);
            acc += wy * wx * y.at(c, py, px);
          }
        }
        out.at(c, oy, ox) = std::clamp(acc, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace mlmc
