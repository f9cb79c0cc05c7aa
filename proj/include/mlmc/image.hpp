#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mlmc {

// Planar image, values in [0,1], layout [C][H][W].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0);

  double& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t size() const { return data.size(); }
  void clamp01();
};

// Nonnegative square grid summing to 1, odd side (4s+3 in the solver).
struct Kernel {
  int side = 0;
  std::vector<double> grid;

  Kernel() = default;
  explicit Kernel(int side, double fill = 0.0);

  double& at(int y, int x) { return grid[static_cast<size_t>(y) * side + x]; }
  double at(int y, int x) const {
    return grid[static_cast<size_t>(y) * side + x];
  }
  double sum() const;
  void normalize();  // throws if the total mass is not positive

  static Kernel delta(int side);
};

}  // namespace mlmc
