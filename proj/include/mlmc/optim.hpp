#pragma once

#include <string>
#include <vector>

#include "mlmc/tensor.hpp"

namespace mlmc {

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed set of parameter tensors. Gradients are
// read from the tensors themselves (populated by backward()).
class AdamOptimizer {
 public:
  void add_param(Tensor p);
  const std::vector<Tensor>& params() const { return params_; }
  long step_count() const { return steps_; }

  // One update; throws on a non-finite gradient, naming the parameter.
  void step(double lr);

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> states_;
  long steps_ = 0;
};

}  // namespace mlmc
