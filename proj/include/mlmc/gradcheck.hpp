#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlmc/tensor.hpp"

namespace mlmc {

struct GradCheckResult {
  std::string op;
  double max_rel_err;
};

// Names accepted by grad_check. Conv variants are listed separately so each
// stride/padding path gets its own finite-difference sweep.
const std::vector<std::string>& registered_ops();

// Max over `trials` random cases of the relative error between analytic and
// central finite-difference gradients (perturbation 1e-5, dims <= 6).
double grad_check(const std::string& op_name, int trials, std::uint64_t seed);

std::vector<GradCheckResult> grad_check_all(int trials, std::uint64_t seed);

}  // namespace mlmc
