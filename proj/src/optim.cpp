#include "mlmc/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace mlmc {

void AdamOptimizer::add_param(Tensor p) {
  AdamState s;
  s.m.assign(p.size(), 0.0);
  s.v.assign(p.size(), 0.0);
  params_.push_back(std::move(p));
  states_.push_back(std::move(s));
}

void AdamOptimizer::step(double lr) {
  if (lr <= 0.0) throw std::invalid_argument("adam: learning rate must be > 0");
  // validate every gradient before touching any parameter
  for (size_t i = 0; i < params_.size(); ++i) {
    const auto& g = params_[i].grad();
    if (static_cast<int>(g.size()) != params_[i].size())
      throw std::runtime_error("adam: missing gradient for parameter '" +
                               params_[i].name() + "'");
    for (double gv : g) {
      if (!std::isfinite(gv))
        throw std::runtime_error("adam: non-finite gradient in parameter '" +
                                 params_[i].name() + "'");
    }
  }
  for (size_t i = 0; i < params_.size(); ++i) {
    auto& s = states_[i];
    auto& val = params_[i].node()->value;
    const auto& g = params_[i].grad();
    s.t += 1;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
    for (size_t j = 0; j < val.size(); ++j) {
      s.m[j] = s.beta1 * s.m[j] + (1.0 - s.beta1) * g[j];
      s.v[j] = s.beta2 * s.v[j] + (1.0 - s.beta2) * g[j] * g[j];
      const double mhat = s.m[j] / c1;
      const double vhat = s.v[j] / c2;
      val[j] -= lr * mhat / (std::sqrt(vhat) + s.eps);
    }
  }
  steps_ += 1;
}

}  // namespace mlmc
