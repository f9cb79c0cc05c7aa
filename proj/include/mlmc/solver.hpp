#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mlmc/degradation.hpp"
#include "mlmc/image.hpp"
#include "mlmc/models.hpp"
#include "mlmc/optim.hpp"
#include "mlmc/sampler.hpp"

namespace mlmc {

struct SolverConfig {
  int outer_iters = 100;  // I
  int mcka_steps = 1;     // L
  int meta_updates = 5;   // Q
  int image_steps = 5;    // P
  int mc_samples = 10;    // T
  // gradient steps taken on each meta objective (the kernel part is cheap to
  // re-evaluate against the frozen image snapshots, and one step per update
  // is far too slow for the kernel to converge within the outer budget)
  int meta_kernel_steps = 20;
  double lr_kernel_mc = 0.5;
  double lr_kernel_ml = 0.5;
  double lr_image = 0.005;
  // per-outer-iteration decay of the kernel steps: lr / (1 + decay*(i-1)).
  // The sampled-kernel prior stabilizes the early iterations but competes
  // with data-driven refinement once the restorer has converged; the meta
  // step needs annealing because the noise-normalized loss keeps its
  // gradient magnitude roughly constant even near convergence.
  double lr_mc_decay = 0.0;
  double lr_ml_decay = 0.0;
  // outer iterations during which the meta/greedy kernel steps are gated
  // off. Early on the restorer output is noise and the reconstruction
  // gradient drives the kernel to a softmax spike it cannot recover from;
  // the sampled prior owns the kernel until this window ends.
  int lr_ml_warmup = 0;
  double epsilon = 1e-5;  // weight stabilizer
  double rho_reg = 1e-4;
  double eta = 0.67;
  // L2 penalty on centered kernel-generator logits. The softmax Jacobian
  // vanishes at a saturated one-hot output, which would freeze the kernel
  // permanently; this keeps the logits in the responsive region.
  double logit_reg = 1e-3;
  std::vector<double> meta_weights;  // empty = all ones, length P
  int scale = 2;
  SamplingRanges ranges;
  std::uint64_t seed = 0;
  bool no_mc = false;
  bool no_meta = false;
  bool ood_kernels = false;
  bool normalize_weights = false;      // default raw 1/nu
  bool bicubic_first_weights = false;  // use bicubic(y) as x at i=1
  bool unroll_kernel_per_step = false; // recompute k per p instead of per q

  int kernel_side() const { return 4 * scale + 3; }
  SamplingRanges effective_ranges() const {
    return ood_kernels ? SamplingRanges::out_of_distribution() : ranges;
  }
  std::vector<double> effective_meta_weights() const;
  void validate() const;
};

struct TraceRecord {
  static constexpr double nan_ = std::numeric_limits<double>::quiet_NaN();

  int outer = 0;
  std::string phase;  // "MCKA" | "MLAO"
  double loss_mc = nan_;
  double loss_re = nan_;
  double loss_ml = nan_;
  double sigma2 = nan_;
  double kernel_psnr = nan_;
  double image_psnr = nan_;
  double wall_ms = 0.0;
};

struct SolveResult {
  Image x;
  Kernel k;
  std::vector<TraceRecord> trace;
  double initial_recon_loss = 0.0;  // ||y - (x (x) k) v s||_F^2 at i=0
  double final_recon_loss = 0.0;
};

// omega = 1 / nu with nu = LR reconstruction error + kernel MSE term + eps.
std::vector<double> compute_mc_weights(const Image& y, const Image& x,
                                       const std::vector<Kernel>& batch,
                                       const Kernel& k_est, int s,
                                       double epsilon,
                                       bool normalize = false);

class Solver {
 public:
  Solver(Image y, SolverConfig cfg);

  void mcka_phase();
  void mlao_phase();
  SolveResult run(const Image* gt_image = nullptr,
                  const Kernel* gt_kernel = nullptr);

  double recon_loss() const;  // current squared-Frobenius LR residual

  const KernelGenerator& kernel_net() const { return *gk_; }
  const ImageRestorer& image_net() const { return *gx_; }
  // per-p losses and meta-loss of the most recent meta-update
  const std::vector<double>& last_step_losses() const {
    return last_step_losses_;
  }
  double last_meta_loss() const { return last_meta_loss_; }
  long mcka_kernel_steps() const { return mcka_kernel_steps_; }
  long mlao_kernel_steps() const { return mlao_kernel_steps_; }
  long mlao_image_steps() const { return mlao_image_steps_; }
  const std::vector<TraceRecord>& trace() const { return trace_; }

 private:
  TraceRecord& begin_record(const char* phase);

  Image y_;
  SolverConfig cfg_;
  std::mt19937_64 rng_;
  std::unique_ptr<KernelGenerator> gk_;
  std::unique_ptr<ImageRestorer> gx_;
  // one parameter vector, but per-phase Adam moments: the MC and meta losses
  // have very different gradient statistics, and momentum leaking from one
  // phase into the other's step destabilizes the kernel
  AdamOptimizer adam_k_mc_;
  AdamOptimizer adam_k_ml_;
  AdamOptimizer adam_x_;
  std::vector<TraceRecord> trace_;
  std::vector<double> last_step_losses_;
  double last_meta_loss_ = 0.0;
  int outer_ = 0;
  long mcka_kernel_steps_ = 0;
  long mlao_kernel_steps_ = 0;
  long mlao_image_steps_ = 0;
};

SolveResult solve(const Image& y, const SolverConfig& cfg,
                  const Image* gt_image = nullptr,
                  const Kernel* gt_kernel = nullptr);

// CSV columns: i,phase,loss_mc,loss_re,loss_ml,sigma2,kernel_psnr,image_psnr,
// wall_ms; NaN fields are written empty and parsed back as NaN.
void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace_csv(std::istream& is);

}  // namespace mlmc
