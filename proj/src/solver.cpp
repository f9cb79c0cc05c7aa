#include "mlmc/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mlmc {

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double sq_residual(const Image& y, const Image& x, const Kernel& k, int s) {
  Image pred = downsample(blur(x, k), s);
  double acc = 0.0;
  for (size_t i = 0; i < y.data.size(); ++i) {
    const double d = y.data[i] - pred.data[i];
    acc += d * d;
  }
  return acc;
}

void require_finite(double v, const std::string& where) {
  if (!std::isfinite(v))
    throw std::runtime_error("non-finite loss at " + where);
}

// sum of squares about the mean, as a graph node (softmax is shift-invariant,
// so only the spread of the logits is penalized)
Tensor centered_sqnorm(const Tensor& v, int n) {
  Tensor m = mean(v);
  return subtract(sqnorm(v),
                  scalar_multiply(multiply(m, m), static_cast<double>(n)));
}

}  // namespace

std::vector<double> SolverConfig::effective_meta_weights() const {
  if (meta_weights.empty())
    return std::vector<double>(image_steps, 1.0);
  return meta_weights;
}

void SolverConfig::validate() const {
  if (outer_iters < 0) throw std::invalid_argument("config: I must be >= 0");
  if (mcka_steps < 1 || meta_updates < 1 || image_steps < 1 || mc_samples < 1)
    throw std::invalid_argument("config: L, Q, P, T must be >= 1");
  if (meta_kernel_steps < 1)
    throw std::invalid_argument("config: meta_kernel_steps must be >= 1");
  if (lr_kernel_mc <= 0 || lr_kernel_ml <= 0 || lr_image <= 0)
    throw std::invalid_argument("config: learning rates must be > 0");
  if (epsilon <= 0) throw std::invalid_argument("config: epsilon must be > 0");
  if (logit_reg < 0)
    throw std::invalid_argument("config: logit_reg must be >= 0");
  if (lr_mc_decay < 0)
    throw std::invalid_argument("config: lr_mc_decay must be >= 0");
  if (lr_ml_decay < 0)
    throw std::invalid_argument("config: lr_ml_decay must be >= 0");
  if (lr_ml_warmup < 0)
    throw std::invalid_argument("config: lr_ml_warmup must be >= 0");
  if (scale < 1 || scale > 4)
    throw std::invalid_argument("config: scale must be in [1,4]");
  if (!meta_weights.empty() &&
      static_cast<int>(meta_weights.size()) != image_steps)
    throw std::invalid_argument("config: meta_weights length must equal P");
}

std::vector<double> compute_mc_weights(const Image& y, const Image& x,
                                       const std::vector<Kernel>& batch,
                                       const Kernel& k_est, int s,
                                       double epsilon, bool normalize) {
  if (batch.empty())
    throw std::invalid_argument("compute_mc_weights: empty kernel batch");
  if (epsilon <= 0.0)
    throw std::invalid_argument("compute_mc_weights: epsilon must be > 0");
  std::vector<double> w(batch.size());
  for (size_t t = 0; t < batch.size(); ++t) {
    double nu = sq_residual(y, x, batch[t], s) + epsilon;
    for (size_t i = 0; i < k_est.grid.size(); ++i) {
      const double d = k_est.grid[i] - batch[t].grid[i];
      nu += d * d;
    }
    w[t] = 1.0 / nu;
  }
  if (normalize) {
    double z = 0.0;
    for (double v : w) z += v;
    for (double& v : w) v /= z;
  }
  return w;
}

Solver::Solver(Image y, SolverConfig cfg)
    : y_(std::move(y)), cfg_(std::move(cfg)), rng_(cfg_.seed) {
  cfg_.validate();
  if (y_.height < 16 || y_.width < 16)
    throw std::invalid_argument("solver: LR image dims must each be >= 16");
  gk_ = std::make_unique<KernelGenerator>(cfg_.kernel_side(), rng_);
  gx_ = std::make_unique<ImageRestorer>(y_.height * cfg_.scale,
                                        y_.width * cfg_.scale, y_.channels,
                                        rng_);
  for (const auto& p : gk_->params()) {
    adam_k_mc_.add_param(p);
    adam_k_ml_.add_param(p);
  }
  for (const auto& p : gx_->params()) adam_x_.add_param(p);
}

TraceRecord& Solver::begin_record(const char* phase) {
  TraceRecord r;
  r.outer = outer_;
  r.phase = phase;
  trace_.push_back(std::move(r));
  return trace_.back();
}

double Solver::recon_loss() const {
  return sq_residual(y_, gx_->forward_image(), gk_->forward_kernel(),
                     cfg_.scale);
}

void Solver::mcka_phase() {
  const double t0 = now_ms();
  TraceRecord& rec = begin_record("MCKA");
  if (cfg_.no_mc) {
    rec.wall_ms = now_ms() - t0;
    return;
  }
  // batch drawn once per outer iteration, before the l-loop
  auto batch = sample_kernel_batch(rng_, cfg_.mc_samples, cfg_.scale,
                                   cfg_.kernel_side(),
                                   cfg_.effective_ranges());
  // While the restorer is still warming up its output is noise, and weights
  // computed against it are uninformative; the bicubic upsample is a usable
  // stand-in until the meta phase unlocks.
  const bool restorer_untrusted =
      outer_ <= std::max(1, cfg_.lr_ml_warmup);
  Image x_cur = (cfg_.bicubic_first_weights && restorer_untrusted)
                    ? bicubic_upsample(y_, cfg_.scale)
                    : gx_->forward_image();
  const int side = cfg_.kernel_side();
  for (int l = 1; l <= cfg_.mcka_steps; ++l) {
    Tensor lg = gk_->logits();
    Tensor k_pred = reshape(softmax_flat(lg), {side, side});
    Kernel k_est = kernel_from_tensor(k_pred);
    auto weights =
        compute_mc_weights(y_, x_cur, batch, k_est, cfg_.scale, cfg_.epsilon,
                           cfg_.normalize_weights);
    Tensor loss;
    for (size_t t = 0; t < batch.size(); ++t) {
      Tensor term = scalar_multiply(
          sqnorm(subtract(k_pred, tensor_from_kernel(batch[t]))), weights[t]);
      loss = loss.defined() ? add(loss, term) : term;
    }
    if (!std::isfinite(loss.item()))
      throw std::runtime_error("non-finite MCKA loss at (i=" +
                               std::to_string(outer_) + ", l=" +
                               std::to_string(l) + ")");
    Tensor total =
        cfg_.logit_reg > 0
            ? add(loss, scalar_multiply(centered_sqnorm(lg, side * side),
                                        cfg_.logit_reg))
            : loss;
    backward(total);
    adam_k_mc_.step(cfg_.lr_kernel_mc /
                    (1.0 + cfg_.lr_mc_decay * std::max(0, outer_ - 1)));
    ++mcka_kernel_steps_;
    rec.loss_mc = loss.item();
  }
  rec.wall_ms = now_ms() - t0;
}

void Solver::mlao_phase() {
  const double t0 = now_ms();
  TraceRecord& rec = begin_record("MLAO");
  const auto omega = cfg_.effective_meta_weights();
  const int P = cfg_.image_steps, Q = cfg_.meta_updates;

  const int side = cfg_.kernel_side();
  auto logit_penalty = [&](const Tensor& lg) {
    return scalar_multiply(centered_sqnorm(lg, side * side), cfg_.logit_reg);
  };

  // Kernel steps are gated off entirely during the warmup window: while the
  // restorer output is still noise the reconstruction gradient drives the
  // kernel toward a spike, and the softmax saturates past recovery. Decay
  // counts from the end of the window.
  const bool kernel_gated = outer_ <= cfg_.lr_ml_warmup && outer_ >= 1;
  const double lr_ml =
      cfg_.lr_kernel_ml /
      (1.0 + cfg_.lr_ml_decay *
                 std::max(0, outer_ - cfg_.lr_ml_warmup - 1));
  for (int q = 1; q <= Q; ++q) {
    Tensor k_q, lg_q;
    Kernel k_val;
    if (!cfg_.unroll_kernel_per_step && !cfg_.no_meta) {
      lg_q = gk_->logits();  // held fixed across the inner loop
      k_q = reshape(softmax_flat(lg_q), {side, side});
      k_val = kernel_from_tensor(k_q);
    }
    std::vector<Tensor> x_snaps;  // constants: phi_k's gradient ignores phi_x
    std::vector<double> sigma2s;
    last_step_losses_.clear();
    for (int p = 1; p <= P; ++p) {
      Tensor k_p = k_q, lg_p = lg_q;
      if (cfg_.unroll_kernel_per_step || cfg_.no_meta) {
        lg_p = gk_->logits();
        k_p = reshape(softmax_flat(lg_p), {side, side});
        k_val = kernel_from_tensor(k_p);
      }
      Tensor x_p = gx_->forward();
      const double sigma2 =
          estimate_noise_variance(y_, image_from_tensor(x_p), k_val,
                                  cfg_.scale);
      Tensor loss_p = hyper_laplacian_loss(x_p, y_, k_p, cfg_.scale, sigma2,
                                           cfg_.rho_reg, cfg_.eta);
      if (!std::isfinite(loss_p.item()))
        throw std::runtime_error("non-finite MLAO loss at (i=" +
                                 std::to_string(outer_) + ", q=" +
                                 std::to_string(q) + ", p=" +
                                 std::to_string(p) + ")");
      // the penalty has no image-net dependence, so including it here leaves
      // the adam_x step unchanged while keeping the greedy-mode kernel honest
      backward(cfg_.no_meta && cfg_.logit_reg > 0
                   ? add(loss_p, logit_penalty(lg_p))
                   : loss_p);
      adam_x_.step(cfg_.lr_image);
      ++mlao_image_steps_;
      if (cfg_.no_meta) {
        // greedy baseline: kernel follows each individual reconstruction loss
        if (!kernel_gated) {
          adam_k_ml_.step(lr_ml);
          ++mlao_kernel_steps_;
        }
        rec.loss_ml = loss_p.item();
      } else {
        last_step_losses_.push_back(loss_p.item());
        x_snaps.emplace_back(x_p.shape(), x_p.value());
        sigma2s.push_back(sigma2);
      }
      rec.loss_re = loss_p.item();
      rec.sigma2 = sigma2;
    }
    if (!cfg_.no_meta && !kernel_gated) {
      // several gradient steps on the meta objective per update; the image
      // snapshots are constants, so each step only rebuilds the kernel graph
      for (int r = 1; r <= cfg_.meta_kernel_steps; ++r) {
        Tensor lg_r = gk_->logits();
        Tensor k_r = reshape(softmax_flat(lg_r), {side, side});
        Tensor meta;
        for (int p = 0; p < P; ++p) {
          Tensor term = scalar_multiply(
              hyper_laplacian_loss(x_snaps[p], y_, k_r, cfg_.scale, sigma2s[p],
                                   cfg_.rho_reg, cfg_.eta),
              omega[p]);
          meta = meta.defined() ? add(meta, term) : term;
        }
        meta = scalar_multiply(meta, 1.0 / P);
        require_finite(meta.item(), "(i=" + std::to_string(outer_) + ", q=" +
                                        std::to_string(q) + ") meta-loss");
        if (r == 1) {
          rec.loss_ml = meta.item();
          last_meta_loss_ = meta.item();
        }
        backward(cfg_.logit_reg > 0 ? add(meta, logit_penalty(lg_r)) : meta);
        adam_k_ml_.step(lr_ml);
        ++mlao_kernel_steps_;
      }
    }
  }
  rec.wall_ms = now_ms() - t0;
}

SolveResult Solver::run(const Image* gt_image, const Kernel* gt_kernel) {
  SolveResult res;
  res.initial_recon_loss = recon_loss();
  for (outer_ = 1; outer_ <= cfg_.outer_iters; ++outer_) {
    mcka_phase();
    mlao_phase();
    if (gt_kernel)
      trace_.back().kernel_psnr = kernel_psnr(gk_->forward_kernel(), *gt_kernel);
    if (gt_image)
      trace_.back().image_psnr = psnr(gx_->forward_image(), *gt_image);
  }
  res.x = gx_->forward_image();
  res.k = gk_->forward_kernel();
  res.final_recon_loss = sq_residual(y_, res.x, res.k, cfg_.scale);
  res.trace = trace_;
  return res;
}

SolveResult solve(const Image& y, const SolverConfig& cfg,
                  const Image* gt_image, const Kernel* gt_kernel) {
  Solver s(y, cfg);
  return s.run(gt_image, gt_kernel);
}

namespace {

void put_field(std::ostream& os, double v, bool lead_comma = true) {
  if (lead_comma) os << ",";
  if (std::isfinite(v)) os << std::setprecision(17) << v;
}

}  // namespace

void write_trace_csv(std::ostream& os, const std::vector<TraceRecord>& trace) {
  os << "i,phase,loss_mc,loss_re,loss_ml,sigma2,kernel_psnr,image_psnr,wall_ms\n";
  for (const auto& r : trace) {
    os << r.outer << "," << r.phase;
    put_field(os, r.loss_mc);
    put_field(os, r.loss_re);
    put_field(os, r.loss_ml);
    put_field(os, r.sigma2);
    put_field(os, r.kernel_psnr);
    put_field(os, r.image_psnr);
    put_field(os, r.wall_ms);
    os << "\n";
  }
}

std::vector<TraceRecord> read_trace_csv(std::istream& is) {
  std::vector<TraceRecord> out;
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("trace csv: missing header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    TraceRecord r;
    auto next = [&]() {
      if (!std::getline(ls, field, ','))
        throw std::runtime_error("trace csv: truncated row");
      return field;
    };
    r.outer = std::stoi(next());
    r.phase = next();
    auto num = [&]() {
      next();
      return field.empty() ? TraceRecord::nan_ : std::stod(field);
    };
    r.loss_mc = num();
    r.loss_re = num();
    r.loss_ml = num();
    r.sigma2 = num();
    r.kernel_psnr = num();
    r.image_psnr = num();
    r.wall_ms = num();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace mlmc
