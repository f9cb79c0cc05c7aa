// mlmc: blind super-resolution benchmark harness.
//
// Subcommands: synth, solve, eval, gradcheck, bench.
// Exit codes: 0 success, 1 usage/file error, 2 numerical abort.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "mlmc/degradation.hpp"
#include "mlmc/gradcheck.hpp"
#include "mlmc/io.hpp"
#include "mlmc/sampler.hpp"
#include "mlmc/solver.hpp"

namespace fs = std::filesystem;
using namespace mlmc;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("MLMC_SEED"))
    return std::strtoull(env, nullptr, 10);
  return 0;
}

double wall_seconds(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

Image center_crop(const Image& img, int h, int w) {
  const int y0 = (img.height - h) / 2, x0 = (img.width - w) / 2;
  Image out(h, w, img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

// reflect-101 pad on the bottom/right so dims hit a multiple of `mult`
Image pad_to_multiple(const Image& img, int mult) {
  const int h = (img.height + mult - 1) / mult * mult;
  const int w = (img.width + mult - 1) / mult * mult;
  if (h == img.height && w == img.width) return img;
  Image out(h, w, img.channels);
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < h; ++y) {
      int sy = y < img.height ? y : 2 * img.height - 2 - y;
      for (int x = 0; x < w; ++x) {
        int sx = x < img.width ? x : 2 * img.width - 2 - x;
        out.at(c, y, x) = img.at(c, sy, sx);
      }
    }
  return out;
}

Image luma(const Image& img) {
  if (img.channels == 1) return img;
  Image out(img.height, img.width, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(0, y, x) = 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) +
                        0.114 * img.at(2, y, x);
  return out;
}

// divisibility the restorer needs from the HR plane, expressed on the LR side
int lr_multiple(int scale) {
  const int hr_mult = 1 << ImageRestorer::kDepth;
  return hr_mult / std::gcd(scale, hr_mult);
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(prec) << v;
  return ss.str();
}

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
  std::string hr_path, out_dir, kernel_mode = "gaussian";
  SolverConfig cfg;
  double noise_sigma = 0.0;
  int motion_steps = 20;
};

int run_synth(const SynthArgs& a) {
  Image hr = read_image(a.hr_path);
  const int mult = a.cfg.scale * (1 << ImageRestorer::kDepth);
  if (hr.height < 32 || hr.width < 32) {
    std::cerr << "synth: image " << a.hr_path << " is " << hr.height << "x"
              << hr.width << "; need at least 32x32\n";
    return kExitUsage;
  }
  const int ch = hr.height / mult * mult, cw = hr.width / mult * mult;
  if (ch == 0 || cw == 0) {
    std::cerr << "synth: image " << a.hr_path << " too small to crop to a "
              << mult << "-multiple\n";
    return kExitUsage;
  }
  hr = center_crop(hr, ch, cw);

  std::mt19937_64 rng(a.cfg.seed);
  const int side = a.cfg.kernel_side();
  Kernel k;
  if (a.kernel_mode == "gaussian" || a.kernel_mode == "ood") {
    auto ranges = a.kernel_mode == "ood" ? SamplingRanges::out_of_distribution()
                                         : a.cfg.ranges;
    k = gaussian_kernel(sample_gaussian_params(rng, a.cfg.scale, ranges), side);
  } else if (a.kernel_mode == "motion") {
    k = motion_kernel(rng, side, a.motion_steps);
  } else if (a.kernel_mode == "delta") {
    k = Kernel::delta(side);
  } else {
    std::cerr << "synth: unknown kernel mode '" << a.kernel_mode << "'\n";
    return kExitUsage;
  }

  DegradationConfig dc;
  dc.scale = a.cfg.scale;
  dc.noise_sigma = a.noise_sigma;
  dc.seed = a.cfg.seed;
  Image lr = degrade(hr, k, dc, rng);

  fs::create_directories(a.out_dir);
  const fs::path out(a.out_dir);
  write_image((out / "hr.png").string(), hr);
  write_image((out / "lr.png").string(), lr);
  write_kernel_text((out / "kernel_gt.txt").string(), k);
  write_kernel_image((out / "kernel_gt.png").string(), k);

  KvMap man = config_to_kv(a.cfg);
  man["input.hr"] = a.hr_path;
  man["kernel_mode"] = a.kernel_mode;
  man["noise_sigma"] = format_double(a.noise_sigma);
  man["out.hr"] = (out / "hr.png").string();
  man["out.lr"] = (out / "lr.png").string();
  man["out.kernel_gt"] = (out / "kernel_gt.txt").string();
  man["out.kernel_gt_image"] = (out / "kernel_gt.png").string();
  write_kv((out / "manifest.txt").string(), man);

  std::cout << "wrote " << lr.height << "x" << lr.width << " LR and " << side
            << "x" << side << " kernel to " << a.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------- solve ----

struct SolveArgs {
  std::string lr_path, out_dir, config_path, gt_image_path, gt_kernel_path;
  SolverConfig cfg;
};

int run_solve(const SolveArgs& a) {
  Image lr = read_image(a.lr_path);
  Image gt_image;
  Kernel gt_kernel;
  const bool have_gti = !a.gt_image_path.empty();
  const bool have_gtk = !a.gt_kernel_path.empty();
  if (have_gti) gt_image = read_image(a.gt_image_path);
  if (have_gtk) gt_kernel = read_kernel_text(a.gt_kernel_path);

  const int mult = lr_multiple(a.cfg.scale);
  Image lr_in = pad_to_multiple(lr, mult);

  fs::create_directories(a.out_dir);
  const fs::path out(a.out_dir);
  const auto t0 = std::chrono::steady_clock::now();

  Solver solver(lr_in, a.cfg);
  SolveResult res;
  try {
    res = solver.run(have_gti && lr_in.height == lr.height &&
                             lr_in.width == lr.width
                         ? &gt_image
                         : nullptr,
                     have_gtk ? &gt_kernel : nullptr);
  } catch (const std::exception& e) {
    std::cerr << "solve aborted: " << e.what() << "\n";
    std::ofstream tf(out / "trace.csv");
    write_trace_csv(tf, solver.trace());
    return kExitNumerical;
  }

  // padding was added bottom/right, so crop the SR plane from the origin
  if (lr_in.height != lr.height || lr_in.width != lr.width) {
    Image cropped(lr.height * a.cfg.scale, lr.width * a.cfg.scale,
                  res.x.channels);
    for (int c = 0; c < cropped.channels; ++c)
      for (int y = 0; y < cropped.height; ++y)
        for (int x = 0; x < cropped.width; ++x)
          cropped.at(c, y, x) = res.x.at(c, y, x);
    res.x = cropped;
  }

  write_image((out / "sr.png").string(), res.x);
  write_kernel_text((out / "kernel_est.txt").string(), res.k);
  write_kernel_image((out / "kernel_est.png").string(), res.k);
  {
    std::ofstream tf(out / "trace.csv");
    write_trace_csv(tf, res.trace);
  }

  KvMap man = config_to_kv(a.cfg);
  man["input.lr"] = a.lr_path;
  if (have_gti) man["input.gt_image"] = a.gt_image_path;
  if (have_gtk) man["input.gt_kernel"] = a.gt_kernel_path;
  man["out.sr"] = (out / "sr.png").string();
  man["out.kernel_est"] = (out / "kernel_est.txt").string();
  man["out.kernel_est_image"] = (out / "kernel_est.png").string();
  man["out.trace"] = (out / "trace.csv").string();
  man["recon_loss.initial"] = format_double(res.initial_recon_loss);
  man["recon_loss.final"] = format_double(res.final_recon_loss);
  man["wall_seconds"] = format_double(wall_seconds(t0));

  std::cout << "recon loss " << fmt(res.initial_recon_loss) << " -> "
            << fmt(res.final_recon_loss) << " in " << fmt(wall_seconds(t0), 1)
            << "s\n";
  if (have_gti) {
    const double p = psnr(res.x, gt_image), s = ssim(res.x, gt_image);
    man["metric.image_psnr"] = format_double(p);
    man["metric.image_ssim"] = format_double(s);
    std::cout << "image psnr " << fmt(p, 2) << " dB, ssim " << fmt(s) << "\n";
  }
  if (have_gtk) {
    const double kp = kernel_psnr(res.k, gt_kernel);
    man["metric.kernel_psnr"] = format_double(kp);
    std::cout << "kernel psnr " << fmt(kp, 2) << " dB\n";
  }
  write_kv((out / "manifest.txt").string(), man);
  return 0;
}

// ----------------------------------------------------------------- eval ----

struct EvalArgs {
  std::string sr_path, hr_path, kest_path, kgt_path, out_csv;
  bool use_luma = false;
};

int run_eval(const EvalArgs& a) {
  Image sr = read_image(a.sr_path);
  Image hr = read_image(a.hr_path);
  if (sr.height != hr.height || sr.width != hr.width ||
      sr.channels != hr.channels) {
    std::cerr << "eval: shape mismatch " << sr.height << "x" << sr.width << "x"
              << sr.channels << " vs " << hr.height << "x" << hr.width << "x"
              << hr.channels << "\n";
    return kExitUsage;
  }
  if (a.use_luma) {
    sr = luma(sr);
    hr = luma(hr);
  }
  const double p = psnr(sr, hr), s = ssim(sr, hr);
  std::string row = format_double(p) + "," + format_double(s);
  std::string hdr = "image_psnr,image_ssim";
  std::cout << "image_psnr " << fmt(p, 2) << "\nimage_ssim " << fmt(s) << "\n";
  if (!a.kest_path.empty() && !a.kgt_path.empty()) {
    const double kp =
        kernel_psnr(read_kernel_text(a.kest_path), read_kernel_text(a.kgt_path));
    std::cout << "kernel_psnr " << fmt(kp, 2) << "\n";
    row += "," + format_double(kp);
    hdr += ",kernel_psnr";
  }
  if (!a.out_csv.empty()) {
    std::ofstream f(a.out_csv);
    f << hdr << "\n" << row << "\n";
  }
  return 0;
}

// ------------------------------------------------------------ gradcheck ----

int run_gradcheck(std::uint64_t seed, int trials) {
  auto results = grad_check_all(trials, seed);
  bool ok = true;
  std::cout << std::left << std::setw(20) << "op" << "max_rel_err\n";
  for (const auto& r : results) {
    const bool pass = r.max_rel_err < 1e-6;
    ok = ok && pass;
    std::cout << std::left << std::setw(20) << r.op << std::scientific
              << std::setprecision(3) << r.max_rel_err
              << (pass ? "" : "  FAIL") << "\n";
  }
  std::cout << (ok ? "all ops pass" : "gradcheck FAILED") << "\n";
  return ok ? 0 : kExitNumerical;
}

// ---------------------------------------------------------------- bench ----

// procedural HR test scene: smooth shading plus piecewise-constant patches,
// so there is both low-frequency structure and edges to hang detail on
Image synth_scene(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Image img(h, w, 1);
  const double pi2 = 2 * 3.14159265358979323846;
  const double fx = pi2 * (2 + 6 * U(rng)) / w;
  const double fy = pi2 * (2 + 6 * U(rng)) / h;
  const double ph1 = U(rng) * pi2, ph2 = U(rng) * pi2;
  struct Patch {
    int y0, x0, y1, x1;
    double v;
  };
  std::vector<Patch> patches;
  for (int i = 0; i < 8; ++i) {
    const int y0 = static_cast<int>(U(rng) * h * 0.8);
    const int x0 = static_cast<int>(U(rng) * w * 0.8);
    patches.push_back({y0, x0, y0 + static_cast<int>(8 + U(rng) * h / 4),
                       x0 + static_cast<int>(8 + U(rng) * w / 4), U(rng)});
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = 0.35 + 0.2 * std::sin(fx * x + ph1) * std::sin(fy * y + ph2) +
                 0.2 * x / static_cast<double>(w) +
                 0.1 * y / static_cast<double>(h);
      for (const auto& p : patches)
        if (y >= p.y0 && y < p.y1 && x >= p.x0 && x < p.x1)
          v = 0.3 * v + 0.7 * p.v;
      img.at(0, y, x) = std::clamp(v, 0.02, 0.98);
    }
  return img;
}

struct BenchArgs {
  int seeds = 5;
  int iters = 30;
  double noise_sigma = 0.0;
  bool no_mc = false, no_meta = false;
  double rho_reg = 1e-4;
};

int run_bench(const BenchArgs& a) {
  std::cout << std::left << std::setw(6) << "seed" << std::setw(12)
            << "recon_ratio" << std::setw(10) << "psnr" << std::setw(10)
            << "bicubic" << std::setw(12) << "kernel_psnr" << "secs\n";
  for (int seed = 1; seed <= a.seeds; ++seed) {
    Image hr = synth_scene(128, 128, seed);
    std::mt19937_64 krng(seed + 1000);
    Kernel k_gt = gaussian_kernel(
        sample_gaussian_params(krng, 2, SamplingRanges::in_distribution()), 11);
    DegradationConfig dc;
    dc.scale = 2;
    dc.noise_sigma = a.noise_sigma;
    dc.seed = seed;
    std::mt19937_64 nrng(seed + 2000);
    Image y = degrade(hr, k_gt, dc, nrng);

    SolverConfig cfg;
    cfg.scale = 2;
    cfg.outer_iters = a.iters;
    cfg.seed = seed;
    cfg.no_mc = a.no_mc;
    cfg.no_meta = a.no_meta;
    cfg.rho_reg = a.rho_reg;

    const auto t0 = std::chrono::steady_clock::now();
    SolveResult res;
    try {
      res = solve(y, cfg, &hr, &k_gt);
    } catch (const std::exception& e) {
      std::cerr << "seed " << seed << " aborted: " << e.what() << "\n";
      return kExitNumerical;
    }
    const double secs = wall_seconds(t0);
    Image bic = bicubic_upsample(y, 2);
    std::cout << std::left << std::setw(6) << seed << std::setw(12)
              << fmt(res.final_recon_loss / res.initial_recon_loss)
              << std::setw(10) << fmt(psnr(res.x, hr), 2) << std::setw(10)
              << fmt(psnr(bic, hr), 2) << std::setw(12)
              << fmt(kernel_psnr(res.k, k_gt), 2) << fmt(secs, 1) << "\n";
  }
  return 0;
}

void add_config_options(CLI::App* cmd, SolverConfig& cfg, std::string& config_path) {
  cmd->add_option("--config", config_path, "key = value config file");
  cmd->add_option("--iters", cfg.outer_iters, "outer iterations I");
  cmd->add_option("--scale", cfg.scale, "downsampling factor s");
  cmd->add_option("--seed", cfg.seed, "RNG seed");
  cmd->add_option("--mc-samples", cfg.mc_samples, "kernels per MC batch T");
  cmd->add_option("--rho", cfg.rho_reg, "regularizer weight");
  cmd->add_option("--eta", cfg.eta, "regularizer exponent");
  cmd->add_option("--meta-kernel-steps", cfg.meta_kernel_steps,
                  "gradient steps per meta update");
  cmd->add_option("--lr-kernel-mc", cfg.lr_kernel_mc, "MC kernel step size");
  cmd->add_option("--lr-kernel-ml", cfg.lr_kernel_ml, "meta kernel step size");
  cmd->add_option("--lr-image", cfg.lr_image, "restorer step size");
  cmd->add_option("--lr-mc-decay", cfg.lr_mc_decay,
                  "per-iteration decay of the MC kernel step");
  cmd->add_option("--lr-ml-decay", cfg.lr_ml_decay,
                  "per-iteration decay of the meta kernel step");
  cmd->add_option("--lr-ml-warmup", cfg.lr_ml_warmup,
                  "iterations to ramp the meta kernel step from 0");
  cmd->add_option("--logit-reg", cfg.logit_reg,
                  "L2 penalty on centered kernel logits");
  cmd->add_flag("--no-mc", cfg.no_mc, "disable the MC kernel phase");
  cmd->add_flag("--no-meta", cfg.no_meta, "greedy kernel updates, no meta-loss");
  cmd->add_flag("--ood", cfg.ood_kernels, "sample out-of-distribution widths");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blind super-resolution via Monte Carlo kernel sampling"};
  app.require_subcommand(1);

  SynthArgs sa;
  SolveArgs va;
  EvalArgs ea;
  std::uint64_t gc_seed = default_seed();
  int gc_trials = 20;
  BenchArgs ba;
  std::string sa_config, va_config;
  sa.cfg.seed = va.cfg.seed = default_seed();

  auto* synth = app.add_subcommand("synth", "degrade an HR image into an LR pair");
  synth->add_option("--hr", sa.hr_path, "HR input image")->required();
  synth->add_option("--out", sa.out_dir, "output directory")->required();
  synth->add_option("--kernel-mode", sa.kernel_mode,
                    "gaussian | ood | motion | delta");
  synth->add_option("--noise", sa.noise_sigma, "noise sigma, fraction of peak");
  synth->add_option("--motion-steps", sa.motion_steps, "trajectory length");
  add_config_options(synth, sa.cfg, sa_config);

  auto* solve_cmd = app.add_subcommand("solve", "blind SR on an LR image");
  solve_cmd->add_option("--lr", va.lr_path, "LR input image")->required();
  solve_cmd->add_option("--out", va.out_dir, "output directory")->required();
  solve_cmd->add_option("--gt-image", va.gt_image_path, "HR ground truth");
  solve_cmd->add_option("--gt-kernel", va.gt_kernel_path,
                        "ground-truth kernel text matrix");
  add_config_options(solve_cmd, va.cfg, va_config);

  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM report");
  eval_cmd->add_option("--sr", ea.sr_path, "reconstruction")->required();
  eval_cmd->add_option("--hr", ea.hr_path, "ground truth")->required();
  eval_cmd->add_option("--kest", ea.kest_path, "estimated kernel");
  eval_cmd->add_option("--kgt", ea.kgt_path, "ground-truth kernel");
  eval_cmd->add_option("--out", ea.out_csv, "CSV output path");
  eval_cmd->add_flag("--luma", ea.use_luma, "metrics on Rec.601 luma");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference sweep");
  gradcheck->add_option("--seed", gc_seed, "RNG seed");
  gradcheck->add_option("--trials", gc_trials, "cases per op");

  auto* bench = app.add_subcommand("bench", "seeded scenario suite");
  bench->add_option("--seeds", ba.seeds, "number of seeds");
  bench->add_option("--iters", ba.iters, "outer iterations per run");
  bench->add_option("--noise", ba.noise_sigma, "noise sigma");
  bench->add_option("--rho", ba.rho_reg, "regularizer weight");
  bench->add_flag("--no-mc", ba.no_mc, "ablation: skip MC phase");
  bench->add_flag("--no-meta", ba.no_meta, "ablation: greedy kernel updates");

  CLI11_PARSE(app, argc, argv);

  try {
    // config file first, then re-parse so explicit flags win
    auto load_config = [&](const std::string& path, SolverConfig& cfg) {
      if (!path.empty()) {
        SolverConfig from_file;
        apply_kv(from_file, read_kv(path));
        cfg = from_file;
      }
    };
    if ((synth->parsed() && !sa_config.empty()) ||
        (solve_cmd->parsed() && !va_config.empty())) {
      load_config(sa_config, sa.cfg);
      load_config(va_config, va.cfg);
      app.clear();
      CLI11_PARSE(app, argc, argv);
    }

    if (synth->parsed()) return run_synth(sa);
    if (solve_cmd->parsed()) return run_solve(va);
    if (eval_cmd->parsed()) return run_eval(ea);
    if (gradcheck->parsed()) return run_gradcheck(gc_seed, gc_trials);
    if (bench->parsed()) return run_bench(ba);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    const std::string msg = e.what();
    return msg.find("non-finite") != std::string::npos ? kExitNumerical
                                                       : kExitUsage;
  }
  return 0;
}
