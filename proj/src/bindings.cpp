// Python bindings: numpy arrays in HxW or HxWxC float64 map to the planar
// Image type; kernels are plain 2D arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <random>
#include <sstream>

#include "mlmc/degradation.hpp"
#include "mlmc/gradcheck.hpp"
#include "mlmc/sampler.hpp"
#include "mlmc/solver.hpp"

namespace py = pybind11;
using namespace mlmc;

namespace {

Image image_from_array(const py::array_t<double>& arr) {
  auto buf = arr.request();
  if (buf.ndim != 2 && buf.ndim != 3)
    throw std::invalid_argument("expected a HxW or HxWxC array");
  const int h = static_cast<int>(buf.shape[0]);
  const int w = static_cast<int>(buf.shape[1]);
  const int c = buf.ndim == 3 ? static_cast<int>(buf.shape[2]) : 1;
  Image img(h, w, c);
  // force C-contiguity, then treat as HxWxC interleaved -> planar
  auto contig = py::array_t<double, py::array::c_style | py::array::forcecast>(arr);
  const double* p = static_cast<const double*>(contig.request().ptr);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img.at(ch, y, x) = p[(static_cast<size_t>(y) * w + x) * c + ch];
  return img;
}

py::array_t<double> array_from_image(const Image& img) {
  py::array_t<double> arr;
  if (img.channels == 1) {
    arr = py::array_t<double>({img.height, img.width});
    auto r = arr.mutable_unchecked<2>();
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) r(y, x) = img.at(0, y, x);
  } else {
    arr = py::array_t<double>({img.height, img.width, img.channels});
    auto r = arr.mutable_unchecked<3>();
    for (int c = 0; c < img.channels; ++c)
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) r(y, x, c) = img.at(c, y, x);
  }
  return arr;
}

Kernel kernel_from_array(const py::array_t<double>& arr) {
  auto buf = arr.request();
  if (buf.ndim != 2 || buf.shape[0] != buf.shape[1])
    throw std::invalid_argument("kernel must be a square 2D array");
  Kernel k(static_cast<int>(buf.shape[0]));
  auto contig = py::array_t<double, py::array::c_style | py::array::forcecast>(arr);
  const double* p = static_cast<const double*>(contig.request().ptr);
  std::copy(p, p + k.grid.size(), k.grid.begin());
  return k;
}

py::array_t<double> array_from_kernel(const Kernel& k) {
  py::array_t<double> arr({k.side, k.side});
  auto r = arr.mutable_unchecked<2>();
  for (int y = 0; y < k.side; ++y)
    for (int x = 0; x < k.side; ++x) r(y, x) = k.at(y, x);
  return arr;
}

SolverConfig config_from_kwargs(const py::kwargs& kw) {
  SolverConfig cfg;
  for (auto item : kw) {
    const std::string key = py::cast<std::string>(item.first);
    auto val = item.second;
    if (key == "iters") cfg.outer_iters = py::cast<int>(val);
    else if (key == "mcka_steps") cfg.mcka_steps = py::cast<int>(val);
    else if (key == "meta_updates") cfg.meta_updates = py::cast<int>(val);
    else if (key == "image_steps") cfg.image_steps = py::cast<int>(val);
    else if (key == "mc_samples") cfg.mc_samples = py::cast<int>(val);
    else if (key == "lr_kernel_mc") cfg.lr_kernel_mc = py::cast<double>(val);
    else if (key == "lr_kernel_ml") cfg.lr_kernel_ml = py::cast<double>(val);
    else if (key == "lr_image") cfg.lr_image = py::cast<double>(val);
    else if (key == "meta_kernel_steps") cfg.meta_kernel_steps = py::cast<int>(val);
    else if (key == "lr_mc_decay") cfg.lr_mc_decay = py::cast<double>(val);
    else if (key == "lr_ml_decay") cfg.lr_ml_decay = py::cast<double>(val);
    else if (key == "lr_ml_warmup") cfg.lr_ml_warmup = py::cast<int>(val);
    else if (key == "logit_reg") cfg.logit_reg = py::cast<double>(val);
    else if (key == "epsilon") cfg.epsilon = py::cast<double>(val);
    else if (key == "rho_reg") cfg.rho_reg = py::cast<double>(val);
    else if (key == "eta") cfg.eta = py::cast<double>(val);
    else if (key == "scale") cfg.scale = py::cast<int>(val);
    else if (key == "seed") cfg.seed = py::cast<std::uint64_t>(val);
    else if (key == "no_mc") cfg.no_mc = py::cast<bool>(val);
    else if (key == "no_meta") cfg.no_meta = py::cast<bool>(val);
    else if (key == "ood_kernels") cfg.ood_kernels = py::cast<bool>(val);
    else if (key == "meta_weights")
      cfg.meta_weights = py::cast<std::vector<double>>(val);
    else
      throw std::invalid_argument("unknown config key '" + key + "'");
  }
  return cfg;
}

py::dict trace_row(const TraceRecord& r) {
  py::dict d;
  d["outer"] = r.outer;
  d["phase"] = r.phase;
  d["loss_mc"] = r.loss_mc;
  d["loss_re"] = r.loss_re;
  d["loss_ml"] = r.loss_ml;
  d["sigma2"] = r.sigma2;
  d["kernel_psnr"] = r.kernel_psnr;
  d["image_psnr"] = r.image_psnr;
  d["wall_ms"] = r.wall_ms;
  return d;
}

}  // namespace

PYBIND11_MODULE(_mlmc, m) {
  m.doc() = "blind super-resolution via Monte Carlo kernel sampling";

  m.def(
      "solve",
      [](py::array_t<double> y, const py::kwargs& kw) {
        SolverConfig cfg = config_from_kwargs(kw);
        SolveResult res = solve(image_from_array(y), cfg);
        py::list trace;
        for (const auto& r : res.trace) trace.append(trace_row(r));
        py::dict out;
        out["x"] = array_from_image(res.x);
        out["k"] = array_from_kernel(res.k);
        out["trace"] = trace;
        out["initial_recon_loss"] = res.initial_recon_loss;
        out["final_recon_loss"] = res.final_recon_loss;
        return out;
      },
      py::arg("y"),
      "Blind SR on an LR array; config fields as keyword arguments.");

  m.def(
      "degrade",
      [](py::array_t<double> x, py::array_t<double> k, int scale,
         double noise_sigma, std::uint64_t seed) {
        DegradationConfig dc;
        dc.scale = scale;
        dc.noise_sigma = noise_sigma;
        dc.seed = seed;
        std::mt19937_64 rng(seed);
        return array_from_image(
            degrade(image_from_array(x), kernel_from_array(k), dc, rng));
      },
      py::arg("x"), py::arg("k"), py::arg("scale") = 2,
      py::arg("noise_sigma") = 0.0, py::arg("seed") = 0,
      "Blur, downsample, add noise, clamp to [0,1].");

  m.def(
      "blur",
      [](py::array_t<double> x, py::array_t<double> k) {
        return array_from_image(blur(image_from_array(x), kernel_from_array(k)));
      },
      py::arg("x"), py::arg("k"));

  m.def(
      "bicubic_upsample",
      [](py::array_t<double> y, int scale) {
        return array_from_image(bicubic_upsample(image_from_array(y), scale));
      },
      py::arg("y"), py::arg("scale") = 2);

  m.def(
      "psnr",
      [](py::array_t<double> a, py::array_t<double> b) {
        return psnr(image_from_array(a), image_from_array(b));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "ssim",
      [](py::array_t<double> a, py::array_t<double> b) {
        return ssim(image_from_array(a), image_from_array(b));
      },
      py::arg("a"), py::arg("b"));

  m.def(
      "kernel_psnr",
      [](py::array_t<double> k_est, py::array_t<double> k_gt) {
        return kernel_psnr(kernel_from_array(k_est), kernel_from_array(k_gt));
      },
      py::arg("k_est"), py::arg("k_gt"));

  m.def(
      "gaussian_kernel",
      [](double sigma1, double sigma2, double theta, double center_y,
         double center_x, int side) {
        GaussianParams p{sigma1, sigma2, theta, center_y, center_x};
        return array_from_kernel(gaussian_kernel(p, side));
      },
      py::arg("sigma1"), py::arg("sigma2"), py::arg("theta") = 0.0,
      py::arg("center_y") = 0.0, py::arg("center_x") = 0.0,
      py::arg("side") = 11);

  m.def(
      "sample_kernels",
      [](int count, int scale, int side, std::uint64_t seed, bool ood) {
        std::mt19937_64 rng(seed);
        auto ranges = ood ? SamplingRanges::out_of_distribution()
                          : SamplingRanges::in_distribution();
        auto batch = sample_kernel_batch(rng, count, scale, side, ranges);
        py::list out;
        for (const auto& k : batch) out.append(array_from_kernel(k));
        return out;
      },
      py::arg("count"), py::arg("scale") = 2, py::arg("side") = 11,
      py::arg("seed") = 0, py::arg("ood") = false);

  m.def(
      "motion_kernel",
      [](int side, int steps, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return array_from_kernel(motion_kernel(rng, side, steps));
      },
      py::arg("side") = 11, py::arg("steps") = 20, py::arg("seed") = 0);

  m.def(
      "grad_check",
      [](int trials, std::uint64_t seed) {
        py::dict out;
        for (const auto& r : grad_check_all(trials, seed))
          out[py::str(r.op)] = r.max_rel_err;
        return out;
      },
      py::arg("trials") = 20, py::arg("seed") = 0,
      "Max relative finite-difference error per registered op.");
}
