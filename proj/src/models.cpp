#include "mlmc/models.hpp"

#include <cmath>

#include "mlmc/degradation.hpp"
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mlmc {

namespace {

Tensor uniform_tensor(std::vector<int> shape, double lo, double hi,
                      std::mt19937_64& rng, bool trainable,
                      const std::string& name) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape), 0.0, trainable);
  for (auto& v : t.value()) v = dist(rng);
  t.set_name(name);
  return t;
}

Tensor linear_init(int out, int in, std::mt19937_64& rng,
                   const std::string& name) {
  const double a = std::sqrt(1.0 / in);
  return uniform_tensor({out, in}, -a, a, rng, true, name);
}

}  // namespace

Tensor tensor_from_image(const Image& img) {
  return Tensor({img.channels, img.height, img.width}, img.data);
}

Image image_from_tensor(const Tensor& t) {
  if (t.shape().size() != 3)
    throw std::invalid_argument("image_from_tensor: want [C,H,W]");
  Image img(t.shape()[1], t.shape()[2], t.shape()[0]);
  img.data = t.value();
  return img;
}

Tensor tensor_from_kernel(const Kernel& k) {
  return Tensor({k.side, k.side}, k.grid);
}

Kernel kernel_from_tensor(const Tensor& t) {
  if (t.shape().size() != 2 || t.shape()[0] != t.shape()[1])
    throw std::invalid_argument("kernel_from_tensor: want a square rank-2 grid");
  Kernel k(t.shape()[0]);
  k.grid = t.value();
  return k;
}

KernelGenerator::KernelGenerator(int side, std::mt19937_64& rng) : side_(side) {
  if (side <= 0 || side % 2 == 0)
    throw std::invalid_argument("kernel generator: side must be odd");
  z_ = uniform_tensor({kLatentDim}, 0.0, 1.0, rng, false, "z_k");
  w1_ = linear_init(kHidden, kLatentDim, rng, "phi_k.w1");
  b1_ = Tensor({kHidden}, 0.0, true);
  b1_.set_name("phi_k.b1");
  w2_ = linear_init(kHidden, kHidden, rng, "phi_k.w2");
  b2_ = Tensor({kHidden}, 0.0, true);
  b2_.set_name("phi_k.b2");
  w3_ = linear_init(side * side, kHidden, rng, "phi_k.w3");
  b3_ = Tensor({side * side}, 0.0, true);
  b3_.set_name("phi_k.b3");
  params_ = {w1_, b1_, w2_, b2_, w3_, b3_};
}

Tensor KernelGenerator::logits() const {
  Tensor h1 = leaky_relu(add(matmul(w1_, z_), b1_));
  Tensor h2 = leaky_relu(add(matmul(w2_, h1), b2_));
  return add(matmul(w3_, h2), b3_);
}

Tensor KernelGenerator::forward() const {
  return reshape(softmax_flat(logits()), {side_, side_});
}

Kernel KernelGenerator::forward_kernel() const {
  return kernel_from_tensor(forward());
}

Tensor ImageRestorer::conv_param(int oc, int ic, int k, std::mt19937_64& rng,
                                 const std::string& name) {
  // Kaiming-uniform: without normalization layers the activation scale must
  // survive the full depth, and 1/fan_in init decays it to ~0 by the head
  const double a = std::sqrt(6.0 / (ic * k * k));
  return uniform_tensor({oc, ic, k, k}, -a, a, rng, true, name);
}

ImageRestorer::ImageRestorer(int hr_height, int hr_width, int out_channels,
                             std::mt19937_64& rng)
    : height_(hr_height), width_(hr_width), out_channels_(out_channels) {
  const int div = 1 << kDepth;
  if (hr_height % div != 0 || hr_width % div != 0)
    throw std::invalid_argument(
        "image restorer: HR dims must be divisible by " + std::to_string(div) +
        "; pad to " + std::to_string((hr_height + div - 1) / div * div) + "x" +
        std::to_string((hr_width + div - 1) / div * div));

  z_ = uniform_tensor({kInputChannels, hr_height, hr_width}, 0.0, 0.1, rng,
                      false, "z_x");
  int in_ch = kInputChannels;
  for (int lv = 0; lv < kDepth; ++lv) {
    const std::string tag = "phi_x.enc" + std::to_string(lv);
    enc_w_.push_back(conv_param(kChannels, in_ch, 3, rng, tag + ".down_w"));
    enc_b_.push_back(Tensor({kChannels}, 0.0, true));
    enc_b_.back().set_name(tag + ".down_b");
    ref_w_.push_back(conv_param(kChannels, kChannels, 3, rng, tag + ".ref_w"));
    ref_b_.push_back(Tensor({kChannels}, 0.0, true));
    ref_b_.back().set_name(tag + ".ref_b");
    skip_w_.push_back(conv_param(kSkip, kChannels, 1, rng, tag + ".skip_w"));
    skip_b_.push_back(Tensor({kSkip}, 0.0, true));
    skip_b_.back().set_name(tag + ".skip_b");
    in_ch = kChannels;
  }
  for (int lv = kDepth - 1; lv >= 0; --lv) {
    const std::string tag = "phi_x.dec" + std::to_string(lv);
    dec_w_.push_back(conv_param(kChannels, kChannels + kSkip, 3, rng, tag + ".w"));
    dec_b_.push_back(Tensor({kChannels}, 0.0, true));
    dec_b_.back().set_name(tag + ".b");
  }
  out_w_ = conv_param(kChannels / 2, kChannels, 3, rng, "phi_x.out_w");
  out_b_ = Tensor({kChannels / 2}, 0.0, true);
  out_b_.set_name("phi_x.out_b");
  head_w_ = conv_param(out_channels, kChannels / 2, 1, rng, "phi_x.head_w");
  head_b_ = Tensor({out_channels}, 0.0, true);
  head_b_.set_name("phi_x.head_b");

  for (int lv = 0; lv < kDepth; ++lv) {
    params_.push_back(enc_w_[lv]);
    params_.push_back(enc_b_[lv]);
    params_.push_back(ref_w_[lv]);
    params_.push_back(ref_b_[lv]);
    params_.push_back(skip_w_[lv]);
    params_.push_back(skip_b_[lv]);
  }
  for (size_t i = 0; i < dec_w_.size(); ++i) {
    params_.push_back(dec_w_[i]);
    params_.push_back(dec_b_[i]);
  }
  params_.push_back(out_w_);
  params_.push_back(out_b_);
  params_.push_back(head_w_);
  params_.push_back(head_b_);
}

Tensor ImageRestorer::forward() const {
  std::vector<Tensor> skips;
  Tensor h = z_;
  for (int lv = 0; lv < kDepth; ++lv) {
    h = leaky_relu(add_channel_bias(conv2d(h, enc_w_[lv], 2), enc_b_[lv]));
    h = leaky_relu(add_channel_bias(conv2d(h, ref_w_[lv], 1), ref_b_[lv]));
    skips.push_back(
        leaky_relu(add_channel_bias(conv2d(h, skip_w_[lv], 1), skip_b_[lv])));
  }
  for (int i = 0; i < kDepth; ++i) {
    const int lv = kDepth - 1 - i;
    Tensor in = concat_channels(h, skips[lv]);
    h = leaky_relu(add_channel_bias(conv2d(in, dec_w_[i], 1), dec_b_[i]));
    h = upsample_nearest(h, 2);
  }
  h = leaky_relu(add_channel_bias(conv2d(h, out_w_, 1), out_b_));
  return sigmoid(add_channel_bias(conv2d(h, head_w_, 1), head_b_));
}

Image ImageRestorer::forward_image() const {
  return image_from_tensor(forward());
}

Tensor hyper_laplacian_loss(const Tensor& x, const Image& y, const Tensor& k,
                            int s, double sigma2, double rho_reg, double eta) {
  if (sigma2 < 1e-6) sigma2 = 1e-6;
  if (eta <= 0.0 || eta > 1.0)
    throw std::invalid_argument("hyper_laplacian_loss: eta must be in (0,1]");
  Tensor y_t = tensor_from_image(y);
  Tensor resid =
      subtract(y_t, downsample(conv2d(x, k, 1, Padding::Reflect), s));
  Tensor data = scalar_multiply(sqnorm(resid), 1.0 / sigma2);
  if (rho_reg == 0.0) return data;
  static const Tensor fh({1, 3}, std::vector<double>{0.0, 1.0, -1.0});
  static const Tensor fv({3, 1}, std::vector<double>{0.0, 1.0, -1.0});
  Tensor reg = add(pow_elem(sqnorm(conv2d(x, fh, 1, Padding::Reflect)), eta),
                   pow_elem(sqnorm(conv2d(x, fv, 1, Padding::Reflect)), eta));
  return add(data, scalar_multiply(reg, rho_reg));
}

double estimate_noise_variance(const Image& y, const Image& x, const Kernel& k,
                               int s) {
  Image pred = downsample(blur(x, k), s);
  if (pred.height != y.height || pred.width != y.width ||
      pred.channels != y.channels)
    throw std::invalid_argument(
        "estimate_noise_variance: inconsistent shapes");
  double acc = 0.0;
  for (size_t i = 0; i < y.data.size(); ++i) {
    const double d = y.data[i] - pred.data[i];
    acc += d * d;
  }
  const double sigma2 = acc / static_cast<double>(y.data.size());
  return sigma2 < 1e-6 ? 1e-6 : sigma2;
}

void save_params(const std::vector<Tensor>& params,
                 const std::string& blob_path,
                 const std::string& manifest_path) {
  std::ofstream blob(blob_path, std::ios::binary);
  std::ofstream manifest(manifest_path);
  if (!blob || !manifest)
    throw std::runtime_error("save_params: cannot open output files");
  for (const auto& p : params) {
    blob.write(reinterpret_cast<const char*>(p.value().data()),
               static_cast<std::streamsize>(p.size() * sizeof(double)));
    manifest << p.name();
    for (int d : p.shape()) manifest << " " << d;
    manifest << "\n";
  }
}

void load_params(std::vector<Tensor>& params, const std::string& blob_path,
                 const std::string& manifest_path) {
  std::ifstream blob(blob_path, std::ios::binary);
  std::ifstream manifest(manifest_path);
  if (!blob || !manifest)
    throw std::runtime_error("load_params: cannot open input files");
  for (auto& p : params) {
    std::string line;
    if (!std::getline(manifest, line))
      throw std::runtime_error("load_params: manifest too short");
    std::istringstream is(line);
    std::string name;
    is >> name;
    std::vector<int> shape;
    int d;
    while (is >> d) shape.push_back(d);
    if (shape != p.shape())
      throw std::runtime_error("load_params: shape mismatch for '" + name + "'");
    blob.read(reinterpret_cast<char*>(p.value().data()),
              static_cast<std::streamsize>(p.size() * sizeof(double)));
    if (!blob) throw std::runtime_error("load_params: blob too short");
  }
}

}  // namespace mlmc
