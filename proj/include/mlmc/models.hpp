#pragma once

#include <random>
#include <string>
#include <vector>

#include "mlmc/image.hpp"
#include "mlmc/tensor.hpp"

namespace mlmc {

Tensor tensor_from_image(const Image& img);
Image image_from_tensor(const Tensor& t);
Tensor tensor_from_kernel(const Kernel& k);
Kernel kernel_from_tensor(const Tensor& t);

// Shallow FCN kernel estimator: fixed latent -> 1000 -> 1000 -> side^2,
// leaky-rectifier activations, softmax head (output is positive, sums to 1).
class KernelGenerator {
 public:
  static constexpr int kLatentDim = 64;
  static constexpr int kHidden = 1000;

  KernelGenerator(int side, std::mt19937_64& rng);

  Tensor logits() const;        // [side*side] pre-softmax activations
  Tensor forward() const;       // [side, side], differentiable
  Kernel forward_kernel() const;
  int side() const { return side_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  int side_;
  Tensor z_;  // frozen input
  Tensor w1_, b1_, w2_, b2_, w3_, b3_;
  std::vector<Tensor> params_;
};

// DIP-style encoder-decoder restorer: depth 3, 32 channels per level,
// 4-channel skips, nearest-neighbor upsampling, sigmoid output.
// Fixed 16-channel noise input at HR size, entries Uniform(0, 0.1).
class ImageRestorer {
 public:
  static constexpr int kDepth = 3;
  static constexpr int kChannels = 32;
  static constexpr int kSkip = 4;
  static constexpr int kInputChannels = 16;

  ImageRestorer(int hr_height, int hr_width, int out_channels,
                std::mt19937_64& rng);

  Tensor forward() const;  // [C, H, W], values in (0,1)
  Image forward_image() const;
  int height() const { return height_; }
  int width() const { return width_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  Tensor conv_param(int oc, int ic, int k, std::mt19937_64& rng,
                    const std::string& name);
  int height_, width_, out_channels_;
  Tensor z_;
  // per level: downsampling conv, refining conv, 1x1 skip conv
  std::vector<Tensor> enc_w_, enc_b_, ref_w_, ref_b_, skip_w_, skip_b_;
  std::vector<Tensor> dec_w_, dec_b_;
  Tensor out_w_, out_b_, head_w_, head_b_;
  std::vector<Tensor> params_;
};

// (1/sigma2) * ||y - (x (x) k) v s||_F^2 + rho * sum_c (||f_c (x) x||_F^2)^eta
// with f_c the horizontal/vertical forward-difference filters.
Tensor hyper_laplacian_loss(const Tensor& x, const Image& y, const Tensor& k,
                            int s, double sigma2, double rho_reg, double eta);

// Mean squared LR residual, floored at 1e-6.
double estimate_noise_variance(const Image& y, const Image& x, const Kernel& k,
                               int s);

// Little-endian f64 blob + plain-text shape manifest.
void save_params(const std::vector<Tensor>& params, const std::string& blob_path,
                 const std::string& manifest_path);
void load_params(std::vector<Tensor>& params, const std::string& blob_path,
                 const std::string& manifest_path);

}  // namespace mlmc
