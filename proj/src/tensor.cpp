#include "mlmc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace mlmc {

namespace {

int shape_product(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimension must be positive");
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
}

NodePtr make_node(std::vector<int> shape, std::vector<NodePtr> inputs) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->value.assign(shape_product(n->shape), 0.0);
  n->inputs = std::move(inputs);
  return n;
}

void ensure_grad(TensorNode& n) {
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
}

// Padded-index maps: entry is the source index, or -1 for a zero pad.
std::vector<int> pad_map(int n, int p, Padding mode) {
  std::vector<int> m(n + 2 * p);
  for (int i = 0; i < n + 2 * p; ++i) {
    int s = i - p;
    if (mode == Padding::Zero) {
      m[i] = (s >= 0 && s < n) ? s : -1;
    } else {  // reflect without repeating the border sample
      while (s < 0 || s >= n) {
        if (s < 0) s = -s;
        if (s >= n) s = 2 * n - 2 - s;
      }
      m[i] = s;
    }
  }
  return m;
}

void pad_plane(const double* src, int h, int w, const std::vector<int>& rm,
               const std::vector<int>& cm, double* dst) {
  const int pw = static_cast<int>(cm.size());
  for (size_t i = 0; i < rm.size(); ++i) {
    double* row = dst + i * pw;
    if (rm[i] < 0) {
      std::fill(row, row + pw, 0.0);
      continue;
    }
    const double* srow = src + static_cast<size_t>(rm[i]) * w;
    for (int j = 0; j < pw; ++j) row[j] = cm[j] < 0 ? 0.0 : srow[cm[j]];
  }
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, double fill, bool trainable) {
  node_ = make_node(std::move(shape), {});
  std::fill(node_->value.begin(), node_->value.end(), fill);
  node_->trainable = trainable;
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data,
               bool trainable) {
  node_ = make_node(std::move(shape), {});
  if (static_cast<int>(data.size()) != node_->size())
    throw std::invalid_argument("tensor data length does not match shape");
  node_->value = std::move(data);
  node_->trainable = trainable;
}

const std::vector<int>& Tensor::shape() const { return node_->shape; }
int Tensor::size() const { return node_->size(); }
const std::vector<double>& Tensor::value() const { return node_->value; }
std::vector<double>& Tensor::value() { return node_->value; }
const std::vector<double>& Tensor::grad() const { return node_->grad; }
bool Tensor::trainable() const { return node_->trainable; }
const std::string& Tensor::name() const { return node_->name; }
void Tensor::set_name(std::string name) { node_->name = std::move(name); }

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() requires a scalar tensor");
  return node_->value[0];
}

Tensor Tensor::wrap(NodePtr n) {
  Tensor t;
  t.node_ = std::move(n);
  return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto n = make_node(a.shape(), {a.node(), b.node()});
  const auto& av = a.value();
  const auto& bv = b.value();
  for (int i = 0; i < n->size(); ++i) n->value[i] = av[i] + bv[i];
  n->backprop = [](TensorNode& self) {
    for (auto& in : self.inputs) {
      ensure_grad(*in);
      for (int i = 0; i < self.size(); ++i) in->grad[i] += self.grad[i];
    }
  };
  return Tensor::wrap(n);
}

Tensor subtract(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "subtract");
  auto n = make_node(a.shape(), {a.node(), b.node()});
  const auto& av = a.value();
  const auto& bv = b.value();
  for (int i = 0; i < n->size(); ++i) n->value[i] = av[i] - bv[i];
  n->backprop = [](TensorNode& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    ensure_grad(x);
    ensure_grad(y);
    for (int i = 0; i < self.size(); ++i) {
      x.grad[i] += self.grad[i];
      y.grad[i] -= self.grad[i];
    }
  };
  return Tensor::wrap(n);
}

Tensor multiply(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "multiply");
  auto n = make_node(a.shape(), {a.node(), b.node()});
  const auto& av = a.value();
  const auto& bv = b.value();
  for (int i = 0; i < n->size(); ++i) n->value[i] = av[i] * bv[i];
  n->backprop = [](TensorNode& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    ensure_grad(x);
    ensure_grad(y);
    for (int i = 0; i < self.size(); ++i) {
      x.grad[i] += self.grad[i] * y.value[i];
      y.grad[i] += self.grad[i] * x.value[i];
    }
  };
  return Tensor::wrap(n);
}

Tensor scalar_multiply(const Tensor& a, double c) {
  auto n = make_node(a.shape(), {a.node()});
  const auto& av = a.value();
  for (int i = 0; i < n->size(); ++i) n->value[i] = c * av[i];
  n->backprop = [c](TensorNode& self) {
    auto& x = *self.inputs[0];
    ensure_grad(x);
    for (int i = 0; i < self.size(); ++i) x.grad[i] += c * self.grad[i];
  };
  return Tensor::wrap(n);
}

Tensor leaky_relu(const Tensor& a, double slope) {
  auto n = make_node(a.shape(), {a.node()});
  const auto& av = a.value();
  for (int i = 0; i < n->size(); ++i)
    n->value[i] = av[i] > 0.0 ? av[i] : slope * av[i];
  n->backprop = [slope](TensorNode& self) {
    auto& x = *self.inputs[0];
    ensure_grad(x);
    for (int i = 0; i < self.size(); ++i)
      x.grad[i] += self.grad[i] * (x.value[i] > 0.0 ? 1.0 : slope);
  };
  return Tensor::wrap(n);
}

Tensor sigmoid(const Tensor& a) {
  auto n = make_node(a.shape(), {a.node()});
  const auto& av = a.value();
  for (int i = 0; i < n->size(); ++i) n->value[i] = 1.0 / (1.0 + std::exp(-av[i]));
  n->backprop = [](TensorNode& self) {
    auto& x = *self.inputs[0];
    ensure_grad(x);
    for (int i = 0; i < self.size(); ++i) {
      double y = self.value[i];
      x.grad[i] += self.grad[i] * y * (1.0 - y);
    }
  };
  return Tensor::wrap(n);
}

Tensor softmax_flat(const Tensor& a) {
  auto n = make_node(a.shape(), {a.node()});
  const auto& av = a.value();
  double mx = *std::max_element(av.begin(), av.end());
  double z = 0.0;
  for (int i = 0; i < n->size(); ++i) {
    n->value[i] = std::exp(av[i] - mx);
    z += n->value[i];
  }
  for (int i = 0; i < n->size(); ++i) n->value[i] /= z;
  n->backprop = [](TensorNode& self) {
    auto& x = *self.inputs[0];
    ensure_grad(x);
    double dot = 0.0;
    for (int i = 0; i < self.size(); ++i) dot += self.grad[i] * self.value[i];
    for (int i = 0; i < self.size(); ++i)
      x.grad[i] += self.value[i] * (self.grad[i] - dot);
  };
  return Tensor::wrap(n);
}

Tensor sum(const Tensor& a) {
  auto n = make_node({1}, {a.node()});
  n->value[0] = std::accumulate(a.value().begin(), a.value().end(), 0.0);
  n->backprop = [](TensorNode& self) {
    auto& x = *self.inputs[0];
    ensure_grad(x);
    for (auto& g : x.grad) g += self.grad[0];
  };
  return Tensor::wrap(n);
}

Tensor mean(const Tensor& a) {
  auto n = make_node({1}, {a.node()});
  const double inv = 1.0 / a.size();
  n->value[0] = std::accumulate(a.value().begin(), a.value().end(), 0.0) * inv;
  n->backprop = [inv](TensorNode& self) {
    auto& x = *self.inputs[0];
    ensure_grad(x);
    for (auto& g : x.grad) g += self.grad[0] * inv;
  };
  return Tensor::wrap(n);
}

Tensor pow_elem(const Tensor& a, double exponent) {
  const bool integral = exponent == std::floor(exponent);
  for (double v : a.value()) {
    if (v < 0.0 && !integral)
      throw std::invalid_argument(
          "pow: negative base with fractional exponent");
  }
  auto n = make_node(a.shape(), {a.node()});
  const auto& av = a.value();
  for (int i = 0; i < n->size(); ++i) n->value[i] = std::pow(av[i], exponent);
  n->backprop = [exponent](TensorNode& self) {
    auto& x = *self.inputs[0];
    ensure_grad(x);
    for (int i = 0; i < self.size(); ++i) {
      double v = x.value[i];
      // derivative pinned to 0 at v == 0 when the true one diverges
      double d = (v == 0.0 && exponent < 1.0)
                     ? 0.0
                     : exponent * std::pow(v, exponent - 1.0);
      x.grad[i] += self.grad[i] * d;
    }
  };
  return Tensor::wrap(n);
}

Tensor sqnorm(const Tensor& a) {
  auto n = make_node({1}, {a.node()});
  double acc = 0.0;
  for (double v : a.value()) acc += v * v;
  n->value[0] = acc;
  n->backprop = [](TensorNode& self) {
    auto& x = *self.inputs[0];
    ensure_grad(x);
    for (int i = 0; i < x.size(); ++i) x.grad[i] += 2.0 * x.value[i] * self.grad[0];
  };
  return Tensor::wrap(n);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2)
    throw std::invalid_argument("matmul: left operand must be rank 2");
  const int m = a.shape()[0], k = a.shape()[1];
  if (b.shape().size() == 1) {
    if (b.shape()[0] != k)
      throw std::invalid_argument("matmul: inner dimensions differ " +
                                  shape_str(a.shape()) + " vs " +
                                  shape_str(b.shape()));
    auto n = make_node({m}, {a.node(), b.node()});
    const double* A = a.value().data();
    const double* x = b.value().data();
    for (int i = 0; i < m; ++i) {
      double acc = 0.0;
      const double* row = A + static_cast<size_t>(i) * k;
      for (int j = 0; j < k; ++j) acc += row[j] * x[j];
      n->value[i] = acc;
    }
    n->backprop = [m, k](TensorNode& self) {
      auto& A = *self.inputs[0];
      auto& x = *self.inputs[1];
      ensure_grad(A);
      ensure_grad(x);
      for (int i = 0; i < m; ++i) {
        const double g = self.grad[i];
        double* arow = A.grad.data() + static_cast<size_t>(i) * k;
        const double* vrow = A.value.data() + static_cast<size_t>(i) * k;
        for (int j = 0; j < k; ++j) {
          arow[j] += g * x.value[j];
          x.grad[j] += g * vrow[j];
        }
      }
    };
    return Tensor::wrap(n);
  }
  if (b.shape().size() != 2 || b.shape()[0] != k)
    throw std::invalid_argument("matmul: inner dimensions differ " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  const int p = b.shape()[1];
  auto n = make_node({m, p}, {a.node(), b.node()});
  const double* A = a.value().data();
  const double* B = b.value().data();
  for (int i = 0; i < m; ++i) {
    double* out = n->value.data() + static_cast<size_t>(i) * p;
    for (int j = 0; j < k; ++j) {
      const double av = A[static_cast<size_t>(i) * k + j];
      const double* brow = B + static_cast<size_t>(j) * p;
      for (int c = 0; c < p; ++c) out[c] += av * brow[c];
    }
  }
  n->backprop = [m, k, p](TensorNode& self) {
    auto& A = *self.inputs[0];
    auto& B = *self.inputs[1];
    ensure_grad(A);
    ensure_grad(B);
    for (int i = 0; i < m; ++i) {
      const double* grow = self.grad.data() + static_cast<size_t>(i) * p;
      for (int j = 0; j < k; ++j) {
        const double av = A.value[static_cast<size_t>(i) * k + j];
        const double* brow = B.value.data() + static_cast<size_t>(j) * p;
        double* bgrow = B.grad.data() + static_cast<size_t>(j) * p;
        double acc = 0.0;
        for (int c = 0; c < p; ++c) {
          acc += grow[c] * brow[c];
          bgrow[c] += grow[c] * av;
        }
        A.grad[static_cast<size_t>(i) * k + j] += acc;
      }
    }
  };
  return Tensor::wrap(n);
}

int conv_out_dim(int in, int k, int stride) {
  return (in + 2 * (k / 2) - k) / stride + 1;
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  auto n = make_node(std::move(shape), {a.node()});
  if (n->size() != a.size())
    throw std::invalid_argument("reshape: element count mismatch " +
                                shape_str(a.shape()) + " -> " +
                                shape_str(n->shape));
  n->value = a.value();
  n->backprop = [](TensorNode& self) {
    auto& x = *self.inputs[0];
    ensure_grad(x);
    for (int i = 0; i < self.size(); ++i) x.grad[i] += self.grad[i];
  };
  return Tensor::wrap(n);
}

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  if (x.shape().size() != 3 || b.shape().size() != 1 ||
      b.shape()[0] != x.shape()[0])
    throw std::invalid_argument("add_channel_bias: want [C,H,W] + [C], got " +
                                shape_str(x.shape()) + " + " +
                                shape_str(b.shape()));
  const int C = x.shape()[0];
  const size_t plane = static_cast<size_t>(x.shape()[1]) * x.shape()[2];
  auto n = make_node(x.shape(), {x.node(), b.node()});
  for (int c = 0; c < C; ++c) {
    const double bias = b.value()[c];
    for (size_t i = 0; i < plane; ++i)
      n->value[c * plane + i] = x.value()[c * plane + i] + bias;
  }
  n->backprop = [C, plane](TensorNode& self) {
    auto& x = *self.inputs[0];
    auto& b = *self.inputs[1];
    ensure_grad(x);
    ensure_grad(b);
    for (int c = 0; c < C; ++c) {
      double acc = 0.0;
      for (size_t i = 0; i < plane; ++i) {
        const double g = self.grad[c * plane + i];
        x.grad[c * plane + i] += g;
        acc += g;
      }
      b.grad[c] += acc;
    }
  };
  return Tensor::wrap(n);
}

Tensor conv2d(const Tensor& x, const Tensor& k, int stride, Padding pad) {
  if (x.shape().size() != 3)
    throw std::invalid_argument("conv2d: input must be [C,H,W], got " +
                                shape_str(x.shape()));
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  const int C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];

  int oc, ic, kh, kw;
  bool depthwise;
  if (k.shape().size() == 2) {
    depthwise = true;
    oc = ic = C;
    kh = k.shape()[0];
    kw = k.shape()[1];
  } else if (k.shape().size() == 4) {
    depthwise = false;
    oc = k.shape()[0];
    ic = k.shape()[1];
    kh = k.shape()[2];
    kw = k.shape()[3];
    if (ic != C)
      throw std::invalid_argument("conv2d: kernel expects " +
                                  std::to_string(ic) + " channels, input has " +
                                  std::to_string(C));
  } else {
    throw std::invalid_argument("conv2d: kernel must be rank 2 or 4, got " +
                                shape_str(k.shape()));
  }
  if (kh % 2 == 0 || kw % 2 == 0)
    throw std::invalid_argument("conv2d: kernel sides must be odd, got " +
                                shape_str(k.shape()));
  const int ph = kh / 2, pw = kw / 2;
  const int oh = conv_out_dim(H, kh, stride);
  const int ow = conv_out_dim(W, kw, stride);

  auto rm = pad_map(H, ph, pad);
  auto cm = pad_map(W, pw, pad);
  const int PH = H + 2 * ph, PW = W + 2 * pw;

  auto n = make_node({oc, oh, ow}, {x.node(), k.node()});
  std::vector<double> padded(static_cast<size_t>(PH) * PW);

  const double* kv = k.value().data();
  const double* xv = x.value().data();
  double* out = n->value.data();
  const size_t plane = static_cast<size_t>(H) * W;
  const size_t oplane = static_cast<size_t>(oh) * ow;

  for (int c = 0; c < C; ++c) {
    pad_plane(xv + c * plane, H, W, rm, cm, padded.data());
    for (int o = 0; o < oc; ++o) {
      if (depthwise && o != c) continue;
      const double* kslice =
          depthwise ? kv
                    : kv + (static_cast<size_t>(o) * C + c) * kh * kw;
      double* oslice = out + static_cast<size_t>(o) * oplane;
      for (int dy = 0; dy < kh; ++dy) {
        for (int dx = 0; dx < kw; ++dx) {
          const double w = kslice[dy * kw + dx];
          if (w == 0.0) continue;
          for (int y = 0; y < oh; ++y) {
            const double* prow =
                padded.data() + static_cast<size_t>(y * stride + dy) * PW + dx;
            double* orow = oslice + static_cast<size_t>(y) * ow;
            if (stride == 1) {
              for (int xo = 0; xo < ow; ++xo) orow[xo] += w * prow[xo];
            } else {
              for (int xo = 0; xo < ow; ++xo) orow[xo] += w * prow[xo * stride];
            }
          }
        }
      }
    }
  }

  n->backprop = [C, H, W, oc, kh, kw, stride, pad, oh, ow,
                 depthwise](TensorNode& self) {
    auto& xin = *self.inputs[0];
    auto& kin = *self.inputs[1];
    ensure_grad(xin);
    ensure_grad(kin);
    const int ph = kh / 2, pw = kw / 2;
    auto rm = pad_map(H, ph, pad);
    auto cm = pad_map(W, pw, pad);
    const int PH = H + 2 * ph, PW = W + 2 * pw;
    std::vector<double> padded(static_cast<size_t>(PH) * PW);
    std::vector<double> pgrad(static_cast<size_t>(PH) * PW);
    const size_t plane = static_cast<size_t>(H) * W;
    const size_t oplane = static_cast<size_t>(oh) * ow;

    for (int c = 0; c < C; ++c) {
      pad_plane(xin.value.data() + c * plane, H, W, rm, cm, padded.data());
      std::fill(pgrad.begin(), pgrad.end(), 0.0);
      for (int o = 0; o < oc; ++o) {
        if (depthwise && o != c) continue;
        const size_t koff =
            depthwise ? 0 : (static_cast<size_t>(o) * C + c) * kh * kw;
        const double* gout = self.grad.data() + static_cast<size_t>(o) * oplane;
        for (int dy = 0; dy < kh; ++dy) {
          for (int dx = 0; dx < kw; ++dx) {
            const double w = kin.value[koff + dy * kw + dx];
            double wg = 0.0;
            for (int y = 0; y < oh; ++y) {
              const double* grow = gout + static_cast<size_t>(y) * ow;
              const size_t base =
                  static_cast<size_t>(y * stride + dy) * PW + dx;
              const double* prow = padded.data() + base;
              double* pgrow = pgrad.data() + base;
              for (int xo = 0; xo < ow; ++xo) {
                const double g = grow[xo];
                wg += g * prow[xo * stride];
                pgrow[xo * stride] += w * g;
              }
            }
            kin.grad[koff + dy * kw + dx] += wg;
          }
        }
      }
      // fold padded-plane gradient back through the index maps
      double* xg = xin.grad.data() + c * plane;
      for (int i = 0; i < PH; ++i) {
        if (rm[i] < 0) continue;
        double* dst = xg + static_cast<size_t>(rm[i]) * W;
        const double* src = pgrad.data() + static_cast<size_t>(i) * PW;
        for (int j = 0; j < PW; ++j) {
          if (cm[j] >= 0) dst[cm[j]] += src[j];
        }
      }
    }
  };
  return Tensor::wrap(n);
}

Tensor downsample(const Tensor& x, int s) {
  if (x.shape().size() != 3)
    throw std::invalid_argument("downsample: input must be [C,H,W]");
  if (s < 1) throw std::invalid_argument("downsample: scale must be >= 1");
  const int C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  const int oh = (H + s - 1) / s, ow = (W + s - 1) / s;
  auto n = make_node({C, oh, ow}, {x.node()});
  const double* xv = x.value().data();
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < oh; ++y)
      for (int xo = 0; xo < ow; ++xo)
        n->value[(static_cast<size_t>(c) * oh + y) * ow + xo] =
            xv[(static_cast<size_t>(c) * H + y * s) * W + xo * s];
  n->backprop = [C, H, W, oh, ow, s](TensorNode& self) {
    auto& xin = *self.inputs[0];
    ensure_grad(xin);
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < oh; ++y)
        for (int xo = 0; xo < ow; ++xo)
          xin.grad[(static_cast<size_t>(c) * H + y * s) * W + xo * s] +=
              self.grad[(static_cast<size_t>(c) * oh + y) * ow + xo];
  };
  return Tensor::wrap(n);
}

Tensor upsample_nearest(const Tensor& x, int s) {
  if (x.shape().size() != 3)
    throw std::invalid_argument("upsample_nearest: input must be [C,H,W]");
  if (s < 1) throw std::invalid_argument("upsample_nearest: scale must be >= 1");
  const int C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  const int oh = H * s, ow = W * s;
  auto n = make_node({C, oh, ow}, {x.node()});
  const double* xv = x.value().data();
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < oh; ++y)
      for (int xo = 0; xo < ow; ++xo)
        n->value[(static_cast<size_t>(c) * oh + y) * ow + xo] =
            xv[(static_cast<size_t>(c) * H + y / s) * W + xo / s];
  n->backprop = [C, H, W, oh, ow, s](TensorNode& self) {
    auto& xin = *self.inputs[0];
    ensure_grad(xin);
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < oh; ++y)
        for (int xo = 0; xo < ow; ++xo)
          xin.grad[(static_cast<size_t>(c) * H + y / s) * W + xo / s] +=
              self.grad[(static_cast<size_t>(c) * oh + y) * ow + xo];
  };
  return Tensor::wrap(n);
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 3 || b.shape().size() != 3 ||
      a.shape()[1] != b.shape()[1] || a.shape()[2] != b.shape()[2])
    throw std::invalid_argument("concat_channels: spatial shapes differ " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  const int ca = a.shape()[0], cb = b.shape()[0];
  const int H = a.shape()[1], W = a.shape()[2];
  auto n = make_node({ca + cb, H, W}, {a.node(), b.node()});
  std::copy(a.value().begin(), a.value().end(), n->value.begin());
  std::copy(b.value().begin(), b.value().end(), n->value.begin() + a.size());
  n->backprop = [](TensorNode& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    ensure_grad(x);
    ensure_grad(y);
    for (int i = 0; i < x.size(); ++i) x.grad[i] += self.grad[i];
    for (int i = 0; i < y.size(); ++i) y.grad[i] += self.grad[x.size() + i];
  };
  return Tensor::wrap(n);
}

void backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  // iterative post-order DFS: children before parents
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      TensorNode* child = node->inputs[idx++].get();
      if (seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (TensorNode* n : order) n->grad.assign(n->value.size(), 0.0);
  loss.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backprop) (*it)->backprop(**it);
  }
}

}  // namespace mlmc
