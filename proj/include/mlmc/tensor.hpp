#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mlmc {

enum class Padding { Zero, Reflect };

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

// Dense double-precision tensor participating in a define-by-run graph.
// The graph is rebuilt on every forward pass; backward() walks it once in
// reverse topological order.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<int> shape, double fill = 0.0, bool trainable = false);
  Tensor(std::vector<int> shape, std::vector<double> data,
         bool trainable = false);

  const std::vector<int>& shape() const;
  int size() const;
  const std::vector<double>& value() const;
  std::vector<double>& value();
  const std::vector<double>& grad() const;
  bool trainable() const;
  bool defined() const { return node_ != nullptr; }
  const std::string& name() const;
  void set_name(std::string name);

  double item() const;  // requires size() == 1

  NodePtr node() const { return node_; }
  static Tensor wrap(NodePtr n);

 private:
  NodePtr node_;
};

struct TensorNode {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized lazily by backward()
  bool trainable = false;
  std::string name;
  std::vector<NodePtr> inputs;
  // Accumulates d(loss)/d(input) given d(loss)/d(this).
  std::function<void(TensorNode&)> backprop;

  int size() const { return static_cast<int>(value.size()); }
};

// Elementwise / reduction ops
Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor scalar_multiply(const Tensor& a, double c);
Tensor leaky_relu(const Tensor& a, double slope = 0.1);
Tensor sigmoid(const Tensor& a);
Tensor softmax_flat(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor pow_elem(const Tensor& a, double exponent);
Tensor sqnorm(const Tensor& a);  // squared Frobenius norm -> scalar

// Linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,n]x[n] or [m,n]x[n,p]

// View with identical data; product of dims must match.
Tensor reshape(const Tensor& a, std::vector<int> shape);

// x [C,H,W] + b [C], broadcast over the spatial plane.
Tensor add_channel_bias(const Tensor& x, const Tensor& b);

// Spatial ops over [C,H,W] tensors
// kernel rank 2 [kh,kw]: depthwise, same kernel on every channel.
// kernel rank 4 [oc,ic,kh,kw]: full convolution.
// Correlation convention (no kernel flip), same-size padding of kh/2, kw/2.
Tensor conv2d(const Tensor& x, const Tensor& k, int stride = 1,
              Padding pad = Padding::Zero);
Tensor downsample(const Tensor& x, int s);  // keep every s-th pixel, offset 0
Tensor upsample_nearest(const Tensor& x, int s);
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Reverse-mode sweep from a scalar loss. Grads of every node reachable from
// the loss are reset before accumulation, so repeated backward calls on
// overlapping graphs stay correct.
void backward(const Tensor& loss);

int conv_out_dim(int in, int k, int stride);

}  // namespace mlmc
