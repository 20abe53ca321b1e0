#ifndef CHARTEX_AUTODIFF_HPP_
#define CHARTEX_AUTODIFF_HPP_

#include <functional>
#include <vector>

#include "chartex/tensor.hpp"

namespace chartex {
namespace ad {

struct Value {
  int id = -1;
  bool ok() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended in topological order; backward()
// walks them in reverse. One tape per forward pass; tapes are independent,
// so concurrent passes over shared (immutable) parameters are safe.
class Tape {
 public:
  struct Node {
    Tensor val;
    Tensor grad;  // allocated lazily during backward
    bool needs_grad = false;
    std::function<void(Tape&, int)> back;  // null for leaves
  };

  // Constant input: gradients are not tracked through it.
  Value constant(Tensor t);
  // Trainable leaf: gradients accumulate here.
  Value param(const Tensor& t);

  Value make(Tensor val, bool needs_grad, std::function<void(Tape&, int)> back);

  const Tensor& val(Value v) const { return nodes_[static_cast<size_t>(v.id)].val; }
  const Tensor& grad(Value v) const { return nodes_[static_cast<size_t>(v.id)].grad; }
  bool needs_grad(Value v) const { return nodes_[static_cast<size_t>(v.id)].needs_grad; }

  // Seeds d(loss)/d(loss)=1 and back-propagates. `loss` must be scalar.
  void backward(Value loss);

  Tensor& grad_ref(int id);
  const Tensor& val_of(int id) const { return nodes_[static_cast<size_t>(id)].val; }
  bool id_needs_grad(int id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }
  size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

// ---- elementwise / arithmetic ----
Value add(Tape& t, Value a, Value b);            // same shape
Value sub(Tape& t, Value a, Value b);
Value mul(Tape& t, Value a, Value b);            // Hadamard
Value scale(Tape& t, Value a, double c);
Value add_scalar(Tape& t, Value a, double c);
Value neg(Tape& t, Value a);
Value minimum(Tape& t, Value a, Value b);        // ties route grad to a
Value maximum(Tape& t, Value a, Value b);

// ---- activations ----
Value relu(Tape& t, Value a);
Value leaky_relu(Tape& t, Value a, double slope);
Value gelu(Tape& t, Value a);                    // exact erf form
Value sigmoid(Tape& t, Value a);
Value tanh_v(Tape& t, Value a);
Value exp_v(Tape& t, Value a);
Value log_v(Tape& t, Value a);
Value abs_v(Tape& t, Value a);

// ---- shape / indexing ----
Value reshape(Tape& t, Value a, std::vector<int> shape);
Value transpose2(Tape& t, Value a);              // [m,n] -> [n,m]
Value gather_elems(Tape& t, Value a, std::vector<int64_t> idx);  // flat -> [k]
Value gather_rows(Tape& t, Value a, std::vector<int> rows);      // [m,d] -> [k,d]
Value concat_cols(Tape& t, Value a, Value b);
Value concat_rows(Tape& t, const std::vector<Value>& parts);
Value slice_rows(Tape& t, Value a, int r0, int r1);
Value slice_cols(Tape& t, Value a, int c0, int c1);

// ---- linear algebra ----
Value matmul(Tape& t, Value a, Value b);         // [m,k]x[k,n]
Value linear(Tape& t, Value x, Value w, Value b);  // x[m,k] w[k,n] b[n]
Value add_bias(Tape& t, Value x, Value b);       // b over last dim

// ---- normalization / attention ----
Value softmax_rows(Tape& t, Value a);            // softmax over last dim
Value layer_norm(Tape& t, Value x, Value gamma, Value beta, double eps = 1e-5);

// ---- reductions / losses ----
Value sum_all(Tape& t, Value a);
Value mean_all(Tape& t, Value a);
Value mean_rows(Tape& t, Value a);               // [m,d] -> [1,d]
// Mean cross-entropy of row-softmax vs integer labels.
Value cross_entropy_rows(Tape& t, Value logits, const std::vector<int>& labels);
// Mean binary cross-entropy with logits against constant targets.
Value bce_logits_mean(Tape& t, Value logits, const Tensor& targets);

// ---- image ops (single image, [C,H,W]) ----
Value conv2d(Tape& t, Value x, Value w, Value b, int stride, int pad);
Value maxpool2d(Tape& t, Value x, int ph, int pw);
Value upsample_nn2(Tape& t, Value x);
// Bilinear sampling at pixel-space coords [N,2] (x,y; integer = pixel
// center), clamp-to-edge. Differentiable in both the image and the coords.
Value grid_sample(Tape& t, Value img, Value coords);

}  // namespace ad
}  // namespace chartex

#endif  // CHARTEX_AUTODIFF_HPP_
