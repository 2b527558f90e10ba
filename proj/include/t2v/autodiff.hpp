#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "t2v/tensor.hpp"

namespace t2v::ad {

// One node of a reverse-mode computation graph. Graphs are built ad hoc per
// forward pass (no global tape), so independent graphs can be constructed
// and differentiated on different threads.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // reads this->grad, accumulates into parents
  const void* param_tag = nullptr;         // identity of the Parameter behind a leaf

  void accumulate(const Tensor& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : n_(std::move(n)) {}

  const Tensor& val() const { return n_->value; }
  const std::vector<int64_t>& shape() const { return n_->value.shape(); }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  std::shared_ptr<Node> node() const { return n_; }
  bool defined() const { return static_cast<bool>(n_); }

  double scalar() const;  // value of a single-element tensor

 private:
  std::shared_ptr<Node> n_;
};

// Leaves.
Var constant(Tensor value);
Var leaf(Tensor value, bool requires_grad, const void* param_tag = nullptr);

// Elementwise; shapes must match exactly.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_const(const Var& a, double c);

// b is [1 x D], broadcast over the rows of a [L x D].
Var add_rowvec(const Var& a, const Var& b);

Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T

Var relu(const Var& a);
Var gelu(const Var& a);
Var tanh_(const Var& a);

Var softmax_rows(const Var& a);
Var layernorm_rows(const Var& a, const Var& gamma, const Var& beta, double eps = 1e-5);

Var mean_rows(const Var& a);  // [L x D] -> [1 x D]
Var mean_all(const Var& a);   // -> [1]
Var sum_all(const Var& a);    // -> [1]

Var slice_cols(const Var& a, int64_t c0, int64_t c1);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var gather_rows(const Var& a, std::vector<int64_t> idx);

struct Conv3dDims {
  int64_t t = 1, h = 1, w = 1;       // input grid
  int64_t kt = 1, kh = 1, kw = 1;    // kernel
  int64_t st = 1, sh = 1, sw = 1;    // stride
  int64_t pt = 0, ph = 0, pw = 0;    // zero padding
  int64_t out_t() const { return (t + 2 * pt - kt) / st + 1; }
  int64_t out_h() const { return (h + 2 * ph - kh) / sh + 1; }
  int64_t out_w() const { return (w + 2 * pw - kw) / sw + 1; }
};

// x: [t*h*w x Cin] (position-major), weight: [kt*kh*kw*Cin x Cout],
// bias: [1 x Cout]. Returns [out_t*out_h*out_w x Cout].
Var conv3d(const Var& x, const Var& weight, const Var& bias, const Conv3dDims& d);

// Classification losses with closed-form gradients.
Var bce_with_logits(const Var& logits, const Tensor& targets);           // logits [n x 1]
Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels);  // [n x C]

// Reverse pass from root; seed defaults to ones (root is normally scalar).
void backward(const Var& root, const Tensor* seed = nullptr);

// Visits every reachable node that carries a param_tag and an accumulated
// gradient, in a deterministic graph order.
void visit_param_grads(const Var& root,
                       const std::function<void(const void* tag, const Tensor& grad)>& fn);

// Gradient of root w.r.t. one leaf (for input-sensitivity analyses).
Tensor input_grad(const Var& leaf_var);

}  // namespace t2v::ad
