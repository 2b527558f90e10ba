#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "t2v/autodiff.hpp"
#include "t2v/rng.hpp"
#include "t2v/tensor.hpp"

namespace t2v::nn {

// A named, persistent weight. `trainable` is flipped by the stage scheduler;
// frozen parameters never receive gradients and are skipped by the optimizer.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  void zero_grad() {
    if (grad.empty() || !grad.same_shape(value)) grad = Tensor(value.shape());
    grad.fill(0.0);
  }
};

// Per-forward context. Deduplicates parameter leaves so a weight shared
// across calls (e.g. one frame encoder applied to N frames) appears once in
// the graph, and lets eval-mode forwards skip gradient bookkeeping.
class Graph {
 public:
  explicit Graph(bool train_mode) : train_(train_mode) {}

  ad::Var use(Parameter& p) {
    auto it = leaves_.find(&p);
    if (it != leaves_.end()) return it->second;
    ad::Var v = ad::leaf(p.value, train_ && p.trainable, &p);
    leaves_.emplace(&p, v);
    return v;
  }

  bool train_mode() const { return train_; }

 private:
  bool train_;
  std::unordered_map<const Parameter*, ad::Var> leaves_;
};

// After backward(), folds the graph's leaf gradients into Parameter::grad.
void accumulate_param_grads(const ad::Var& root);

class Module {
 public:
  virtual ~Module() = default;
  virtual void collect(std::vector<Parameter*>& out) = 0;

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    collect(out);
    return out;
  }
};

class Linear : public Module {
 public:
  Linear(const std::string& name, int64_t in, int64_t out, Rng& rng);
  ad::Var forward(Graph& g, const ad::Var& x);
  void collect(std::vector<Parameter*>& out) override;

  Parameter w;  // [in x out]
  Parameter b;  // [1 x out]
};

class LayerNorm : public Module {
 public:
  LayerNorm(const std::string& name, int64_t dim);
  ad::Var forward(Graph& g, const ad::Var& x);
  void collect(std::vector<Parameter*>& out) override;

  Parameter gamma, beta;
};

class MultiheadAttention : public Module {
 public:
  MultiheadAttention(const std::string& name, int64_t dim, int heads, Rng& rng);
  // Self-attention when kv == q.
  ad::Var forward(Graph& g, const ad::Var& q, const ad::Var& kv);
  void collect(std::vector<Parameter*>& out) override;

  int heads() const { return heads_; }

 private:
  int64_t dim_;
  int heads_;
  Linear wq_, wk_, wv_, wo_;
};

class FeedForward : public Module {
 public:
  FeedForward(const std::string& name, int64_t dim, int64_t hidden, Rng& rng);
  ad::Var forward(Graph& g, const ad::Var& x);
  void collect(std::vector<Parameter*>& out) override;

 private:
  Linear fc1_, fc2_;
};

// Pre-norm residual block: x + SA(LN(x)), then x + FFN(LN(x)).
class TransformerBlock : public Module {
 public:
  TransformerBlock(const std::string& name, int64_t dim, int heads, int64_t ffn_hidden,
                   Rng& rng);
  ad::Var forward(Graph& g, const ad::Var& x);
  // Attention restricted to row groups (3D window partition); groups must
  // cover every row exactly once.
  ad::Var forward_windowed(Graph& g, const ad::Var& x,
                           const std::vector<std::vector<int64_t>>& windows);
  void collect(std::vector<Parameter*>& out) override;

 private:
  LayerNorm ln1_, ln2_;
  MultiheadAttention attn_;
  FeedForward ffn_;
};

// Conv3d + channel LayerNorm + GELU on position-major tokens.
class ConvBlock : public Module {
 public:
  ConvBlock(const std::string& name, int64_t cin, int64_t cout, ad::Conv3dDims dims,
            Rng& rng);
  // x: [t*h*w x cin] for the dims this block was built with.
  ad::Var forward(Graph& g, const ad::Var& x);
  void collect(std::vector<Parameter*>& out) override;

  const ad::Conv3dDims& dims() const { return dims_; }

 private:
  ad::Conv3dDims dims_;
  Parameter w_, b_;
  LayerNorm ln_;
};

class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Parameter*>& params, double lr);
  static void zero_grad(const std::vector<Parameter*>& params);

 private:
  struct State {
    Tensor m, v;
  };
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::unordered_map<Parameter*, State> state_;
};

// Init helpers (deterministic given rng state).
Tensor xavier_uniform(std::vector<int64_t> shape, int64_t fan_in, int64_t fan_out, Rng& rng);
Tensor he_normal(std::vector<int64_t> shape, int64_t fan_in, Rng& rng);

}  // namespace t2v::nn
