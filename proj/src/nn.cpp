#include "t2v/nn.hpp"

#include <cmath>

#include "t2v/error.hpp"

namespace t2v::nn {

using ad::Var;

void accumulate_param_grads(const ad::Var& root) {
  ad::visit_param_grads(root, [](const void* tag, const Tensor& g) {
    auto* p = const_cast<Parameter*>(static_cast<const Parameter*>(tag));
    if (p->grad.empty() || !p->grad.same_shape(p->value)) p->zero_grad();
    p->grad.add_(g);
  });
}

Tensor xavier_uniform(std::vector<int64_t> shape, int64_t fan_in, int64_t fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-limit, limit);
  return t;
}

Tensor he_normal(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, std);
  return t;
}

Linear::Linear(const std::string& name, int64_t in, int64_t out, Rng& rng) {
  w.name = name + ".w";
  w.value = xavier_uniform({in, out}, in, out, rng);
  b.name = name + ".b";
  b.value = Tensor({1, out});
}

Var Linear::forward(Graph& g, const Var& x) {
  return ad::add_rowvec(ad::matmul(x, g.use(w)), g.use(b));
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

LayerNorm::LayerNorm(const std::string& name, int64_t dim) {
  gamma.name = name + ".gamma";
  gamma.value = Tensor::full({1, dim}, 1.0);
  beta.name = name + ".beta";
  beta.value = Tensor({1, dim});
}

Var LayerNorm::forward(Graph& g, const Var& x) {
  return ad::layernorm_rows(x, g.use(gamma), g.use(beta));
}

void LayerNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

MultiheadAttention::MultiheadAttention(const std::string& name, int64_t dim, int heads,
                                       Rng& rng)
    : dim_(dim),
      heads_(heads),
      wq_(name + ".q", dim, dim, rng),
      wk_(name + ".k", dim, dim, rng),
      wv_(name + ".v", dim, dim, rng),
      wo_(name + ".o", dim, dim, rng) {
  if (dim % heads != 0) throw ConfigError("attention width not divisible by head count");
}

Var MultiheadAttention::forward(Graph& g, const Var& q, const Var& kv) {
  const Var Q = wq_.forward(g, q);
  const Var K = wk_.forward(g, kv);
  const Var V = wv_.forward(g, kv);
  const int64_t dk = dim_ / heads_;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Var> outs;
  outs.reserve(static_cast<size_t>(heads_));
  for (int h = 0; h < heads_; ++h) {
    const Var Qh = ad::slice_cols(Q, h * dk, (h + 1) * dk);
    const Var Kh = ad::slice_cols(K, h * dk, (h + 1) * dk);
    const Var Vh = ad::slice_cols(V, h * dk, (h + 1) * dk);
    const Var A = ad::softmax_rows(ad::scale(ad::matmul_nt(Qh, Kh), inv_sqrt));
    outs.push_back(ad::matmul(A, Vh));
  }
  return wo_.forward(g, ad::concat_cols(outs));
}

void MultiheadAttention::collect(std::vector<Parameter*>& out) {
  wq_.collect(out);
  wk_.collect(out);
  wv_.collect(out);
  wo_.collect(out);
}

FeedForward::FeedForward(const std::string& name, int64_t dim, int64_t hidden, Rng& rng)
    : fc1_(name + ".fc1", dim, hidden, rng), fc2_(name + ".fc2", hidden, dim, rng) {}

Var FeedForward::forward(Graph& g, const Var& x) {
  return fc2_.forward(g, ad::gelu(fc1_.forward(g, x)));
}

void FeedForward::collect(std::vector<Parameter*>& out) {
  fc1_.collect(out);
  fc2_.collect(out);
}

TransformerBlock::TransformerBlock(const std::string& name, int64_t dim, int heads,
                                   int64_t ffn_hidden, Rng& rng)
    : ln1_(name + ".ln1", dim),
      ln2_(name + ".ln2", dim),
      attn_(name + ".attn", dim, heads, rng),
      ffn_(name + ".ffn", dim, ffn_hidden, rng) {}

Var TransformerBlock::forward(Graph& g, const Var& x) {
  const Var n1 = ln1_.forward(g, x);
  Var y = ad::add(x, attn_.forward(g, n1, n1));
  y = ad::add(y, ffn_.forward(g, ln2_.forward(g, y)));
  return y;
}

Var TransformerBlock::forward_windowed(Graph& g, const Var& x,
                                       const std::vector<std::vector<int64_t>>& windows) {
  const Var n1 = ln1_.forward(g, x);
  // Block-diagonal attention: each window attends within itself.
  std::vector<Var> parts;
  std::vector<int64_t> perm;
  parts.reserve(windows.size());
  for (const auto& win : windows) {
    const Var xw = ad::gather_rows(n1, win);
    parts.push_back(attn_.forward(g, xw, xw));
    perm.insert(perm.end(), win.begin(), win.end());
  }
  if (static_cast<int64_t>(perm.size()) != x.val().rows())
    throw ShapeError("window partition does not cover all tokens");
  std::vector<int64_t> inverse(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) inverse[static_cast<size_t>(perm[i])] = static_cast<int64_t>(i);
  const Var attended = ad::gather_rows(ad::concat_rows(parts), inverse);
  Var y = ad::add(x, attended);
  y = ad::add(y, ffn_.forward(g, ln2_.forward(g, y)));
  return y;
}

void TransformerBlock::collect(std::vector<Parameter*>& out) {
  ln1_.collect(out);
  ln2_.collect(out);
  attn_.collect(out);
  ffn_.collect(out);
}

ConvBlock::ConvBlock(const std::string& name, int64_t cin, int64_t cout,
                     ad::Conv3dDims dims, Rng& rng)
    : dims_(dims), ln_(name + ".ln", cout) {
  const int64_t kvol = dims.kt * dims.kh * dims.kw;
  w_.name = name + ".w";
  w_.value = he_normal({kvol * cin, cout}, kvol * cin, rng);
  b_.name = name + ".b";
  b_.value = Tensor({1, cout});
}

Var ConvBlock::forward(Graph& g, const Var& x) {
  return ad::gelu(ln_.forward(g, ad::conv3d(x, g.use(w_), g.use(b_), dims_)));
}

void ConvBlock::collect(std::vector<Parameter*>& out) {
  out.push_back(&w_);
  out.push_back(&b_);
  ln_.collect(out);
}

void Adam::step(const std::vector<Parameter*>& params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Parameter* p : params) {
    if (!p->trainable || p->grad.empty()) continue;
    auto& st = state_[p];
    if (st.m.empty()) {
      st.m = Tensor(p->value.shape());
      st.v = Tensor(p->value.shape());
    }
    for (int64_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      st.m[i] = beta1_ * st.m[i] + (1.0 - beta1_) * g;
      st.v[i] = beta2_ * st.v[i] + (1.0 - beta2_) * g * g;
      const double mhat = st.m[i] / bc1;
      const double vhat = st.v[i] / bc2;
      p->value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void Adam::zero_grad(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace t2v::nn
