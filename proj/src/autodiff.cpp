#include "t2v/autodiff.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <unordered_set>

#include "t2v/error.hpp"

namespace t2v::ad {

namespace {
using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

std::shared_ptr<Node> make_node(Tensor value, std::vector<std::shared_ptr<Node>> parents) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.val().same_shape(b.val()))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.val().shape_str() +
                     " vs " + b.val().shape_str());
}

// Topological order via iterative post-order DFS.
std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (!seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  return order;  // parents before children
}
}  // namespace

void Node::accumulate(const Tensor& g) {
  if (grad.empty()) {
    grad = g;
  } else {
    grad.add_(g);
  }
}

double Var::scalar() const {
  if (n_->value.size() != 1) throw ShapeError("scalar(): tensor has size != 1");
  return n_->value[0];
}

Var constant(Tensor value) { return leaf(std::move(value), false); }

Var leaf(Tensor value, bool requires_grad, const void* param_tag) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->param_tag = param_tag;
  return Var(n);
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out = a.val();
  out.add_(b.val());
  auto n = make_node(std::move(out), {a.node(), b.node()});
  n->backward_fn = [](Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) p->accumulate(self.grad);
  };
  return Var(n);
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a.val();
  for (int64_t i = 0; i < out.size(); ++i) out[i] -= b.val()[i];
  auto n = make_node(std::move(out), {a.node(), b.node()});
  n->backward_fn = [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) {
      Tensor g = self.grad;
      g.scale_(-1.0);
      self.parents[1]->accumulate(g);
    }
  };
  return Var(n);
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a.val();
  for (int64_t i = 0; i < out.size(); ++i) out[i] *= b.val()[i];
  auto n = make_node(std::move(out), {a.node(), b.node()});
  n->backward_fn = [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (self.parents[0]->requires_grad) {
      Tensor g = self.grad;
      for (int64_t i = 0; i < g.size(); ++i) g[i] *= bv[i];
      self.parents[0]->accumulate(g);
    }
    if (self.parents[1]->requires_grad) {
      Tensor g = self.grad;
      for (int64_t i = 0; i < g.size(); ++i) g[i] *= av[i];
      self.parents[1]->accumulate(g);
    }
  };
  return Var(n);
}

Var scale(const Var& a, double c) {
  Tensor out = a.val();
  out.scale_(c);
  auto n = make_node(std::move(out), {a.node()});
  n->backward_fn = [c](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor g = self.grad;
    g.scale_(c);
    self.parents[0]->accumulate(g);
  };
  return Var(n);
}

Var add_const(const Var& a, double c) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.size(); ++i) out[i] += c;
  auto n = make_node(std::move(out), {a.node()});
  n->backward_fn = [](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
  };
  return Var(n);
}

Var add_rowvec(const Var& a, const Var& b) {
  const int64_t rows = a.val().rows(), cols = a.val().cols();
  if (b.val().rank() != 2 || b.val().rows() != 1 || b.val().cols() != cols)
    throw ShapeError("add_rowvec: bias shape " + b.val().shape_str());
  Tensor out = a.val();
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) out.at(r, c) += b.val()[c];
  auto n = make_node(std::move(out), {a.node(), b.node()});
  n->backward_fn = [rows, cols](Node& self) {
    if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
    if (self.parents[1]->requires_grad) {
      Tensor g({1, cols});
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c) g[c] += self.grad.at(r, c);
      self.parents[1]->accumulate(g);
    }
  };
  return Var(n);
}

Var matmul(const Var& a, const Var& b) {
  Tensor out = t2v::matmul(a.val(), b.val());
  auto n = make_node(std::move(out), {a.node(), b.node()});
  n->backward_fn = [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    const Tensor& go = self.grad;
    if (self.parents[0]->requires_grad) {
      Tensor ga({av.rows(), av.cols()});
      EMap(ga.data(), av.rows(), av.cols()).noalias() =
          ECMap(go.data(), go.rows(), go.cols()) *
          ECMap(bv.data(), bv.rows(), bv.cols()).transpose();
      self.parents[0]->accumulate(ga);
    }
    if (self.parents[1]->requires_grad) {
      Tensor gb({bv.rows(), bv.cols()});
      EMap(gb.data(), bv.rows(), bv.cols()).noalias() =
          ECMap(av.data(), av.rows(), av.cols()).transpose() *
          ECMap(go.data(), go.rows(), go.cols());
      self.parents[1]->accumulate(gb);
    }
  };
  return Var(n);
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.val().cols() != b.val().cols())
    throw ShapeError("matmul_nt: incompatible " + a.val().shape_str() + " , " + b.val().shape_str());
  Tensor out({a.val().rows(), b.val().rows()});
  EMap(out.data(), out.rows(), out.cols()).noalias() =
      ECMap(a.val().data(), a.val().rows(), a.val().cols()) *
      ECMap(b.val().data(), b.val().rows(), b.val().cols()).transpose();
  auto n = make_node(std::move(out), {a.node(), b.node()});
  n->backward_fn = [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    const Tensor& go = self.grad;  // [ra x rb]
    if (self.parents[0]->requires_grad) {
      Tensor ga({av.rows(), av.cols()});
      EMap(ga.data(), av.rows(), av.cols()).noalias() =
          ECMap(go.data(), go.rows(), go.cols()) * ECMap(bv.data(), bv.rows(), bv.cols());
      self.parents[0]->accumulate(ga);
    }
    if (self.parents[1]->requires_grad) {
      Tensor gb({bv.rows(), bv.cols()});
      EMap(gb.data(), bv.rows(), bv.cols()).noalias() =
          ECMap(go.data(), go.rows(), go.cols()).transpose() *
          ECMap(av.data(), av.rows(), av.cols());
      self.parents[1]->accumulate(gb);
    }
  };
  return Var(n);
}

Var relu(const Var& a) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  auto n = make_node(std::move(out), {a.node()});
  n->backward_fn = [](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor g = self.grad;
    const Tensor& x = self.parents[0]->value;
    for (int64_t i = 0; i < g.size(); ++i)
      if (x[i] <= 0.0) g[i] = 0.0;
    self.parents[0]->accumulate(g);
  };
  return Var(n);
}

namespace {
// tanh approximation of GELU; smooth enough for finite-difference checks.
inline double gelu_value(double x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  const double u = k * (x + 0.044715 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}
inline double gelu_deriv(double x) {
  constexpr double k = 0.7978845608028654;
  const double x3 = x * x * x;
  const double u = k * (x + 0.044715 * x3);
  const double t = std::tanh(u);
  const double du = k * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}
}  // namespace

Var gelu(const Var& a) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.size(); ++i) out[i] = gelu_value(out[i]);
  auto n = make_node(std::move(out), {a.node()});
  n->backward_fn = [](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor g = self.grad;
    const Tensor& x = self.parents[0]->value;
    for (int64_t i = 0; i < g.size(); ++i) g[i] *= gelu_deriv(x[i]);
    self.parents[0]->accumulate(g);
  };
  return Var(n);
}

Var tanh_(const Var& a) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  auto n = make_node(std::move(out), {a.node()});
  n->backward_fn = [](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor g = self.grad;
    const Tensor& y = self.value;
    for (int64_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - y[i] * y[i];
    self.parents[0]->accumulate(g);
  };
  return Var(n);
}

Var softmax_rows(const Var& a) {
  const int64_t rows = a.val().rows(), cols = a.val().cols();
  Tensor out = a.val();
  for (int64_t r = 0; r < rows; ++r) {
    double mx = out.at(r, 0);
    for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, out.at(r, c));
    double sum = 0.0;
    for (int64_t c = 0; c < cols; ++c) {
      const double e = std::exp(out.at(r, c) - mx);
      out.at(r, c) = e;
      sum += e;
    }
    for (int64_t c = 0; c < cols; ++c) out.at(r, c) /= sum;
  }
  auto n = make_node(std::move(out), {a.node()});
  n->backward_fn = [rows, cols](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    const Tensor& p = self.value;
    Tensor g({rows, cols});
    for (int64_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (int64_t c = 0; c < cols; ++c) dot += self.grad.at(r, c) * p.at(r, c);
      for (int64_t c = 0; c < cols; ++c)
        g.at(r, c) = p.at(r, c) * (self.grad.at(r, c) - dot);
    }
    self.parents[0]->accumulate(g);
  };
  return Var(n);
}

Var layernorm_rows(const Var& a, const Var& gamma, const Var& beta, double eps) {
  const int64_t rows = a.val().rows(), cols = a.val().cols();
  if (gamma.val().cols() != cols || beta.val().cols() != cols)
    throw ShapeError("layernorm_rows: affine shape mismatch");
  Tensor xhat({rows, cols});
  Tensor inv_sigma({rows, 1});
  Tensor out({rows, cols});
  for (int64_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (int64_t c = 0; c < cols; ++c) mean += a.val().at(r, c);
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (int64_t c = 0; c < cols; ++c) {
      const double d = a.val().at(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[r] = is;
    for (int64_t c = 0; c < cols; ++c) {
      const double xh = (a.val().at(r, c) - mean) * is;
      xhat.at(r, c) = xh;
      out.at(r, c) = xh * gamma.val()[c] + beta.val()[c];
    }
  }
  auto n = make_node(std::move(out), {a.node(), gamma.node(), beta.node()});
  n->backward_fn = [rows, cols, xhat = std::move(xhat),
                    inv_sigma = std::move(inv_sigma)](Node& self) {
    const Tensor& gam = self.parents[1]->value;
    if (self.parents[1]->requires_grad) {
      Tensor gg({1, cols});
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c) gg[c] += self.grad.at(r, c) * xhat.at(r, c);
      self.parents[1]->accumulate(gg);
    }
    if (self.parents[2]->requires_grad) {
      Tensor gb({1, cols});
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c) gb[c] += self.grad.at(r, c);
      self.parents[2]->accumulate(gb);
    }
    if (self.parents[0]->requires_grad) {
      Tensor gx({rows, cols});
      const double inv_n = 1.0 / static_cast<double>(cols);
      for (int64_t r = 0; r < rows; ++r) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int64_t c = 0; c < cols; ++c) {
          const double dy = self.grad.at(r, c) * gam[c];
          sum_dy += dy;
          sum_dy_xhat += dy * xhat.at(r, c);
        }
        for (int64_t c = 0; c < cols; ++c) {
          const double dy = self.grad.at(r, c) * gam[c];
          gx.at(r, c) =
              inv_sigma[r] * (dy - inv_n * sum_dy - xhat.at(r, c) * inv_n * sum_dy_xhat);
        }
      }
      self.parents[0]->accumulate(gx);
    }
  };
  return Var(n);
}

Var mean_rows(const Var& a) {
  const int64_t rows = a.val().rows(), cols = a.val().cols();
  Tensor out({1, cols});
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) out[c] += a.val().at(r, c);
  out.scale_(1.0 / static_cast<double>(rows));
  auto n = make_node(std::move(out), {a.node()});
  n->backward_fn = [rows, cols](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor g({rows, cols});
    const double inv = 1.0 / static_cast<double>(rows);
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c) g.at(r, c) = self.grad[c] * inv;
    self.parents[0]->accumulate(g);
  };
  return Var(n);
}

Var mean_all(const Var& a) {
  const int64_t sz = a.val().size();
  double s = 0.0;
  for (int64_t i = 0; i < sz; ++i) s += a.val()[i];
  auto n = make_node(Tensor::scalar(s / static_cast<double>(sz)), {a.node()});
  n->backward_fn = [sz](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor g = self.parents[0]->value;
    g.fill(self.grad[0] / static_cast<double>(sz));
    self.parents[0]->accumulate(g);
  };
  return Var(n);
}

Var sum_all(const Var& a) {
  double s = 0.0;
  for (int64_t i = 0; i < a.val().size(); ++i) s += a.val()[i];
  auto n = make_node(Tensor::scalar(s), {a.node()});
  n->backward_fn = [](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor g = self.parents[0]->value;
    g.fill(self.grad[0]);
    self.parents[0]->accumulate(g);
  };
  return Var(n);
}

Var slice_cols(const Var& a, int64_t c0, int64_t c1) {
  const int64_t rows = a.val().rows(), cols = a.val().cols();
  if (c0 < 0 || c1 > cols || c0 >= c1) throw ShapeError("slice_cols: bad range");
  Tensor out({rows, c1 - c0});
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = c0; c < c1; ++c) out.at(r, c - c0) = a.val().at(r, c);
  auto n = make_node(std::move(out), {a.node()});
  n->backward_fn = [rows, cols, c0, c1](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor g({rows, cols});
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = c0; c < c1; ++c) g.at(r, c) = self.grad.at(r, c - c0);
    self.parents[0]->accumulate(g);
  };
  return Var(n);
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: empty");
  const int64_t rows = parts[0].val().rows();
  int64_t cols = 0;
  for (const auto& p : parts) {
    if (p.val().rows() != rows) throw ShapeError("concat_cols: row mismatch");
    cols += p.val().cols();
  }
  Tensor out({rows, cols});
  std::vector<std::shared_ptr<Node>> parents;
  int64_t off = 0;
  for (const auto& p : parts) {
    const int64_t pc = p.val().cols();
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < pc; ++c) out.at(r, off + c) = p.val().at(r, c);
    parents.push_back(p.node());
    off += pc;
  }
  auto n = make_node(std::move(out), std::move(parents));
  n->backward_fn = [rows](Node& self) {
    int64_t off = 0;
    for (auto& p : self.parents) {
      const int64_t pc = p->value.cols();
      if (p->requires_grad) {
        Tensor g({rows, pc});
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < pc; ++c) g.at(r, c) = self.grad.at(r, off + c);
        p->accumulate(g);
      }
      off += pc;
    }
  };
  return Var(n);
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty");
  const int64_t cols = parts[0].val().cols();
  int64_t rows = 0;
  for (const auto& p : parts) {
    if (p.val().cols() != cols) throw ShapeError("concat_rows: col mismatch");
    rows += p.val().rows();
  }
  Tensor out({rows, cols});
  std::vector<std::shared_ptr<Node>> parents;
  int64_t off = 0;
  for (const auto& p : parts) {
    const int64_t pr = p.val().rows();
    for (int64_t r = 0; r < pr; ++r)
      for (int64_t c = 0; c < cols; ++c) out.at(off + r, c) = p.val().at(r, c);
    parents.push_back(p.node());
    off += pr;
  }
  auto n = make_node(std::move(out), std::move(parents));
  n->backward_fn = [cols](Node& self) {
    int64_t off = 0;
    for (auto& p : self.parents) {
      const int64_t pr = p->value.rows();
      if (p->requires_grad) {
        Tensor g({pr, cols});
        for (int64_t r = 0; r < pr; ++r)
          for (int64_t c = 0; c < cols; ++c) g.at(r, c) = self.grad.at(off + r, c);
        p->accumulate(g);
      }
      off += pr;
    }
  };
  return Var(n);
}

Var gather_rows(const Var& a, std::vector<int64_t> idx) {
  const int64_t rows = a.val().rows(), cols = a.val().cols();
  Tensor out({static_cast<int64_t>(idx.size()), cols});
  for (size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= rows) throw ShapeError("gather_rows: index out of range");
    for (int64_t c = 0; c < cols; ++c)
      out.at(static_cast<int64_t>(r), c) = a.val().at(idx[r], c);
  }
  auto n = make_node(std::move(out), {a.node()});
  n->backward_fn = [rows, cols, idx = std::move(idx)](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor g({rows, cols});
    for (size_t r = 0; r < idx.size(); ++r)
      for (int64_t c = 0; c < cols; ++c)
        g.at(idx[r], c) += self.grad.at(static_cast<int64_t>(r), c);
    self.parents[0]->accumulate(g);
  };
  return Var(n);
}

Var conv3d(const Var& x, const Var& weight, const Var& bias, const Conv3dDims& d) {
  const int64_t cin = x.val().cols();
  if (x.val().rows() != d.t * d.h * d.w)
    throw ShapeError("conv3d: input rows != t*h*w");
  const int64_t kvol = d.kt * d.kh * d.kw;
  if (weight.val().rows() != kvol * cin)
    throw ShapeError("conv3d: weight rows != kvol*cin");
  const int64_t cout = weight.val().cols();
  const int64_t ot = d.out_t(), oh = d.out_h(), ow = d.out_w();
  const int64_t pos = ot * oh * ow;

  // im2col: [pos x kvol*cin]
  auto im2col = std::make_shared<Tensor>(Tensor({pos, kvol * cin}));
  {
    int64_t p = 0;
    for (int64_t t = 0; t < ot; ++t)
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j, ++p) {
          const int64_t t0 = t * d.st - d.pt, i0 = i * d.sh - d.ph, j0 = j * d.sw - d.pw;
          int64_t k = 0;
          for (int64_t dt = 0; dt < d.kt; ++dt)
            for (int64_t di = 0; di < d.kh; ++di)
              for (int64_t dj = 0; dj < d.kw; ++dj, ++k) {
                const int64_t tt = t0 + dt, ii = i0 + di, jj = j0 + dj;
                if (tt < 0 || tt >= d.t || ii < 0 || ii >= d.h || jj < 0 || jj >= d.w)
                  continue;  // zero pad
                const int64_t src = (tt * d.h + ii) * d.w + jj;
                const double* srow = x.val().data() + src * cin;
                double* drow = im2col->data() + (p * kvol + k) * cin;
                for (int64_t c = 0; c < cin; ++c) drow[c] = srow[c];
              }
        }
  }

  Tensor out({pos, cout});
  EMap(out.data(), pos, cout).noalias() =
      ECMap(im2col->data(), pos, kvol * cin) *
      ECMap(weight.val().data(), kvol * cin, cout);
  for (int64_t p = 0; p < pos; ++p)
    for (int64_t c = 0; c < cout; ++c) out.at(p, c) += bias.val()[c];

  auto n = make_node(std::move(out), {x.node(), weight.node(), bias.node()});
  n->backward_fn = [d, cin, cout, kvol, pos, im2col](Node& self) {
    const Tensor& go = self.grad;  // [pos x cout]
    if (self.parents[1]->requires_grad) {
      Tensor gw({kvol * cin, cout});
      EMap(gw.data(), kvol * cin, cout).noalias() =
          ECMap(im2col->data(), pos, kvol * cin).transpose() *
          ECMap(go.data(), pos, cout);
      self.parents[1]->accumulate(gw);
    }
    if (self.parents[2]->requires_grad) {
      Tensor gb({1, cout});
      for (int64_t p = 0; p < pos; ++p)
        for (int64_t c = 0; c < cout; ++c) gb[c] += go.at(p, c);
      self.parents[2]->accumulate(gb);
    }
    if (self.parents[0]->requires_grad) {
      Tensor gcol({pos, kvol * cin});
      EMap(gcol.data(), pos, kvol * cin).noalias() =
          ECMap(go.data(), pos, cout) *
          ECMap(self.parents[1]->value.data(), kvol * cin, cout).transpose();
      Tensor gx({d.t * d.h * d.w, cin});
      const int64_t ot = d.out_t(), oh = d.out_h(), ow = d.out_w();
      int64_t p = 0;
      for (int64_t t = 0; t < ot; ++t)
        for (int64_t i = 0; i < oh; ++i)
          for (int64_t j = 0; j < ow; ++j, ++p) {
            const int64_t t0 = t * d.st - d.pt, i0 = i * d.sh - d.ph, j0 = j * d.sw - d.pw;
            int64_t k = 0;
            for (int64_t dt = 0; dt < d.kt; ++dt)
              for (int64_t di = 0; di < d.kh; ++di)
                for (int64_t dj = 0; dj < d.kw; ++dj, ++k) {
                  const int64_t tt = t0 + dt, ii = i0 + di, jj = j0 + dj;
                  if (tt < 0 || tt >= d.t || ii < 0 || ii >= d.h || jj < 0 || jj >= d.w)
                    continue;
                  const int64_t dst = (tt * d.h + ii) * d.w + jj;
                  const double* srow = gcol.data() + (p * kvol + k) * cin;
                  double* drow = gx.data() + dst * cin;
                  for (int64_t c = 0; c < cin; ++c) drow[c] += srow[c];
                }
          }
      self.parents[0]->accumulate(gx);
    }
  };
  return Var(n);
}

Var bce_with_logits(const Var& logits, const Tensor& targets) {
  const int64_t n_items = logits.val().size();
  if (targets.size() != n_items) throw ShapeError("bce_with_logits: target size mismatch");
  double loss = 0.0;
  for (int64_t i = 0; i < n_items; ++i) {
    const double z = logits.val()[i], t = targets[i];
    loss += std::max(z, 0.0) - t * z + std::log1p(std::exp(-std::abs(z)));
  }
  loss /= static_cast<double>(n_items);
  auto n = make_node(Tensor::scalar(loss), {logits.node()});
  n->backward_fn = [targets, n_items](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor g = self.parents[0]->value;
    const double s = self.grad[0] / static_cast<double>(n_items);
    for (int64_t i = 0; i < n_items; ++i) {
      const double z = self.parents[0]->value[i];
      const double sig = 1.0 / (1.0 + std::exp(-z));
      g[i] = s * (sig - targets[i]);
    }
    self.parents[0]->accumulate(g);
  };
  return Var(n);
}

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels) {
  const int64_t rows = logits.val().rows(), cols = logits.val().cols();
  if (static_cast<int64_t>(labels.size()) != rows)
    throw ShapeError("softmax_cross_entropy: label count mismatch");
  Tensor probs({rows, cols});
  double loss = 0.0;
  for (int64_t r = 0; r < rows; ++r) {
    double mx = logits.val().at(r, 0);
    for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, logits.val().at(r, c));
    double sum = 0.0;
    for (int64_t c = 0; c < cols; ++c) {
      const double e = std::exp(logits.val().at(r, c) - mx);
      probs.at(r, c) = e;
      sum += e;
    }
    for (int64_t c = 0; c < cols; ++c) probs.at(r, c) /= sum;
    loss -= std::log(std::max(probs.at(r, labels[r]), 1e-300));
  }
  loss /= static_cast<double>(rows);
  auto n = make_node(Tensor::scalar(loss), {logits.node()});
  n->backward_fn = [labels, probs = std::move(probs), rows, cols](Node& self) {
    if (!self.parents[0]->requires_grad) return;
    Tensor g({rows, cols});
    const double s = self.grad[0] / static_cast<double>(rows);
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c)
        g.at(r, c) = s * (probs.at(r, c) - (labels[r] == c ? 1.0 : 0.0));
    self.parents[0]->accumulate(g);
  };
  return Var(n);
}

void backward(const Var& root, const Tensor* seed) {
  Node* r = root.node().get();
  if (!r->requires_grad) return;
  if (seed) {
    if (!seed->same_shape(r->value)) throw ShapeError("backward: seed shape mismatch");
    r->accumulate(*seed);
  } else {
    Tensor ones = r->value;
    ones.fill(1.0);
    r->accumulate(ones);
  }
  auto order = topo_order(r);  // parents before children
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->requires_grad && !n->grad.empty()) n->backward_fn(*n);
  }
}

void visit_param_grads(const Var& root,
                       const std::function<void(const void*, const Tensor&)>& fn) {
  auto order = topo_order(root.node().get());
  for (Node* n : order)
    if (n->param_tag && !n->grad.empty()) fn(n->param_tag, n->grad);
}

Tensor input_grad(const Var& leaf_var) {
  const Node* n = leaf_var.node().get();
  if (n->grad.empty()) {
    Tensor z = n->value;
    z.fill(0.0);
    return z;
  }
  return n->grad;
}

}  // namespace t2v::ad
