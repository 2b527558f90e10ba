#include "t2v/losses.hpp"

#include <algorithm>
#include <cmath>

#include "t2v/error.hpp"

namespace t2v::training {

namespace {
void check(std::span<const double> s, std::span<const double> y) {
  if (s.size() != y.size()) throw ShapeError("loss: vector length mismatch");
  if (s.size() < 2) throw ShapeError("loss: need at least 2 samples");
}

bool constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
}  // namespace

double loss_plcc(std::span<const double> s, std::span<const double> y) {
  return loss_plcc_with_grad(s, y).value;
}

LossValue loss_plcc_with_grad(std::span<const double> s, std::span<const double> y) {
  check(s, y);
  if (constant(y)) throw DegenerateDataError("loss_plcc: constant targets");
  if (constant(s)) throw DegenerateDataError("loss_plcc: constant predictions");
  const size_t m = s.size();
  double ms = 0.0, my = 0.0;
  for (size_t i = 0; i < m; ++i) {
    ms += s[i];
    my += y[i];
  }
  ms /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double a = 0.0, b = 0.0, c = 0.0;  // cross, s-variance, y-variance sums
  for (size_t i = 0; i < m; ++i) {
    const double ds = s[i] - ms, dy = y[i] - my;
    a += ds * dy;
    b += ds * ds;
    c += dy * dy;
  }
  const double root = std::sqrt(b * c);
  const double r = a / root;
  LossValue out;
  out.value = 0.5 * (1.0 - r);
  out.grad_s.resize(m);
  for (size_t i = 0; i < m; ++i) {
    const double ds = s[i] - ms, dy = y[i] - my;
    const double dr = (dy - (a / b) * ds) / root;
    out.grad_s[i] = -0.5 * dr;
  }
  return out;
}

double loss_rank(std::span<const double> s, std::span<const double> y) {
  check(s, y);
  const size_t m = s.size();
  double acc = 0.0;
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < m; ++j) {
      const double e = sign(y[i] - y[j]);
      acc += std::max(0.0, std::abs(y[i] - y[j]) - e * (s[i] - s[j]));
    }
  return acc / static_cast<double>(m * m);
}

LossValue loss_rank_with_grad(std::span<const double> s, std::span<const double> y) {
  check(s, y);
  const size_t m = s.size();
  LossValue out;
  out.grad_s.assign(m, 0.0);
  const double inv = 1.0 / static_cast<double>(m * m);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < m; ++j) {
      const double e = sign(y[i] - y[j]);
      const double h = std::abs(y[i] - y[j]) - e * (s[i] - s[j]);
      if (h > 0.0) {
        out.value += h;
        out.grad_s[i] -= e * inv;
        out.grad_s[j] += e * inv;
      }
    }
  out.value *= inv;
  return out;
}

double total_loss(std::span<const double> s, std::span<const double> y,
                  double lambda_rank) {
  return loss_plcc(s, y) + lambda_rank * loss_rank(s, y);
}

LossValue total_loss_with_grad(std::span<const double> s, std::span<const double> y,
                               double lambda_rank) {
  LossValue p = loss_plcc_with_grad(s, y);
  const LossValue r = loss_rank_with_grad(s, y);
  p.value += lambda_rank * r.value;
  for (size_t i = 0; i < p.grad_s.size(); ++i) p.grad_s[i] += lambda_rank * r.grad_s[i];
  return p;
}

}  // namespace t2v::training
