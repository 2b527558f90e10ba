#include "t2v/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "t2v/error.hpp"

namespace t2v::metrics {

namespace {
void check_lengths(std::span<const double> s, std::span<const double> y) {
  if (s.size() != y.size()) throw ShapeError("metric: vector length mismatch");
  if (s.size() < 2) throw ShapeError("metric: need at least 2 samples");
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

// Counts strict inversions (a[i] > a[j], i < j) by merge sort.
size_t count_inversions(std::vector<double>& a, std::vector<double>& buf, size_t lo,
                        size_t hi) {
  if (hi - lo < 2) return 0;
  const size_t mid = lo + (hi - lo) / 2;
  size_t inv = count_inversions(a, buf, lo, mid) + count_inversions(a, buf, mid, hi);
  size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (a[j] < a[i]) {
      inv += mid - i;
      buf[k++] = a[j++];
    } else {
      buf[k++] = a[i++];
    }
  }
  while (i < mid) buf[k++] = a[i++];
  while (j < hi) buf[k++] = a[j++];
  std::copy(buf.begin() + static_cast<long>(lo), buf.begin() + static_cast<long>(hi),
            a.begin() + static_cast<long>(lo));
  return inv;
}
}  // namespace

double plcc(std::span<const double> s, std::span<const double> y) {
  check_lengths(s, y);
  if (is_constant(s) || is_constant(y))
    throw DegenerateDataError("plcc: constant input vector");
  const size_t m = s.size();
  double ms = 0.0, my = 0.0;
  for (size_t i = 0; i < m; ++i) {
    ms += s[i];
    my += y[i];
  }
  ms /= static_cast<double>(m);
  my /= static_cast<double>(m);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < m; ++i) {
    const double ds = s[i] - ms, dy = y[i] - my;
    sxy += ds * dy;
    sxx += ds * ds;
    syy += dy * dy;
  }
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> midranks(std::span<const double> x) {
  const size_t m = x.size();
  std::vector<size_t> order(m);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(m);
  size_t i = 0;
  while (i < m) {
    size_t j = i;
    while (j + 1 < m && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;  // average of ranks i+1..j+1
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double srocc(std::span<const double> s, std::span<const double> y) {
  check_lengths(s, y);
  if (is_constant(s) || is_constant(y))
    throw DegenerateDataError("srocc: constant input vector");
  const auto rs = midranks(s);
  const auto ry = midranks(y);
  return plcc(rs, ry);
}

double krocc(std::span<const double> s, std::span<const double> y) {
  check_lengths(s, y);
  if (is_constant(s) || is_constant(y))
    throw DegenerateDataError("krocc: constant input vector");
  const size_t m = s.size();
  std::vector<size_t> order(m);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (s[a] != s[b]) return s[a] < s[b];
    return y[a] < y[b];
  });

  // Tie corrections: n1 over s-groups, n2 over y-groups, n3 over joint groups.
  auto tie_pairs = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double total = 0.0;
    size_t i = 0;
    while (i < v.size()) {
      size_t j = i;
      while (j + 1 < v.size() && v[j + 1] == v[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      total += t * (t - 1.0) / 2.0;
      i = j + 1;
    }
    return total;
  };
  const double n0 = static_cast<double>(m) * (static_cast<double>(m) - 1.0) / 2.0;
  const double n1 = tie_pairs({s.begin(), s.end()});
  const double n2 = tie_pairs({y.begin(), y.end()});
  double n3 = 0.0;
  {
    std::vector<std::pair<double, double>> xy(m);
    for (size_t i = 0; i < m; ++i) xy[i] = {s[i], y[i]};
    std::sort(xy.begin(), xy.end());
    size_t i = 0;
    while (i < m) {
      size_t j = i;
      while (j + 1 < m && xy[j + 1] == xy[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      n3 += t * (t - 1.0) / 2.0;
      i = j + 1;
    }
  }

  // With ties in s sorted by ascending y, equal-s pairs contribute no
  // inversions, so the inversion count is exactly the discordant-pair count.
  std::vector<double> ys(m), buf(m);
  for (size_t i = 0; i < m; ++i) ys[i] = y[order[i]];
  const double discordant =
      static_cast<double>(count_inversions(ys, buf, 0, m));

  const double c_minus_d = n0 - n1 - n2 + n3 - 2.0 * discordant;
  const double denom = std::sqrt((n0 - n1) * (n0 - n2));
  if (denom == 0.0) throw DegenerateDataError("krocc: degenerate tie structure");
  return c_minus_d / denom;
}

double rmse(std::span<const double> s, std::span<const double> y) {
  check_lengths(s, y);
  double acc = 0.0;
  for (size_t i = 0; i < s.size(); ++i) {
    const double d = s[i] - y[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(s.size()));
}

QuarticFit polynomial_fit(std::span<const double> s, std::span<const double> y,
                          int degree) {
  if (degree < 0 || degree > 4) throw ConfigError("polynomial_fit: degree out of range");
  if (s.size() != y.size()) throw ShapeError("polynomial_fit: length mismatch");
  const size_t m = s.size();
  if (m < static_cast<size_t>(degree) + 1)
    throw DegenerateDataError("polynomial_fit: underdetermined, need >= degree+1 points");
  Eigen::MatrixXd V(m, degree + 1);
  Eigen::VectorXd t(m);
  for (size_t i = 0; i < m; ++i) {
    double p = 1.0;
    for (int d = 0; d <= degree; ++d) {
      V(static_cast<long>(i), d) = p;
      p *= s[i];
    }
    t(static_cast<long>(i)) = y[i];
  }
  const Eigen::VectorXd a = V.colPivHouseholderQr().solve(t);
  QuarticFit fit;
  for (int d = 0; d <= degree; ++d) fit.coeffs[static_cast<size_t>(d)] = a(d);
  fit.fitted.resize(m);
  for (size_t i = 0; i < m; ++i) {
    double v = 0.0, p = 1.0;
    for (int d = 0; d <= degree; ++d) {
      v += fit.coeffs[static_cast<size_t>(d)] * p;
      p *= s[i];
    }
    fit.fitted[i] = v;
    const double r = v - y[i];
    fit.residual += r * r;
  }
  return fit;
}

EvalReport compare_methods(
    const std::map<std::string, std::map<std::string, double>>& predictions,
    const std::map<std::string, double>& mos,
    const std::vector<std::vector<std::string>>& test_sets,
    const std::string& dataset_name) {
  if (test_sets.empty()) throw ValidationError("compare_methods: no splits");
  EvalReport report;
  report.dataset = dataset_name;
  for (const auto& [method, scores] : predictions) {
    MethodEval row;
    row.method = method;
    for (const auto& test_ids : test_sets) {
      std::vector<double> s, y;
      s.reserve(test_ids.size());
      y.reserve(test_ids.size());
      for (const auto& id : test_ids) {
        const auto ps = scores.find(id);
        if (ps == scores.end())
          throw CoverageError("compare_methods: method '" + method +
                              "' has no score for video '" + id + "'");
        const auto pm = mos.find(id);
        if (pm == mos.end())
          throw CoverageError("compare_methods: no MOS for video '" + id + "'");
        s.push_back(ps->second);
        y.push_back(pm->second);
      }
      row.srocc += srocc(s, y);
      row.plcc += plcc(s, y);
      row.krocc += krocc(s, y);
      row.rmse += rmse(s, y);
      ++row.n_repeats;
    }
    const double inv = 1.0 / static_cast<double>(row.n_repeats);
    row.srocc *= inv;
    row.plcc *= inv;
    row.krocc *= inv;
    row.rmse *= inv;
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace t2v::metrics
