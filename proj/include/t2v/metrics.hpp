#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace t2v::metrics {

// Pearson linear correlation. Throws DegenerateDataError on constant input.
double plcc(std::span<const double> s, std::span<const double> y);

// Spearman: Pearson over mid-ranks (average ranks for ties).
double srocc(std::span<const double> s, std::span<const double> y);

// Kendall tau-b via Knight's O(m log m) merge-sort counting.
double krocc(std::span<const double> s, std::span<const double> y);

double rmse(std::span<const double> s, std::span<const double> y);

// Mid-ranks in input order; ranks start at 1, ties share their average rank.
std::vector<double> midranks(std::span<const double> x);

struct QuarticFit {
  std::array<double, 5> coeffs{};   // ascending powers: c0 + c1 x + ... + c4 x^4
  std::vector<double> fitted;       // evaluated at the input predictions
  double residual = 0.0;            // sum of squared residuals
};

// Least-squares degree-4 polynomial mapping predictions to targets.
// Throws if fewer than 5 points. `degree` exists for the nested-model
// diagnostics and defaults to 4.
QuarticFit polynomial_fit(std::span<const double> s, std::span<const double> y,
                          int degree = 4);

struct MethodEval {
  std::string method;
  double srocc = 0.0, plcc = 0.0, krocc = 0.0, rmse = 0.0;
  int n_repeats = 0;
};

struct EvalReport {
  std::string dataset;
  std::vector<MethodEval> rows;
};

// Per-split metrics averaged over all splits. `predictions` maps method ->
// video_id -> score; every method must cover every test id of every split.
EvalReport compare_methods(
    const std::map<std::string, std::map<std::string, double>>& predictions,
    const std::map<std::string, double>& mos,
    const std::vector<std::vector<std::string>>& test_sets,
    const std::string& dataset_name = "synthetic");

}  // namespace t2v::metrics
