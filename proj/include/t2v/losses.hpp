#pragma once

#include <span>
#include <vector>

namespace t2v::training {

struct LossValue {
  double value = 0.0;
  std::vector<double> grad_s;  // d value / d s_i
};

// 0.5 * (1 - Pearson r(s, y)). Throws DegenerateDataError when either
// vector is constant; callers must not swallow that into a silent zero.
double loss_plcc(std::span<const double> s, std::span<const double> y);
LossValue loss_plcc_with_grad(std::span<const double> s, std::span<const double> y);

// Pairwise margin: (1/m^2) * sum_ij max(0, |y_i-y_j| - sign(y_i-y_j)(s_i-s_j)).
double loss_rank(std::span<const double> s, std::span<const double> y);
LossValue loss_rank_with_grad(std::span<const double> s, std::span<const double> y);

double total_loss(std::span<const double> s, std::span<const double> y,
                  double lambda_rank);
LossValue total_loss_with_grad(std::span<const double> s, std::span<const double> y,
                               double lambda_rank);

}  // namespace t2v::training
