#pragma once

#include "jkiv/common.hpp"
#include "jkiv/hat_matrix.hpp"

#include <map>
#include <string>

namespace jkiv {

/// Leave-one-out first-stage fits and their products with the null residuals.
struct FirstStage {
  Matrix Pi_hat;  // n x d_x, H * r_hat
  Matrix Pi_eps;  // n x d_x, eps_i * Pi_hat_i
};

struct StatisticValue {
  double value = 0.0;
  bool degenerate = false;
  std::map<std::string, double> extras;
};

FirstStage first_stage(const HatMatrix& H, const Matrix& r_hat, const Vector& eps);

/// Jackknife K-statistic eps' Pi (Pi_eps' Pi_eps)^{-1} Pi' eps. Flagged
/// degenerate (value 0) when lambda_min(D) <= sing_tol * max(lambda_max(D), 1).
StatisticValue jk_statistic(const Vector& eps, const FirstStage& fs, double sing_tol = 1e-10);

/// max_l |sum_i eps_i z_li| / ||z_l||.
StatisticValue sup_score(const Vector& eps, const Matrix& Z);

/// Rows whose leave-one-out weight norm is numerically zero are excluded from
/// the conditioning statistic; this returns sqrt(sum_{j!=i} h_ij^2) with zeros
/// for the excluded rows.
Vector conditioning_row_norms(const HatMatrix& H);

/// max_i |sum_{j!=i} h_ij r_j| / ||h_i.||, min over endogenous columns.
StatisticValue conditioning_statistic(const HatMatrix& H, const Matrix& r_hat);

/// Classical F-form Anderson-Rubin statistic (n - d_z)/d_z * eps'P eps / eps'M eps.
/// `dc` controls already partialled out reduce the residual degrees of freedom.
StatisticValue anderson_rubin(const Vector& eps, const Matrix& Z, Index dc = 0);

}  // namespace jkiv
