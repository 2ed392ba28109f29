#pragma once

#include "jkiv/common.hpp"

#include <cstdint>
#include <vector>

namespace jkiv {

struct LassoOptions {
  double tol = 1e-7;      // max standardized coefficient change per sweep, relative to rms(response)
  double kkt_tol = 1e-6;  // scaled by max(1, rms(response) * max column rms)
  int max_sweeps = 100000;
};

/// Sufficient statistics of a least-squares problem: G = X'X / n, c = X'y / n.
/// The coordinate-descent solver only touches these, so cross-validation can
/// form per-fold problems by downdating.
struct GramProblem {
  Matrix G;
  Vector c;
  double yy = 0.0;  // y'y / n
  Index n = 0;

  static GramProblem from_data(const Vector& response, const Matrix& design);
};

struct LassoFit {
  Vector coef;
  int sweeps = 0;
  double kkt_violation = 0.0;
};

/// Largest useful penalty: max_j (2/n) |x_j' y|.
double lasso_lambda_max(const Vector& response, const Matrix& design);

/// Minimizes (1/n)||y - X phi||^2 + lambda ||phi||_1 by cyclic coordinate
/// descent on standardized columns. Zero columns get coefficient 0.
/// Throws NumericalError (with the final KKT violation) on non-convergence.
LassoFit lasso_fit(const Vector& response, const Matrix& design, double lambda,
                   const LassoOptions& opts = {});

/// Solver on precomputed Gram statistics, optionally warm-started.
LassoFit lasso_fit_gram(const GramProblem& problem, double lambda, const Vector* warm_start,
                        const LassoOptions& opts = {});

/// Max KKT violation of `coef` for the original-scale objective.
double lasso_kkt_violation(const Vector& response, const Matrix& design, const Vector& coef,
                           double lambda);

/// Decreasing log-spaced grid from lambda_max to ratio * lambda_max.
std::vector<double> lambda_grid(double lambda_max, int points = 100, double ratio = 1e-4);

/// Warm-started path; column k holds the solution at lambdas[k].
Matrix lasso_path(const GramProblem& problem, const std::vector<double>& lambdas,
                  const LassoOptions& opts = {});

struct CrossValidation {
  std::vector<double> lambdas;
  std::vector<double> cv_error;  // pooled out-of-fold MSE per lambda
  double best_lambda = 0.0;
  Index best_index = 0;
};

/// K-fold CV over a 100-point grid. Folds come from a seeded permutation;
/// K = n is leave-one-out. Ties go to the larger penalty.
CrossValidation cross_validate_lambda(const Vector& response, const Matrix& design, int folds,
                                      std::uint64_t seed, const LassoOptions& opts = {});

/// Unpenalized least squares on the support columns; zero elsewhere.
Vector post_lasso_refit(const Vector& response, const Matrix& design,
                        const std::vector<Index>& support);

std::vector<Index> support_of(const Vector& coef);

}  // namespace jkiv
