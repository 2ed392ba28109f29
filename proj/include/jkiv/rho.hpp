#pragma once

#include "jkiv/common.hpp"
#include "jkiv/data.hpp"
#include "jkiv/lasso.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace jkiv {

enum class BasisKind { instruments_plus_intercept, instruments_only, custom };

std::string to_string(BasisKind kind);

/// Basis b(z_i) used to approximate the conditional slope rho(z).
struct BasisSpec {
  BasisKind kind = BasisKind::instruments_plus_intercept;
  Matrix custom;  // n x d_b, used when kind == custom

  /// Evaluates the basis at every observation (n x d_b).
  Matrix evaluate(const Matrix& Z) const;
};

enum class RhoMethod { lasso, post_lasso, known };

std::string to_string(RhoMethod method);

/// How the penalty is chosen: K-fold CV (folds = 0 means leave-one-out) or fixed.
struct PenaltySelection {
  int folds = 10;
  std::optional<double> fixed_lambda;
};

struct RhoComponent {
  Vector phi;
  std::vector<Index> support;
  double lambda = 0.0;
};

/// Estimated conditional slopes and partialled-out endogenous variables.
struct RhoModel {
  RhoMethod method = RhoMethod::lasso;
  std::vector<RhoComponent> components;  // one per endogenous variable (empty when known)
  Matrix rho_values;                     // n x d_x
  Matrix r_hat;                          // n x d_x, x - rho * eps(beta0)
};

/// eps_i(beta0) = y_i - x_i' beta0.
Vector null_residuals(const Vector& y, const Matrix& X, const Vector& beta0);

/// r_hat = X - rho .* eps, column by column.
Matrix partial_out_endogenous(const Matrix& X, const Vector& eps, const Matrix& rho_values);

/// Fits rho_l(z) by l1-penalized regression of x_l on eps(beta0) * b(z).
/// `known_rho` (n x d_x) is required when method == known and ignored otherwise.
RhoModel estimate_rho(const PartialledData& data, const Vector& beta0, const BasisSpec& basis,
                      RhoMethod method, const PenaltySelection& penalty, std::uint64_t seed,
                      const Matrix* known_rho = nullptr, const LassoOptions& opts = {});

}  // namespace jkiv
