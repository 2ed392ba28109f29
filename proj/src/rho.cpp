#include "jkiv/rho.hpp"

namespace jkiv {

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::instruments_plus_intercept: return "instruments_plus_intercept";
    case BasisKind::instruments_only: return "instruments_only";
    case BasisKind::custom: return "custom";
  }
  return "custom";
}

std::string to_string(RhoMethod method) {
  switch (method) {
    case RhoMethod::lasso: return "lasso";
    case RhoMethod::post_lasso: return "post_lasso";
    case RhoMethod::known: return "known";
  }
  return "lasso";
}

Matrix BasisSpec::evaluate(const Matrix& Z) const {
  Matrix b;
  switch (kind) {
    case BasisKind::instruments_plus_intercept:
      b.resize(Z.rows(), Z.cols() + 1);
      b.col(0).setOnes();
      b.rightCols(Z.cols()) = Z;
      break;
    case BasisKind::instruments_only:
      b = Z;
      break;
    case BasisKind::custom:
      if (custom.rows() != Z.rows()) throw InputError("custom basis has wrong row count");
      b = custom;
      break;
  }
  if (b.cols() < 1) throw InputError("basis must have at least one column");
  if (!b.allFinite()) throw InputError("basis has non-finite values");
  return b;
}

Vector null_residuals(const Vector& y, const Matrix& X, const Vector& beta0) {
  if (X.rows() != y.size() || X.cols() != beta0.size())
    throw InputError("null_residuals: dimension mismatch");
  return y - X * beta0;
}

Matrix partial_out_endogenous(const Matrix& X, const Vector& eps, const Matrix& rho_values) {
  return X - (rho_values.array().colwise() * eps.array()).matrix();
}

RhoModel estimate_rho(const PartialledData& data, const Vector& beta0, const BasisSpec& basis,
                      RhoMethod method, const PenaltySelection& penalty, std::uint64_t seed,
                      const Matrix* known_rho, const LassoOptions& opts) {
  const Vector eps = null_residuals(data.y, data.X, beta0);
  const Index n = data.n();
  RhoModel model;
  model.method = method;

  if (method == RhoMethod::known) {
    if (known_rho == nullptr) throw InputError("rho method 'known' requires rho values");
    if (known_rho->rows() != n || known_rho->cols() != data.dx())
      throw InputError("known rho values must be n x d_x");
    model.rho_values = *known_rho;
    model.r_hat = partial_out_endogenous(data.X, eps, model.rho_values);
    return model;
  }

  const Matrix b = basis.evaluate(data.Z);
  const Matrix design = b.array().colwise() * eps.array();
  const int folds = penalty.folds == 0 ? static_cast<int>(n) : penalty.folds;
  model.rho_values.resize(n, data.dx());

  for (Index l = 0; l < data.dx(); ++l) {
    const Vector response = data.X.col(l);
    RhoComponent comp;
    comp.phi = Vector::Zero(design.cols());
    double lambda = 0.0;
    if (penalty.fixed_lambda) {
      lambda = *penalty.fixed_lambda;
    } else if (lasso_lambda_max(response, design) > 0.0) {
      // Each endogenous column gets its own fold permutation.
      lambda = cross_validate_lambda(response, design, folds,
                                     derive_seed(seed, Stream::cv_folds, static_cast<std::uint64_t>(l)),
                                     opts)
                   .best_lambda;
    }
    if (lambda > 0.0) comp.phi = lasso_fit(response, design, lambda, opts).coef;
    comp.lambda = lambda;
    comp.support = support_of(comp.phi);
    if (method == RhoMethod::post_lasso) {
      comp.phi = post_lasso_refit(response, design, comp.support);
      comp.support = support_of(comp.phi);
    }
    model.rho_values.col(l) = b * comp.phi;
    model.components.push_back(std::move(comp));
  }
  model.r_hat = partial_out_endogenous(data.X, eps, model.rho_values);
  return model;
}

}  // namespace jkiv
