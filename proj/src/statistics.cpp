#include "jkiv/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jkiv {

FirstStage first_stage(const HatMatrix& H, const Matrix& r_hat, const Vector& eps) {
  if (r_hat.rows() != H.n() || eps.size() != H.n())
    throw InputError("first_stage: dimension mismatch");
  FirstStage fs;
  fs.Pi_hat = H.matrix() * r_hat;
  fs.Pi_eps = fs.Pi_hat.array().colwise() * eps.array();
  return fs;
}

StatisticValue jk_statistic(const Vector& eps, const FirstStage& fs, double sing_tol) {
  StatisticValue out;
  const Matrix D = fs.Pi_eps.transpose() * fs.Pi_eps;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(D, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  out.extras["lambda_min"] = lmin;
  out.extras["lambda_max"] = lmax;
  if (!(lmin > sing_tol * std::max(lmax, 1.0))) {
    out.degenerate = true;
    out.value = 0.0;
    return out;
  }
  const Vector score = fs.Pi_hat.transpose() * eps;
  out.value = std::max(0.0, score.dot(D.ldlt().solve(score)));
  return out;
}

StatisticValue sup_score(const Vector& eps, const Matrix& Z) {
  if (Z.rows() != eps.size()) throw InputError("sup_score: dimension mismatch");
  StatisticValue out;
  const Vector norms = Z.colwise().norm().transpose();
  if (norms.size() == 0 || norms.minCoeff() == 0.0)
    throw InputError("sup_score: instrument column with zero norm");
  const Vector scores = (Z.transpose() * eps).cwiseQuotient(norms).cwiseAbs();
  Index arg = 0;
  out.value = scores.maxCoeff(&arg);
  out.extras["argmax_instrument"] = static_cast<double>(arg);
  return out;
}

Vector conditioning_row_norms(const HatMatrix& H) {
  Vector norms = H.matrix().rowwise().norm();
  const double mx = norms.size() ? norms.maxCoeff() : 0.0;
  for (Index i = 0; i < norms.size(); ++i)
    if (!(norms(i) > 1e-10 * mx)) norms(i) = 0.0;
  return norms;
}

StatisticValue conditioning_statistic(const HatMatrix& H, const Matrix& r_hat) {
  if (r_hat.rows() != H.n()) throw InputError("conditioning_statistic: dimension mismatch");
  const Vector norms = conditioning_row_norms(H);
  const Index used = (norms.array() > 0.0).count();
  if (used == 0) throw InputError("conditioning_statistic: every hat-matrix row has zero norm");
  StatisticValue out;
  out.extras["excluded_rows"] = static_cast<double>(H.n() - used);
  const Matrix fitted = H.matrix() * r_hat;
  double result = std::numeric_limits<double>::infinity();
  for (Index l = 0; l < fitted.cols(); ++l) {
    double mx = 0.0;
    for (Index i = 0; i < fitted.rows(); ++i)
      if (norms(i) > 0.0) mx = std::max(mx, std::abs(fitted(i, l)) / norms(i));
    result = std::min(result, mx);
  }
  out.value = fitted.cols() ? result : 0.0;
  return out;
}

StatisticValue anderson_rubin(const Vector& eps, const Matrix& Z, Index dc) {
  const Index n = Z.rows();
  const Index k = Z.cols();
  if (eps.size() != n) throw InputError("anderson_rubin: dimension mismatch");
  const Index df2 = n - k - dc;
  if (df2 < 1) throw InputError("anderson_rubin: needs fewer instruments than observations");
  Eigen::ColPivHouseholderQR<Matrix> qr(Z);
  if (qr.rank() < k) throw InputError("anderson_rubin: instruments are rank deficient");
  const Vector fitted = Z * qr.solve(eps);
  const double explained = fitted.squaredNorm();
  const double resid = (eps - fitted).squaredNorm();
  if (!(resid > 1e-20 * eps.squaredNorm()))
    throw NumericalError("anderson_rubin: null residuals lie in the instrument span (zero residual variance)");
  StatisticValue out;
  out.value = static_cast<double>(df2) / static_cast<double>(k) * explained / resid;
  out.extras["df1"] = static_cast<double>(k);
  out.extras["df2"] = static_cast<double>(df2);
  return out;
}

}  // namespace jkiv
