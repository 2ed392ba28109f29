#include "jkiv/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace jkiv {

namespace {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// Coordinate descent state on the Gram form. Each coordinate update is the
// exact minimizer along the standardized column x_j / s_j (s_j^2 = G_jj) with
// penalty lambda / s_j, written back on the original scale.
class CoordinateDescent {
 public:
  CoordinateDescent(const GramProblem& p, double lambda, const LassoOptions& opts)
      : p_(p), lambda_(lambda), opts_(opts), scale_(p.G.diagonal().cwiseMax(0.0).cwiseSqrt()) {
    const double smax = scale_.size() ? scale_.maxCoeff() : 0.0;
    usable_.resize(scale_.size());
    for (Index j = 0; j < scale_.size(); ++j) usable_[j] = scale_(j) > 1e-14 * smax && smax > 0.0;
    y_rms_ = std::sqrt(std::max(p.yy, 0.0));
  }

  LassoFit solve(Vector coef) {
    const Index d = p_.G.rows();
    for (Index j = 0; j < d; ++j)
      if (!usable_[j]) coef(j) = 0.0;
    q_ = p_.G * coef;

    LassoFit fit;
    double tol = opts_.tol * std::max(y_rms_, 1e-300);
    const double kkt_tol =
        opts_.kkt_tol * std::max(1.0, y_rms_ * (scale_.size() ? scale_.maxCoeff() : 0.0));
    int sweeps = 0;
    while (sweeps < opts_.max_sweeps) {
      // Full sweep, then polish the active set until it settles.
      double change = sweep(coef, false);
      ++sweeps;
      while (change >= tol && sweeps < opts_.max_sweeps) {
        change = sweep(coef, true);
        ++sweeps;
        if (change < tol) {
          change = sweep(coef, false);
          ++sweeps;
        }
      }
      if (change >= tol) break;
      q_ = p_.G * coef;
      fit.kkt_violation = kkt_violation(coef);
      if (fit.kkt_violation <= kkt_tol) {
        fit.coef = std::move(coef);
        fit.sweeps = sweeps;
        return fit;
      }
      tol *= 0.1;
    }
    q_ = p_.G * coef;
    std::ostringstream msg;
    msg << "lasso did not converge after " << sweeps
        << " sweeps (KKT violation " << kkt_violation(coef) << ")";
    throw NumericalError(msg.str());
  }

  double kkt_violation(const Vector& coef) const {
    double worst = 0.0;
    for (Index j = 0; j < coef.size(); ++j) {
      if (!usable_[j]) continue;
      const double g = -2.0 * (p_.c(j) - q_(j));
      const double v = coef(j) == 0.0 ? std::max(0.0, std::abs(g) - lambda_)
                                       : std::abs(g + lambda_ * (coef(j) > 0 ? 1.0 : -1.0));
      worst = std::max(worst, v);
    }
    return worst;
  }

 private:
  double sweep(Vector& coef, bool active_only) {
    double max_change = 0.0;
    const Index d = coef.size();
    for (Index j = 0; j < d; ++j) {
      if (!usable_[j]) continue;
      const double old = coef(j);
      if (active_only && old == 0.0) continue;
      const double gjj = p_.G(j, j);
      const double partial = p_.c(j) - (q_(j) - gjj * old);
      const double updated = soft_threshold(partial, 0.5 * lambda_) / gjj;
      const double delta = updated - old;
      if (delta != 0.0) {
        coef(j) = updated;
        q_.noalias() += p_.G.col(j) * delta;
        max_change = std::max(max_change, scale_(j) * std::abs(delta));
      }
    }
    return max_change;
  }

  const GramProblem& p_;
  double lambda_;
  LassoOptions opts_;
  Vector scale_;
  std::vector<bool> usable_;
  double y_rms_ = 0.0;
  Vector q_;
};

}  // namespace

GramProblem GramProblem::from_data(const Vector& response, const Matrix& design) {
  if (design.rows() != response.size()) throw InputError("lasso: response/design row mismatch");
  GramProblem p;
  p.n = design.rows();
  const double inv_n = 1.0 / static_cast<double>(std::max<Index>(p.n, 1));
  p.G = Matrix(design.cols(), design.cols());
  p.G.setZero();
  p.G.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose(), inv_n);
  p.G = p.G.selfadjointView<Eigen::Lower>();
  p.c = design.transpose() * response * inv_n;
  p.yy = response.squaredNorm() * inv_n;
  return p;
}

double lasso_lambda_max(const Vector& response, const Matrix& design) {
  if (design.cols() == 0 || design.rows() == 0) return 0.0;
  return 2.0 * (design.transpose() * response).cwiseAbs().maxCoeff() /
         static_cast<double>(design.rows());
}

LassoFit lasso_fit_gram(const GramProblem& problem, double lambda, const Vector* warm_start,
                        const LassoOptions& opts) {
  if (!(lambda > 0.0)) throw InputError("lasso penalty must be positive");
  const Index d = problem.G.rows();
  Vector start = warm_start ? *warm_start : Vector::Zero(d);
  CoordinateDescent cd(problem, lambda, opts);
  return cd.solve(std::move(start));
}

LassoFit lasso_fit(const Vector& response, const Matrix& design, double lambda,
                   const LassoOptions& opts) {
  return lasso_fit_gram(GramProblem::from_data(response, design), lambda, nullptr, opts);
}

double lasso_kkt_violation(const Vector& response, const Matrix& design, const Vector& coef,
                           double lambda) {
  const Vector resid = response - design * coef;
  const Vector g = -2.0 / static_cast<double>(design.rows()) * (design.transpose() * resid);
  double worst = 0.0;
  for (Index j = 0; j < coef.size(); ++j) {
    if (design.col(j).squaredNorm() == 0.0) continue;
    const double v = coef(j) == 0.0 ? std::max(0.0, std::abs(g(j)) - lambda)
                                     : std::abs(g(j) + lambda * (coef(j) > 0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

std::vector<double> lambda_grid(double lambda_max, int points, double ratio) {
  std::vector<double> grid(static_cast<std::size_t>(points));
  if (points == 1) {
    grid[0] = lambda_max;
    return grid;
  }
  const double log_hi = std::log(lambda_max);
  const double log_lo = std::log(lambda_max * ratio);
  for (int k = 0; k < points; ++k)
    grid[static_cast<std::size_t>(k)] =
        std::exp(log_hi + (log_lo - log_hi) * static_cast<double>(k) / (points - 1));
  grid.front() = lambda_max;
  return grid;
}

Matrix lasso_path(const GramProblem& problem, const std::vector<double>& lambdas,
                  const LassoOptions& opts) {
  const Index d = problem.G.rows();
  Matrix path(d, static_cast<Index>(lambdas.size()));
  Vector warm = Vector::Zero(d);
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    LassoFit fit = lasso_fit_gram(problem, lambdas[k], &warm, opts);
    warm = fit.coef;
    path.col(static_cast<Index>(k)) = fit.coef;
  }
  return path;
}

CrossValidation cross_validate_lambda(const Vector& response, const Matrix& design, int folds,
                                      std::uint64_t seed, const LassoOptions& opts) {
  const Index n = design.rows();
  if (folds < 2 || folds > n) throw InputError("cross-validation needs 2 <= K <= n folds");
  CrossValidation cv;
  const double lmax = lasso_lambda_max(response, design);
  if (!(lmax > 0.0)) return cv;  // nothing to select: the zero model is optimal
  cv.lambdas = lambda_grid(lmax, 100, 1e-4);
  const Index L = static_cast<Index>(cv.lambdas.size());

  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Engine eng = make_engine(seed, Stream::cv_folds, 0);
  std::shuffle(perm.begin(), perm.end(), eng);
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) fold_of[perm[k]] = static_cast<int>(k % folds);

  const GramProblem full = GramProblem::from_data(response, design);
  const double nd = static_cast<double>(n);
  Vector sse = Vector::Zero(L);
  for (int f = 0; f < folds; ++f) {
    std::vector<Index> test;
    for (Index i = 0; i < n; ++i)
      if (fold_of[i] == f) test.push_back(i);
    const Index nt = static_cast<Index>(test.size());
    Matrix Xt(nt, design.cols());
    Vector yt(nt);
    for (Index k = 0; k < nt; ++k) {
      Xt.row(k) = design.row(test[k]);
      yt(k) = response(test[k]);
    }
    GramProblem train;
    train.n = n - nt;
    const double nr = static_cast<double>(train.n);
    train.G = (full.G * nd - Xt.transpose() * Xt) / nr;
    train.c = (full.c * nd - Xt.transpose() * yt) / nr;
    train.yy = std::max(0.0, (full.yy * nd - yt.squaredNorm()) / nr);
    const Matrix path = lasso_path(train, cv.lambdas, opts);
    const Matrix resid = (-(Xt * path)).colwise() + yt;
    sse += resid.colwise().squaredNorm().transpose();
  }
  cv.cv_error.resize(static_cast<std::size_t>(L));
  cv.best_index = 0;
  for (Index k = 0; k < L; ++k) {
    cv.cv_error[static_cast<std::size_t>(k)] = sse(k) / nd;
    if (sse(k) < sse(cv.best_index)) cv.best_index = k;
  }
  cv.best_lambda = cv.lambdas[static_cast<std::size_t>(cv.best_index)];
  return cv;
}

Vector post_lasso_refit(const Vector& response, const Matrix& design,
                        const std::vector<Index>& support) {
  Vector coef = Vector::Zero(design.cols());
  if (support.empty()) return coef;
  if (static_cast<Index>(support.size()) >= design.rows())
    throw InputError("post-lasso refit needs fewer support columns than observations");
  Matrix Xs(design.rows(), static_cast<Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k)
    Xs.col(static_cast<Index>(k)) = design.col(support[k]);
  const Vector b = Eigen::CompleteOrthogonalDecomposition<Matrix>(Xs).solve(response);
  for (std::size_t k = 0; k < support.size(); ++k) coef(support[k]) = b(static_cast<Index>(k));
  return coef;
}

std::vector<Index> support_of(const Vector& coef) {
  std::vector<Index> s;
  for (Index j = 0; j < coef.size(); ++j)
    if (coef(j) != 0.0) s.push_back(j);
  return s;
}

}  // namespace jkiv
