#include "jkiv/hat_matrix.hpp"

#include "jkiv/data.hpp"

#include <algorithm>
#include <cmath>

namespace jkiv {

namespace {

constexpr double kRankTol = 1e-10;

struct ThinSvd {
  Matrix U;
  Vector s;
};

ThinSvd thin_svd(const Matrix& Z) {
  Eigen::BDCSVD<Matrix> svd(Z, Eigen::ComputeThinU);
  return {svd.matrixU(), svd.singularValues()};
}

// Smoother weights s^2 / (s^2 + lambda); singular values below the rank
// tolerance count as exact zeros (pseudo-inverse convention at lambda = 0).
Vector shrinkage(const Vector& s, double lambda) {
  const double smax = s.size() ? s.maxCoeff() : 0.0;
  Vector w(s.size());
  for (Index k = 0; k < s.size(); ++k) {
    const double s2 = s(k) * s(k);
    if (s(k) <= kRankTol * smax) {
      w(k) = 0.0;
    } else {
      w(k) = s2 / (s2 + lambda);
    }
  }
  return w;
}

Matrix smoother(const ThinSvd& svd, double lambda) {
  const Vector w = shrinkage(svd.s, lambda);
  Matrix H = (svd.U * w.asDiagonal()) * svd.U.transpose();
  return 0.5 * (H + H.transpose());
}

}  // namespace

std::string to_string(HatKind kind) {
  switch (kind) {
    case HatKind::ridge: return "ridge";
    case HatKind::projection: return "projection";
    case HatKind::custom: return "custom";
  }
  return "custom";
}

HatMatrix HatMatrix::from_matrix(Matrix raw, HatKind kind, std::optional<double> penalty,
                                 double dof) {
  if (raw.rows() != raw.cols()) throw InputError("hat matrix must be square");
  if (!raw.allFinite()) throw InputError("hat matrix has non-finite entries");
  raw.diagonal().setZero();
  HatMatrix h;
  h.H_ = std::move(raw);
  h.kind_ = kind;
  h.penalty_ = kind == HatKind::ridge ? penalty : std::nullopt;
  h.dof_ = dof;
  return h;
}

double effective_dof_from_singular_values(const Vector& singular_values, double lambda) {
  if (lambda < 0.0) throw InputError("ridge penalty must be nonnegative");
  return shrinkage(singular_values, lambda).sum();
}

double effective_dof(const Matrix& Z, double lambda) {
  if (lambda < 0.0) throw InputError("ridge penalty must be nonnegative");
  if (Z.size() == 0) return 0.0;
  return effective_dof_from_singular_values(Eigen::BDCSVD<Matrix>(Z).singularValues(), lambda);
}

double ridge_penalty_for_dof(const Vector& s, double target) {
  auto dof = [&s](double lambda) { return effective_dof_from_singular_values(s, lambda); };
  if (dof(0.0) <= target) return 0.0;
  const double smax = s.maxCoeff();
  double hi = smax * smax;
  while (dof(hi) > target) hi *= 2.0;
  double lo = 0.0;
  double dof_lo = dof(lo);
  double dof_hi = dof(hi);
  while (dof_lo - dof_hi >= 1e-6 && hi - lo > 1e-15 * hi) {
    const double mid = 0.5 * (lo + hi);
    const double d = dof(mid);
    if (d <= target) {
      hi = mid;
      dof_hi = d;
    } else {
      lo = mid;
      dof_lo = d;
    }
  }
  return hi;
}

HatMatrix ridge_hat(const Matrix& Z, double dof_fraction) {
  if (!(dof_fraction > 0.0 && dof_fraction <= 1.0))
    throw InputError("dof_fraction must lie in (0, 1]");
  if (Z.size() == 0 || Z.cwiseAbs().maxCoeff() == 0.0)
    throw InputError("ridge hat: instrument matrix is all zeros");
  const ThinSvd svd = thin_svd(Z);
  const double target = dof_fraction * static_cast<double>(Z.rows());
  const double lambda = ridge_penalty_for_dof(svd.s, target);
  return HatMatrix::from_matrix(smoother(svd, lambda), HatKind::ridge, lambda,
                                effective_dof_from_singular_values(svd.s, lambda));
}

HatMatrix ridge_hat_with_penalty(const Matrix& Z, double lambda) {
  if (lambda < 0.0) throw InputError("ridge penalty must be nonnegative");
  if (Z.size() == 0 || Z.cwiseAbs().maxCoeff() == 0.0)
    throw InputError("ridge hat: instrument matrix is all zeros");
  const ThinSvd svd = thin_svd(Z);
  return HatMatrix::from_matrix(smoother(svd, lambda), HatKind::ridge, lambda,
                                effective_dof_from_singular_values(svd.s, lambda));
}

HatMatrix projection_hat_deleted(const Matrix& Z) {
  if (Z.size() == 0 || Z.cwiseAbs().maxCoeff() == 0.0)
    throw InputError("projection hat: instrument matrix has rank zero");
  const ThinSvd svd = thin_svd(Z);
  return HatMatrix::from_matrix(smoother(svd, 0.0), HatKind::projection, std::nullopt,
                                effective_dof_from_singular_values(svd.s, 0.0));
}

HatMatrix custom_hat(const Matrix& raw) {
  if (raw.rows() != raw.cols()) throw InputError("custom hat matrix must be square");
  return HatMatrix::from_matrix(raw, HatKind::custom, std::nullopt, raw.trace());
}

HatMatrix partial_out_hat(const HatMatrix& H, const Matrix& Z1) {
  if (Z1.cols() == 0) return H;
  if (Z1.rows() != H.n()) throw InputError("partial_out_hat: dimension mismatch between H and controls");
  const Matrix Q = control_basis(Z1);
  // M2 H M2 = A - (A Q) Q' with A = H - Q (Q' H).
  Matrix A = H.matrix() - Q * (Q.transpose() * H.matrix());
  A -= (A * Q) * Q.transpose();
  const double mass = A.diagonal().cwiseAbs().sum();
  HatMatrix out = HatMatrix::from_matrix(std::move(A), H.kind(), H.ridge_penalty(), H.dof());
  out.removed_mass_ = H.removed_diagonal_mass() + mass;
  return out;
}

// Diagnostics ---------------------------------------------------------------

double sample_quantile(Vector values, double q) {
  if (values.size() == 0) return 0.0;
  std::sort(values.data(), values.data() + values.size());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<Index>(std::floor(pos));
  const auto hi = std::min<Index>(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values(lo) + frac * (values(hi) - values(lo));
}

bool DesignDiagnostics::any_warning() const {
  return std::any_of(flags.begin(), flags.end(), [](const auto& f) { return f.warn; });
}

DesignDiagnostics design_diagnostics(const HatMatrix& hat, const Matrix& r_hat, double q) {
  if (!(q > 0.0 && q < 100.0)) throw InputError("diagnostic quantile must lie in (0, 100)");
  const Matrix& H = hat.matrix();
  if (r_hat.rows() != H.rows()) throw InputError("design_diagnostics: r_hat has wrong row count");
  auto ratio = [q](const Vector& v) {
    const double mx = v.size() ? v.maxCoeff() : 0.0;
    return mx > 0.0 ? sample_quantile(v, q) / mx : 0.0;
  };

  DesignDiagnostics d;
  d.quantile = q;
  const Vector row_norms = H.rowwise().squaredNorm();
  const Vector col_norms = H.colwise().squaredNorm().transpose();
  d.leverage_ratio = ratio(row_norms);

  const Matrix fitted = H * r_hat;
  d.first_stage_ratio_min = 1.0;
  for (Index l = 0; l < fitted.cols(); ++l) {
    const double r = ratio(fitted.col(l).array().square().matrix());
    if (l == 0) d.first_stage_ratio = r;
    d.first_stage_ratio_min = std::min(d.first_stage_ratio_min, r);
  }
  if (fitted.cols() == 0) d.first_stage_ratio_min = 0.0;

  const double max_row = row_norms.size() ? row_norms.maxCoeff() : 0.0;
  const double max_col = col_norms.size() ? col_norms.maxCoeff() : 0.0;
  d.row_col_ratio = max_row > 0.0 ? max_col / max_row : 0.0;

  // Eigenvalues of HH' are the squared singular values of H.
  const Vector s = Eigen::BDCSVD<Matrix>(H).singularValues();
  const Vector l2 = s.array().pow(4).matrix();
  const double total = l2.sum();
  d.eig_ratio = total > 0.0 ? (total - l2(0)) / total : 0.0;
  d.eig_ratio = std::clamp(d.eig_ratio, 0.0, 1.0);

  d.flags = {
      {"leverage_ratio", d.leverage_ratio, 0.01, d.leverage_ratio < 0.01},
      {"first_stage_ratio", d.first_stage_ratio, 0.01, d.first_stage_ratio < 0.01},
      {"eig_ratio", d.eig_ratio, 0.01, d.eig_ratio < 0.01},
      {"row_col_ratio", d.row_col_ratio, 100.0, d.row_col_ratio > 100.0},
  };
  return d;
}

}  // namespace jkiv
