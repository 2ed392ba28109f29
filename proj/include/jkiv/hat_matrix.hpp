#pragma once

#include "jkiv/common.hpp"

#include <optional>
#include <string>

namespace jkiv {

enum class HatKind { ridge, projection, custom };

std::string to_string(HatKind kind);

/// Zero-diagonal n x n weight matrix used to form leave-one-out first stages.
/// Instances can only be created through the constructors below, all of which
/// zero the diagonal.
class HatMatrix {
 public:
  const Matrix& matrix() const noexcept { return H_; }
  HatKind kind() const noexcept { return kind_; }
  /// Ridge penalty lambda*; present iff kind() == ridge.
  std::optional<double> ridge_penalty() const noexcept { return penalty_; }
  /// Effective degrees of freedom of the smoother before its diagonal was removed.
  double dof() const noexcept { return dof_; }
  /// Sum of |diagonal| removed after projecting out controls (0 otherwise).
  double removed_diagonal_mass() const noexcept { return removed_mass_; }
  Index n() const noexcept { return H_.rows(); }

  /// Zeroes the diagonal of `raw` and wraps it. Throws InputError for
  /// non-square or non-finite input.
  static HatMatrix from_matrix(Matrix raw, HatKind kind, std::optional<double> penalty,
                               double dof);

 private:
  HatMatrix() = default;

  Matrix H_;
  HatKind kind_ = HatKind::custom;
  std::optional<double> penalty_;
  double dof_ = 0.0;
  double removed_mass_ = 0.0;

  friend HatMatrix partial_out_hat(const HatMatrix& H, const Matrix& Z1);
};

/// trace(Z (Z'Z + lambda I)^{-1} Z') = sum_k s_k^2 / (s_k^2 + lambda).
double effective_dof(const Matrix& Z, double lambda);

/// Same, from precomputed singular values of Z.
double effective_dof_from_singular_values(const Vector& singular_values, double lambda);

/// Smallest lambda >= 0 whose effective dof is at most target (bisection).
double ridge_penalty_for_dof(const Vector& singular_values, double target);

/// Deleted-diagonal ridge hat with penalty chosen so dof <= dof_fraction * n.
HatMatrix ridge_hat(const Matrix& Z, double dof_fraction = 0.2);

/// Deleted-diagonal ridge hat at an explicit penalty.
HatMatrix ridge_hat_with_penalty(const Matrix& Z, double lambda);

/// Deleted-diagonal orthogonal projection onto span(Z).
HatMatrix projection_hat_deleted(const Matrix& Z);

/// User-supplied weights; diagonal is removed.
HatMatrix custom_hat(const Matrix& raw);

/// M2 H M2 with the diagonal re-zeroed; the removed |diagonal| mass is kept
/// as a diagnostic. Identity when Z1 has no columns.
HatMatrix partial_out_hat(const HatMatrix& H, const Matrix& Z1);

struct DiagnosticFlag {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool warn = false;
};

/// Balanced-design checks for a hat matrix.
struct DesignDiagnostics {
  double quantile = 25.0;
  double leverage_ratio = 0.0;        // q-quantile / max of sum_{j!=i} h_ij^2
  double first_stage_ratio = 0.0;     // same for (sum_{j!=i} h_ij r_j)^2, first column
  double first_stage_ratio_min = 0.0; // minimum of the above across endogenous columns
  double row_col_ratio = 0.0;         // max column norm^2 / max row norm^2
  double eig_ratio = 0.0;             // sum_{k>=2} l_k^2(HH') / sum_k l_k^2(HH')
  std::vector<DiagnosticFlag> flags;

  bool any_warning() const;
};

/// Type-7 (linear interpolation) sample quantile, q in [0, 100].
double sample_quantile(Vector values, double q);

DesignDiagnostics design_diagnostics(const HatMatrix& H, const Matrix& r_hat, double q = 25.0);

}  // namespace jkiv
