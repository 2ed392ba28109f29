#pragma once

#include "jkiv/common.hpp"
#include "jkiv/data.hpp"
#include "jkiv/inference.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace jkiv {

enum class Regime { dz10, dz30, dz65, dz75 };
enum class Strength { strong, weak, intermediate };
enum class ErrorDist { laplace, gaussian };

std::string to_string(Regime r);
std::string to_string(Strength s);
std::string to_string(ErrorDist e);
Regime regime_from_string(const std::string& s);
Strength strength_from_string(const std::string& s);
ErrorDist error_dist_from_string(const std::string& s);

Index regime_columns(Regime r);

/// r_n: 1, n^{-1/2} or n^{-1/3}.
double strength_scale(Strength s, Index n);

struct SimulationSpec {
  Index n = 200;
  Regime regime = Regime::dz10;
  double rho1 = 0.2;  // heteroskedasticity
  double rho2 = 0.3;  // endogeneity
  Strength strength = Strength::weak;
  double beta_true = 1.0;
  Index dx = 1;  // 1, or 2 with a second endogenous equation on base instruments 6..10
  ErrorDist errors = ErrorDist::laplace;
  Index reps = 100;
  Index first_rep = 0;  // replications first_rep .. first_rep + reps - 1
  std::vector<TestSpec> tests{TestSpec{TestKind::jk, {}}};
  TestConfig config;       // hat, rho estimation, alpha, bootstrap draws
  bool oracle_rho = false;  // use the closed-form conditional slope
  std::uint64_t seed = 20240101;

  void validate() const;
};

/// One simulated sample plus the quantities only a simulation knows.
struct SimulatedData {
  IVDataset data;
  Matrix zbar;   // n x 10
  Matrix Pi;     // n x d_x
  Vector eps;    // structural error
  Matrix V;      // n x d_x first-stage errors
  Vector scale;  // heteroskedasticity factor multiplying e_1
  double error_variance = 2.0;
};

double laplace_sample(Engine& eng);

/// Toeplitz matrix with entries base^{-|l-k|}.
Matrix toeplitz_covariance(Index d, double base);

/// n rows drawn i.i.d. from N(0, cov) through the Cholesky factor.
Matrix gaussian_rows(Index n, const Matrix& cov, Engine& eng);

/// n x 10 instruments with Cov = 2^{-|l-k|}.
Matrix gen_base_instruments(Index n, Engine& eng);

/// [z], [z, z^2, z^3], [z, z^2, pairwise products] or that plus z^3.
Matrix expand_regime(const Matrix& zbar, Regime regime);

/// [z, z^2, pairwise products l < k].
Matrix quadratic_expansion(const Matrix& z);

SimulatedData gen_dgp(const SimulationSpec& spec, Index rep);

/// Closed-form conditional slope Cov(eps(beta0), x | z) / Var(eps(beta0) | z).
Matrix true_rho(const SimulatedData& sim, const SimulationSpec& spec, const Vector& beta0);

struct TestFrequency {
  std::string test;
  Index rejections = 0;
  Index reps = 0;
  double frequency() const;
  double mc_se() const;
};

struct SizeTable {
  SimulationSpec spec;
  std::vector<TestFrequency> tests;
  std::vector<std::vector<double>> statistics;  // per test, per replication
  std::vector<Index> degenerate;                // per test

  /// Pools a table over a disjoint replication range of the same design.
  void merge(const SizeTable& other);
};

SizeTable size_experiment(const SimulationSpec& spec);

struct PowerTable {
  SimulationSpec spec;
  std::vector<double> offsets;
  bool calibrated = false;
  Index null_reps = 0;
  std::vector<std::string> tests;
  std::vector<double> calibrated_critical;  // per test, on the normalized scale
  std::vector<std::vector<Index>> rejections;  // [test][offset]
  Index reps = 0;

  double frequency(std::size_t test, std::size_t offset) const;
  double mc_se(std::size_t test, std::size_t offset) const;
};

/// Rejection frequencies at beta0 = beta_true + offset. In calibrated mode each
/// test rejects when statistic / nominal critical value exceeds the 95th
/// percentile of the same ratio over a null run drawn from its own stream.
PowerTable power_curve(const SimulationSpec& spec, const std::vector<double>& offsets,
                       bool calibrated, Index null_reps = 2000);

/// Classical first-stage F with intercept: ((SSR0 - SSR1)/k) / (SSR1/(n-k-1)).
double first_stage_f(const Vector& x, const Matrix& Zsel);

/// Sample for the post-selection F demonstration: x and the 65-column design,
/// with the 10 base columns first.
struct FStatSample {
  Vector x;
  Matrix Z;
};

FStatSample gen_fstat_sample(Index n, Engine& eng);

/// Columns chosen by walking the LASSO path of x on Z from lambda_max down to
/// the first penalty with at least k active columns, keeping the k largest
/// |coefficients|. Empty when the path never reaches k.
std::vector<Index> select_by_path(const Vector& x, const Matrix& Z, Index k);

struct FStatTable {
  Index n = 0;
  Index reps = 0;
  std::uint64_t seed = 0;
  std::vector<Index> counts;
  std::vector<double> mean_f;
  std::vector<Index> missing;
  double true_f = 0.0;
};

FStatTable fstat_demo(Index n, const std::vector<Index>& counts, Index reps, std::uint64_t seed);

/// offset^2 (sum Pi_i Pihat_i)^2 / sum var_i Pihat_i^2.
double oracle_noncentrality(const Vector& Pi, const Vector& Pi_hat, const Vector& var_eta,
                            double offset);

/// Monte Carlo local power index from per-replication Pi (n x d_x) and
/// infeasible first-stage fits; s_l^{-2} is the largest replication-average
/// of the squared fits.
double local_power_index(const std::vector<Matrix>& Pi, const std::vector<Matrix>& Pi_hat,
                         const Vector& offset);

}  // namespace jkiv
