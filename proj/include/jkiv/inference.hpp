#pragma once

#include "jkiv/common.hpp"
#include "jkiv/data.hpp"
#include "jkiv/hat_matrix.hpp"
#include "jkiv/rho.hpp"
#include "jkiv/statistics.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace jkiv {

struct BootstrapSpec {
  Index draws = 1000;
  std::uint64_t seed = 20240101;
};

enum class TestKind { jk, sup_score, thresholding, anderson_rubin };

std::string to_string(TestKind kind);
TestKind test_kind_from_string(const std::string& s);

/// Cutoff for the thresholding test: a quantile level of the conditioning
/// statistic's bootstrap null distribution (0.75 = 75th percentile), or a
/// fixed value.
struct TauRule {
  enum class Kind { quantile, fixed };
  Kind kind = Kind::quantile;
  double value = 0.75;

  static TauRule quantile(double level) { return {Kind::quantile, level}; }
  static TauRule fixed(double tau) { return {Kind::fixed, tau}; }
  bool operator==(const TauRule&) const = default;
};

/// A test to run; `tau` only matters for thresholding.
struct TestSpec {
  TestKind kind = TestKind::jk;
  TauRule tau;

  std::string label() const;
  static TestSpec parse(const std::string& label);
  bool operator==(const TestSpec&) const = default;
};

struct TestResult {
  TestKind kind = TestKind::jk;
  std::string label;
  double statistic = 0.0;
  double critical_value = 0.0;
  std::optional<double> p_value;
  bool reject = false;
  double alpha = 0.05;
  std::optional<TestKind> branch;  // thresholding only
  std::optional<double> conditioning_value;
  std::optional<double> tau;
  bool degenerate = false;

  /// statistic / critical_value; the test rejects iff this exceeds one.
  double normalized() const;
};

// Components -----------------------------------------------------------------

/// (1 - theta) multiplier-bootstrap quantile of the sup-score statistic.
double sup_score_critical(const Vector& eps, const Matrix& Z, double theta,
                          const BootstrapSpec& spec);

/// (1 - theta) multiplier-bootstrap quantile of the conditioning statistic.
double conditioning_quantile(const HatMatrix& H, const Matrix& r_hat, double theta,
                             const BootstrapSpec& spec);

TestResult jk_test(const StatisticValue& statistic, Index dx, double alpha);

TestResult sup_score_test(const StatisticValue& statistic, double critical, double alpha);

TestResult anderson_rubin_test(const StatisticValue& statistic, double alpha);

/// Runs the JK decision when C >= tau and the sup-score decision otherwise.
TestResult thresholding_test(const TestResult& jk, const StatisticValue& ss_stat, double ss_crit,
                             const StatisticValue& C, double tau);

// Pipeline -------------------------------------------------------------------

struct HatSpec {
  HatKind kind = HatKind::ridge;
  double dof_fraction = 0.2;
  Matrix custom;  // n x n, kind == custom
};

struct RhoSpec {
  RhoMethod method = RhoMethod::lasso;
  BasisKind basis = BasisKind::instruments_plus_intercept;
  PenaltySelection penalty;
  Matrix known;  // n x d_x, method == known
};

struct TestConfig {
  TestSpec test;
  HatSpec hat;
  RhoSpec rho;
  double alpha = 0.05;
  BootstrapSpec bootstrap;
  double sing_tol = 1e-10;
};

HatMatrix build_hat(const PartialledData& data, const HatSpec& spec);

/// Caches the hat matrix for a dataset and evaluates tests at any beta0.
/// Evaluation is const and thread-safe.
class TestPipeline {
 public:
  using KnownRho = std::function<Matrix(const Vector& beta0)>;

  TestPipeline(PartialledData data, TestConfig config);
  TestPipeline(PartialledData data, TestConfig config, HatMatrix hat);

  /// Overrides rho estimation with oracle values (simulation).
  void set_known_rho(KnownRho fn) { known_rho_ = std::move(fn); }

  const PartialledData& data() const { return data_; }
  const HatMatrix& hat() const { return *hat_; }
  const TestConfig& config() const { return config_; }

  /// Evaluates several tests at beta0, sharing intermediate results.
  std::vector<TestResult> evaluate(const Vector& beta0, const std::vector<TestSpec>& tests) const;

  TestResult run(const Vector& beta0) const { return evaluate(beta0, {config_.test}).front(); }

  RhoModel rho_model(const Vector& beta0) const;

 private:
  bool needs_hat() const;

  PartialledData data_;
  TestConfig config_;
  std::optional<HatMatrix> hat_;
  KnownRho known_rho_;
};

TestResult run_test(const PartialledData& data, const Vector& beta0, const TestConfig& config);

struct ConfidenceSet {
  std::vector<double> grid;
  std::vector<bool> accepted;
  std::vector<double> statistic;
  std::vector<double> critical_value;
  std::vector<std::pair<double, double>> intervals;
  bool empty = true;
  double alpha = 0.05;
  std::string test;
};

/// Maximal runs of accepted grid points as [lo, hi] pairs.
std::vector<std::pair<double, double>> accepted_intervals(const std::vector<double>& grid,
                                                          const std::vector<bool>& accepted);

std::vector<double> uniform_grid(double lo, double hi, Index points);

/// Test inversion over a grid (d_x = 1). Every grid point uses the same seed.
ConfidenceSet invert_ci(const TestPipeline& pipeline, const std::vector<double>& grid);
ConfidenceSet invert_ci(const PartialledData& data, const std::vector<double>& grid,
                        const TestConfig& config);

}  // namespace jkiv
