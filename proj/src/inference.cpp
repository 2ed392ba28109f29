#include "jkiv/inference.hpp"

#include "jkiv/distributions.hpp"
#include "jkiv/kernels.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

namespace jkiv {

namespace {

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::to_string(v);
}

double parse_number(const std::string& s, const std::string& what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InputError("invalid number '" + s + "' in " + what);
  return v;
}

// Runs `fn`, tagging any error with the pipeline stage it came from.
template <class Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    throw StageError<NumericalError>(stage, e.what());
  } catch (const InputError& e) {
    throw StageError<InputError>(stage, e.what());
  }
}

}  // namespace

std::string to_string(TestKind kind) {
  switch (kind) {
    case TestKind::jk: return "jk";
    case TestKind::sup_score: return "sup_score";
    case TestKind::thresholding: return "thresholding";
    case TestKind::anderson_rubin: return "anderson_rubin";
  }
  return "jk";
}

TestKind test_kind_from_string(const std::string& s) {
  if (s == "jk") return TestKind::jk;
  if (s == "sup_score") return TestKind::sup_score;
  if (s == "thresholding") return TestKind::thresholding;
  if (s == "anderson_rubin") return TestKind::anderson_rubin;
  throw InputError("unknown test kind '" + s + "'");
}

std::string TestSpec::label() const {
  if (kind != TestKind::thresholding) return to_string(kind);
  return tau.kind == TauRule::Kind::quantile ? "thresholding_q" + format_number(tau.value)
                                             : "thresholding_fixed" + format_number(tau.value);
}

TestSpec TestSpec::parse(const std::string& label) {
  const std::string q = "thresholding_q";
  const std::string f = "thresholding_fixed";
  TestSpec spec;
  if (label.rfind(q, 0) == 0) {
    spec.kind = TestKind::thresholding;
    spec.tau = TauRule::quantile(parse_number(label.substr(q.size()), "test label"));
    if (!(spec.tau.value > 0.0 && spec.tau.value < 1.0))
      throw InputError("thresholding quantile level must lie in (0, 1)");
  } else if (label.rfind(f, 0) == 0) {
    spec.kind = TestKind::thresholding;
    spec.tau = TauRule::fixed(parse_number(label.substr(f.size()), "test label"));
  } else {
    spec.kind = test_kind_from_string(label);
  }
  return spec;
}

double TestResult::normalized() const {
  if (critical_value > 0.0) return statistic / critical_value;
  return statistic > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

// Components ----------------------------------------------------------------

double sup_score_critical(const Vector& eps, const Matrix& Z, double theta,
                          const BootstrapSpec& spec) {
  if (!(theta > 0.0 && theta < 1.0)) throw InputError("bootstrap level must lie in (0, 1)");
  if (spec.draws < 1) throw InputError("bootstrap needs at least one draw");
  if (Z.colwise().norm().minCoeff() == 0.0)
    throw InputError("sup_score: instrument column with zero norm");
  return kernels::order_statistic_quantile(
      kernels::sup_score_draws(eps, Z, spec.draws, spec.seed), 1.0 - theta);
}

double conditioning_quantile(const HatMatrix& H, const Matrix& r_hat, double theta,
                             const BootstrapSpec& spec) {
  if (!(theta > 0.0 && theta < 1.0)) throw InputError("bootstrap level must lie in (0, 1)");
  if (spec.draws < 1) throw InputError("bootstrap needs at least one draw");
  const Vector norms = conditioning_row_norms(H);
  if (!(norms.array() > 0.0).any())
    throw InputError("conditioning_statistic: every hat-matrix row has zero norm");
  return kernels::order_statistic_quantile(
      kernels::conditioning_draws(H.matrix(), r_hat, norms, spec.draws, spec.seed), 1.0 - theta);
}

TestResult jk_test(const StatisticValue& statistic, Index dx, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  TestResult r;
  r.kind = TestKind::jk;
  r.label = "jk";
  r.alpha = alpha;
  r.statistic = statistic.value;
  r.critical_value = chi2_quantile(1.0 - alpha, static_cast<double>(dx));
  r.degenerate = statistic.degenerate;
  r.reject = !statistic.degenerate && statistic.value > r.critical_value;
  r.p_value = statistic.degenerate ? 1.0 : chi2_sf(statistic.value, static_cast<double>(dx));
  return r;
}

TestResult sup_score_test(const StatisticValue& statistic, double critical, double alpha) {
  TestResult r;
  r.kind = TestKind::sup_score;
  r.label = "sup_score";
  r.alpha = alpha;
  r.statistic = statistic.value;
  r.critical_value = critical;
  r.reject = statistic.value > critical;
  return r;
}

TestResult anderson_rubin_test(const StatisticValue& statistic, double alpha) {
  const double d1 = statistic.extras.at("df1");
  const double d2 = statistic.extras.at("df2");
  TestResult r;
  r.kind = TestKind::anderson_rubin;
  r.label = "anderson_rubin";
  r.alpha = alpha;
  r.statistic = statistic.value;
  r.critical_value = f_quantile(1.0 - alpha, d1, d2);
  r.reject = statistic.value > r.critical_value;
  r.p_value = f_sf(statistic.value, d1, d2);
  return r;
}

TestResult thresholding_test(const TestResult& jk, const StatisticValue& ss_stat, double ss_crit,
                             const StatisticValue& C, double tau) {
  TestResult r;
  r.kind = TestKind::thresholding;
  r.label = "thresholding";
  r.alpha = jk.alpha;
  r.conditioning_value = C.value;
  r.tau = tau;
  if (C.value >= tau) {
    r.branch = TestKind::jk;
    r.statistic = jk.statistic;
    r.critical_value = jk.critical_value;
    r.reject = jk.reject;
    r.degenerate = jk.degenerate;
  } else {
    r.branch = TestKind::sup_score;
    r.statistic = ss_stat.value;
    r.critical_value = ss_crit;
    r.reject = ss_stat.value > ss_crit;
  }
  return r;
}

// Pipeline ------------------------------------------------------------------

HatMatrix build_hat(const PartialledData& data, const HatSpec& spec) {
  HatMatrix H = [&] {
    switch (spec.kind) {
      case HatKind::ridge: return ridge_hat(data.Z, spec.dof_fraction);
      case HatKind::projection: return projection_hat_deleted(data.Z);
      case HatKind::custom:
        if (spec.custom.rows() != data.n())
          throw InputError("custom hat matrix must be n x n");
        return custom_hat(spec.custom);
    }
    throw InputError("unknown hat kind");
  }();
  return partial_out_hat(H, data.Z1);
}

TestPipeline::TestPipeline(PartialledData data, TestConfig config)
    : data_(std::move(data)), config_(std::move(config)) {
  if (needs_hat()) hat_ = staged("hat_matrix", [&] { return build_hat(data_, config_.hat); });
}

bool TestPipeline::needs_hat() const {
  return config_.test.kind == TestKind::jk || config_.test.kind == TestKind::thresholding;
}

TestPipeline::TestPipeline(PartialledData data, TestConfig config, HatMatrix hat)
    : data_(std::move(data)), config_(std::move(config)), hat_(std::move(hat)) {
  if (hat_->n() != data_.n()) throw InputError("hat matrix size does not match the data");
}

RhoModel TestPipeline::rho_model(const Vector& beta0) const {
  if (known_rho_) {
    const Matrix rho = known_rho_(beta0);
    return estimate_rho(data_, beta0, {}, RhoMethod::known, {}, 0, &rho);
  }
  BasisSpec basis;
  basis.kind = config_.rho.basis;
  return estimate_rho(data_, beta0, basis, config_.rho.method, config_.rho.penalty,
                      config_.bootstrap.seed, &config_.rho.known);
}

std::vector<TestResult> TestPipeline::evaluate(const Vector& beta0,
                                               const std::vector<TestSpec>& tests) const {
  if (beta0.size() != data_.dx()) throw InputError("beta0 has wrong dimension");
  auto wants = [&tests](TestKind k) {
    return std::any_of(tests.begin(), tests.end(), [k](const TestSpec& t) { return t.kind == k; });
  };
  const bool thresholding = wants(TestKind::thresholding);
  const bool need_jk = thresholding || wants(TestKind::jk);
  const bool need_ss = thresholding || wants(TestKind::sup_score);
  const double alpha = config_.alpha;

  const Vector eps = staged("null_residuals", [&] { return null_residuals(data_.y, data_.X, beta0); });

  // Pipelines built for sup-score or AR only skip the hat; build one locally
  // if a hat-based test is requested anyway.
  std::optional<HatMatrix> local_hat;
  const HatMatrix* H = hat_ ? &*hat_ : nullptr;
  if (need_jk && !H) {
    local_hat = staged("hat_matrix", [&] { return build_hat(data_, config_.hat); });
    H = &*local_hat;
  }

  RhoModel rho;
  TestResult jk;
  if (need_jk) {
    rho = staged("rho_estimation", [&] { return rho_model(beta0); });
    jk = staged("statistics", [&] {
      const FirstStage fs = first_stage(*H, rho.r_hat, eps);
      return jk_test(jk_statistic(eps, fs, config_.sing_tol), data_.dx(), alpha);
    });
  }

  StatisticValue ss;
  double ss_crit = 0.0;
  if (need_ss) {
    ss = staged("statistics", [&] { return sup_score(eps, data_.Z); });
    ss_crit = staged("bootstrap", [&] {
      return sup_score_critical(eps, data_.Z, alpha, config_.bootstrap);
    });
  }

  StatisticValue C;
  Vector c_draws;
  if (thresholding) {
    C = staged("statistics", [&] { return conditioning_statistic(*H, rho.r_hat); });
    const bool any_quantile = std::any_of(tests.begin(), tests.end(), [](const TestSpec& t) {
      return t.kind == TestKind::thresholding && t.tau.kind == TauRule::Kind::quantile;
    });
    if (any_quantile) {
      c_draws = staged("bootstrap", [&] {
        return kernels::conditioning_draws(H->matrix(), rho.r_hat, conditioning_row_norms(*H),
                                           config_.bootstrap.draws, config_.bootstrap.seed);
      });
    }
  }

  std::vector<TestResult> out;
  out.reserve(tests.size());
  for (const TestSpec& t : tests) {
    TestResult r;
    switch (t.kind) {
      case TestKind::jk: r = jk; break;
      case TestKind::sup_score: r = sup_score_test(ss, ss_crit, alpha); break;
      case TestKind::anderson_rubin:
        r = staged("statistics", [&] {
          return anderson_rubin_test(anderson_rubin(eps, data_.Z, data_.dc), alpha);
        });
        break;
      case TestKind::thresholding: {
        const double tau = t.tau.kind == TauRule::Kind::fixed
                               ? t.tau.value
                               : kernels::order_statistic_quantile(c_draws, t.tau.value);
        r = thresholding_test(jk, ss, ss_crit, C, tau);
        break;
      }
    }
    r.label = t.label();
    out.push_back(std::move(r));
  }
  return out;
}

TestResult run_test(const PartialledData& data, const Vector& beta0, const TestConfig& config) {
  return TestPipeline(data, config).run(beta0);
}

std::vector<std::pair<double, double>> accepted_intervals(const std::vector<double>& grid,
                                                          const std::vector<bool>& accepted) {
  std::vector<std::pair<double, double>> runs;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!accepted[k]) continue;
    if (k > 0 && accepted[k - 1]) {
      runs.back().second = grid[k];
    } else {
      runs.emplace_back(grid[k], grid[k]);
    }
  }
  return runs;
}

std::vector<double> uniform_grid(double lo, double hi, Index points) {
  if (points < 1) throw InputError("grid needs at least one point");
  if (points > 1 && !(hi > lo)) throw InputError("grid upper bound must exceed lower bound");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (Index k = 0; k < points; ++k)
    g[static_cast<std::size_t>(k)] =
        points == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
  return g;
}

ConfidenceSet invert_ci(const TestPipeline& pipeline, const std::vector<double>& grid) {
  if (pipeline.data().dx() != 1) throw InputError("confidence-set inversion needs d_x = 1");
  if (grid.empty()) throw InputError("confidence-set grid is empty");
  if (!std::is_sorted(grid.begin(), grid.end())) throw InputError("grid must be ascending");
  const auto m = static_cast<Index>(grid.size());
  std::vector<TestResult> results(grid.size());
  detail::parallel_for(m, "grid point", [&](Index k) {
    results[static_cast<std::size_t>(k)] =
        pipeline.run(Vector::Constant(1, grid[static_cast<std::size_t>(k)]));
  });

  ConfidenceSet cs;
  cs.grid = grid;
  cs.alpha = pipeline.config().alpha;
  cs.test = pipeline.config().test.label();
  for (const auto& r : results) {
    cs.accepted.push_back(!r.reject);
    cs.statistic.push_back(r.statistic);
    cs.critical_value.push_back(r.critical_value);
  }
  cs.intervals = accepted_intervals(cs.grid, cs.accepted);
  cs.empty = cs.intervals.empty();
  return cs;
}

ConfidenceSet invert_ci(const PartialledData& data, const std::vector<double>& grid,
                        const TestConfig& config) {
  return invert_ci(TestPipeline(data, config), grid);
}

}  // namespace jkiv
