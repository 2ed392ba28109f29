#include "helpers.hpp"

#include "jkiv/distributions.hpp"
#include "jkiv/inference.hpp"
#include "jkiv/kernels.hpp"

#include <doctest.h>
#include <omp.h>

#include <algorithm>
#include <cmath>

using namespace jkiv;
using namespace testutil;

namespace {

// Plain bisection on an independently computed CDF.
template <class Cdf>
double bisect(Cdf cdf, double p, double lo, double hi) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double chi2_1_cdf(double x) { return std::erf(std::sqrt(x / 2.0)); }

PartialledData make_data(Index n, Index dz, double strength, std::uint64_t seed) {
  PartialledData d;
  d.Z = randn(n, dz, seed);
  const Vector e = randn(n, seed + 1);
  const Vector v = 0.5 * e + randn(n, seed + 2);
  d.X = (strength * d.Z.col(0) + v).eval();
  d.y = d.X.col(0) + e;
  d.Z1.resize(n, 0);
  return d;
}

StatisticValue stat(double v) {
  StatisticValue s;
  s.value = v;
  return s;
}

}  // namespace

TEST_SUITE("bootstrap") {

TEST_CASE("chi-square quantiles") {
  CHECK(std::abs(chi2_quantile(0.95, 1) - bisect(chi2_1_cdf, 0.95, 0.0, 50.0)) < 1e-8);
  CHECK(std::abs(chi2_quantile(0.95, 1) - 3.84145882) < 1e-8);
  CHECK(std::abs(chi2_quantile(0.5, 2) - 2.0 * std::log(2.0)) < 1e-8);
  CHECK(chi2_quantile(0.99, 1) > chi2_quantile(0.95, 1));
  for (double k : {1.0, 2.0, 5.0, 30.0, 200.0})
    for (double p : {1e-6, 0.01, 0.5, 0.95, 0.999999}) {
      const double q = chi2_quantile(p, k);
      CHECK(std::abs(chi2_cdf(q, k) - p) < 1e-10);
      CHECK(chi2_sf(q, k) == doctest::Approx(1.0 - p).epsilon(1e-6));
    }
  // exponential closed form for k = 2 at several levels
  for (double p : {0.1, 0.3, 0.9})
    CHECK(std::abs(chi2_quantile(p, 2) + 2.0 * std::log1p(-p)) < 1e-8);
  CHECK_THROWS_AS(chi2_quantile(0.0, 1), InputError);
  CHECK_THROWS_AS(chi2_quantile(1.0, 1), InputError);
  CHECK_THROWS_AS(chi2_quantile(0.5, 0.5), InputError);
}

TEST_CASE("F quantile matches its survival function") {
  const double q = f_quantile(0.95, 3, 40);
  CHECK(f_sf(q, 3, 40) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("order statistic convention") {
  Vector d(10);
  d << 10, 9, 8, 7, 6, 5, 4, 3, 2, 1;
  CHECK(kernels::order_statistic_quantile(d, 0.95) == 10.0);  // ceil(9.5) = 10
  CHECK(kernels::order_statistic_quantile(d, 0.9) == 9.0);    // ceil(9) = 9
  CHECK(kernels::order_statistic_quantile(d, 0.25) == 3.0);   // ceil(2.5) = 3
  CHECK_THROWS_AS(kernels::order_statistic_quantile(Vector(0), 0.5), InputError);
}

TEST_CASE("sup-score critical value: zero residuals") {
  CHECK(sup_score_critical(Vector::Zero(20), randn(20, 3, 1), 0.05, {200, 1}) == 0.0);
}

TEST_CASE("sup-score critical value: half-normal oracle") {
  const Vector ones = Vector::Ones(4);
  const double c = sup_score_critical(ones, ones, 0.05, {100000, 7});
  CHECK(std::abs(c - 1.95996) < 0.05);
}

TEST_CASE("sup-score critical value: deterministic and monotone in theta") {
  const Vector eps = randn(50, 2);
  const Matrix Z = randn(50, 6, 3);
  const BootstrapSpec spec{500, 11};
  CHECK(sup_score_critical(eps, Z, 0.05, spec) == sup_score_critical(eps, Z, 0.05, spec));
  double prev = std::numeric_limits<double>::infinity();
  for (double theta : {0.01, 0.05, 0.1, 0.25, 0.5, 0.9}) {
    const double c = sup_score_critical(eps, Z, theta, spec);
    CHECK(c <= prev);
    prev = c;
  }
  CHECK(sup_score_critical(eps, Z, 0.05, {500, 12}) != sup_score_critical(eps, Z, 0.05, spec));
  CHECK_THROWS_AS(sup_score_critical(eps, Z, 0.0, spec), InputError);
}

TEST_CASE("conditioning quantile: zero r and monotone in theta") {
  const HatMatrix H = ridge_hat(randn(40, 10, 4), 0.2);
  CHECK(conditioning_quantile(H, Matrix::Zero(40, 1), 0.25, {200, 1}) == 0.0);
  const Matrix r = randn(40, 2, 5);
  double prev = std::numeric_limits<double>::infinity();
  for (double theta : {0.01, 0.1, 0.25, 0.5, 0.75}) {
    const double c = conditioning_quantile(H, r, theta, {300, 9});
    CHECK(c <= prev);
    prev = c;
  }
}

TEST_CASE("conditioning quantile: three-point hand instance") {
  Matrix raw = Matrix::Zero(3, 3);
  raw(0, 1) = raw(1, 0) = 1.0;
  Matrix r(3, 1);
  r << 1, 2, 3;
  const double q = conditioning_quantile(custom_hat(raw), r, 0.25, {100000, 21});
  // Direct Monte Carlo of max(|2 a|, |b|) with an unrelated generator.
  std::mt19937_64 eng(987654321);
  std::normal_distribution<double> normal;
  std::vector<double> draws(400000);
  for (auto& d : draws) {
    const double b = normal(eng);
    const double a = normal(eng);
    d = std::max(std::abs(2.0 * a), std::abs(b));
  }
  std::sort(draws.begin(), draws.end());
  const double oracle = draws[static_cast<std::size_t>(0.75 * draws.size()) - 1];
  CHECK(std::abs(q - oracle) < 0.03);
}

TEST_CASE("parallel kernels agree with the serial references") {
  const Index n = 70;
  const Vector eps = randn(n, 6);
  const Matrix Z = randn(n, 9, 7);
  const Vector a = kernels::sup_score_draws(eps, Z, 101, 3);
  const Vector b = kernels::sup_score_draws_serial(eps, Z, 101, 3);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12 * b.cwiseAbs().maxCoeff());

  const HatMatrix H = ridge_hat(randn(n, 20, 8), 0.2);
  const Matrix r = randn(n, 2, 9);
  const Vector norms = conditioning_row_norms(H);
  const Vector c = kernels::conditioning_draws(H.matrix(), r, norms, 77, 4);
  const Vector d = kernels::conditioning_draws_serial(H.matrix(), r, norms, 77, 4);
  CHECK((c - d).cwiseAbs().maxCoeff() <= 1e-12 * d.cwiseAbs().maxCoeff());
}

TEST_CASE("bootstrap draws do not depend on the thread count") {
  const Index n = 60;
  const Vector eps = randn(n, 10);
  const Matrix Z = randn(n, 5, 11);
  const HatMatrix H = ridge_hat(randn(n, 15, 12), 0.2);
  const Matrix r = randn(n, 1, 13);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const Vector s1 = kernels::sup_score_draws(eps, Z, 333, 5);
  const Vector c1 = kernels::conditioning_draws(H.matrix(), r, conditioning_row_norms(H), 333, 5);
  omp_set_num_threads(8);
  const Vector s8 = kernels::sup_score_draws(eps, Z, 333, 5);
  const Vector c8 = kernels::conditioning_draws(H.matrix(), r, conditioning_row_norms(H), 333, 5);
  omp_set_num_threads(saved);
  CHECK(s1 == s8);
  CHECK(c1 == c8);
}

TEST_CASE("jk test decisions") {
  const TestResult zero = jk_test(stat(0.0), 1, 0.05);
  CHECK(!zero.reject);
  CHECK(*zero.p_value == doctest::Approx(1.0));
  CHECK(jk_test(stat(3.85), 1, 0.05).reject);
  const double q = chi2_quantile(0.95, 1);
  CHECK(!jk_test(stat(q), 1, 0.05).reject);
  StatisticValue deg;
  deg.degenerate = true;
  const TestResult d = jk_test(deg, 2, 0.05);
  CHECK(!d.reject);
  CHECK(d.degenerate);
  CHECK(*d.p_value == 1.0);
  for (double v : {0.1, 2.0, 50.0}) {
    const double p = *jk_test(stat(v), 2, 0.05).p_value;
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  CHECK_THROWS_AS(jk_test(stat(1.0), 1, 0.0), InputError);
}

TEST_CASE("thresholding branches") {
  const TestResult jk_rej = jk_test(stat(10.0), 1, 0.05);
  const TestResult jk_acc = jk_test(stat(0.5), 1, 0.05);
  const StatisticValue ss = stat(4.0);
  auto T = [&](const TestResult& jk, double C, double tau, double ss_crit) {
    return thresholding_test(jk, ss, ss_crit, stat(C), tau);
  };
  CHECK(*T(jk_rej, 1.0, 1.0, 5.0).branch == TestKind::jk);
  CHECK(T(jk_rej, 1.0, 1.0, 5.0).reject);
  const TestResult s = T(jk_rej, 0.0, 0.5, 5.0);
  CHECK(*s.branch == TestKind::sup_score);
  CHECK(!s.reject);
  CHECK(*s.conditioning_value == 0.0);
  CHECK(*s.tau == 0.5);
  CHECK(*T(jk_acc, 0.0, 0.0, 1.0).branch == TestKind::jk);
  // exhaustive implication check
  for (const TestResult* jk : {&jk_rej, &jk_acc})
    for (double C : {0.0, 0.5, 1.0, 2.0})
      for (double tau : {0.0, 0.5, 1.0, 3.0})
        for (double crit : {1.0, 5.0}) {
          const TestResult r = T(*jk, C, tau, crit);
          const bool ss_rej = ss.value > crit;
          CHECK(r.reject == ((jk->reject && C >= tau) || (ss_rej && C < tau)));
        }
}

TEST_CASE("test labels round trip") {
  for (const std::string label :
       {"jk", "sup_score", "anderson_rubin", "thresholding_q0.75", "thresholding_q0.3",
        "thresholding_fixed1.5"}) {
    CHECK(TestSpec::parse(label).label() == label);
  }
  CHECK(TestSpec::parse("thresholding") == TestSpec{TestKind::thresholding, TauRule::quantile(0.75)});
  CHECK_THROWS_AS(TestSpec::parse("jkk"), InputError);
  CHECK_THROWS_AS(TestSpec::parse("thresholding_q1.5"), InputError);
}

TEST_CASE("pipeline: zero residual data never rejects the sup-score test") {
  PartialledData d = make_data(60, 4, 1.0, 30);
  d.y = d.X.col(0) * 2.0;
  TestConfig cfg;
  cfg.test.kind = TestKind::sup_score;
  const TestResult r = run_test(d, Vector::Constant(1, 2.0), cfg);
  CHECK(!r.reject);
  CHECK(r.statistic == 0.0);
}

TEST_CASE("pipeline: deterministic for a fixed seed") {
  const PartialledData d = make_data(80, 6, 0.5, 31);
  for (const char* label : {"jk", "sup_score", "thresholding", "anderson_rubin"}) {
    TestConfig cfg;
    cfg.test = TestSpec::parse(label);
    cfg.bootstrap.draws = 200;
    const TestResult a = run_test(d, Vector::Constant(1, 0.7), cfg);
    const TestResult b = run_test(d, Vector::Constant(1, 0.7), cfg);
    CHECK(a.statistic == b.statistic);
    CHECK(a.critical_value == b.critical_value);
    CHECK(a.reject == b.reject);
    CHECK(a.reject == (a.statistic > a.critical_value));
  }
}

TEST_CASE("pipeline: evaluate shares work and matches single runs") {
  const PartialledData d = make_data(80, 6, 0.5, 32);
  TestConfig cfg;
  cfg.bootstrap.draws = 200;
  const TestPipeline p(d, cfg);
  const std::vector<TestSpec> tests{TestSpec::parse("jk"), TestSpec::parse("sup_score"),
                                    TestSpec::parse("thresholding_q0.75"),
                                    TestSpec::parse("thresholding_fixed0")};
  const auto all = p.evaluate(Vector::Constant(1, 1.3), tests);
  for (std::size_t k = 0; k < tests.size(); ++k) {
    TestConfig c = cfg;
    c.test = tests[k];
    const TestResult one = run_test(d, Vector::Constant(1, 1.3), c);
    CHECK(one.statistic == all[k].statistic);
    CHECK(one.critical_value == all[k].critical_value);
    CHECK(one.label == all[k].label);
  }
  CHECK(*all[3].branch == TestKind::jk);
}

TEST_CASE("pipeline: stage is reported with errors") {
  const PartialledData d = make_data(30, 3, 1.0, 33);
  TestConfig cfg;
  cfg.rho.method = RhoMethod::known;  // but no values supplied
  try {
    run_test(d, Vector::Ones(1), cfg);
    FAIL("expected an error");
  } catch (const StageError<InputError>& e) {
    CHECK(e.stage() == "rho_estimation");
  }
}

TEST_CASE("jk decision invariant to rescaling y and X with known rho") {
  const PartialledData d = make_data(60, 5, 0.8, 34);
  const Matrix rho = Matrix::Constant(60, 1, 0.5);
  for (double c : {0.1, 7.0}) {  // the singularity floor is absolute below lambda_max = 1
    TestConfig cfg;
    cfg.rho.method = RhoMethod::known;
    cfg.rho.known = rho;
    PartialledData s = d;
    s.y *= c;
    s.X *= c;
    const TestResult a = run_test(d, Vector::Constant(1, 0.4), cfg);
    const TestResult b = run_test(s, Vector::Constant(1, 0.4), cfg);
    CHECK(a.reject == b.reject);
    CHECK(b.statistic == doctest::Approx(a.statistic).epsilon(1e-9));
  }
}

TEST_CASE("accepted runs become intervals") {
  const std::vector<double> g{0.0, 0.5, 1.0, 1.5, 2.0};
  const auto iv = accepted_intervals(g, {false, true, true, false, true});
  REQUIRE(iv.size() == 2);
  CHECK(iv[0] == std::make_pair(0.5, 1.0));
  CHECK(iv[1] == std::make_pair(2.0, 2.0));
  CHECK(accepted_intervals(g, {false, false, false, false, false}).empty());
  const auto u = uniform_grid(0.0, 2.0, 5);
  CHECK(u == g);
}

TEST_CASE("confidence set inversion") {
  const PartialledData d = make_data(80, 5, 1.0, 35);
  TestConfig cfg;
  cfg.bootstrap.draws = 200;
  const auto grid = uniform_grid(-1.0, 3.0, 41);

  SUBCASE("a test that never rejects accepts everything") {
    TestConfig c = cfg;
    c.alpha = 1e-12;
    const ConfidenceSet cs = invert_ci(d, grid, c);
    REQUIRE(cs.intervals.size() == 1);
    CHECK(cs.intervals[0].first == grid.front());
    CHECK(cs.intervals[0].second == grid.back());
    CHECK(!cs.empty);
  }
  SUBCASE("a test that always rejects gives an empty set") {
    TestConfig c = cfg;
    c.test.kind = TestKind::thresholding;
    c.test.tau = TauRule::fixed(1e300);  // always the sup-score branch
    c.alpha = 0.999;
    const ConfidenceSet cs = invert_ci(d, grid, c);
    CHECK(cs.empty);
    CHECK(cs.intervals.empty());
  }
  SUBCASE("mask agrees with pointwise tests") {
    const TestPipeline p(d, cfg);
    const ConfidenceSet cs = invert_ci(p, grid);
    for (std::size_t k : {0u, 7u, 13u, 20u, 33u, 40u})
      CHECK(cs.accepted[k] == !p.run(Vector::Constant(1, grid[k])).reject);
    std::size_t covered = 0;
    for (const auto& [lo, hi] : cs.intervals)
      for (double g : grid)
        if (g >= lo && g <= hi) ++covered;
    CHECK(covered == static_cast<std::size_t>(std::count(cs.accepted.begin(), cs.accepted.end(), true)));
  }
  CHECK_THROWS_AS(invert_ci(d, {}, cfg), InputError);
  CHECK_THROWS_AS(invert_ci(d, {1.0, 0.0}, cfg), InputError);
}

}  // TEST_SUITE
