#include "jkiv/simulator.hpp"

#include "jkiv/kernels.hpp"
#include "jkiv/lasso.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace jkiv {

std::string to_string(Regime r) {
  switch (r) {
    case Regime::dz10: return "dz10";
    case Regime::dz30: return "dz30";
    case Regime::dz65: return "dz65";
    case Regime::dz75: return "dz75";
  }
  return "dz10";
}

std::string to_string(Strength s) {
  switch (s) {
    case Strength::strong: return "strong";
    case Strength::weak: return "weak";
    case Strength::intermediate: return "intermediate";
  }
  return "strong";
}

std::string to_string(ErrorDist e) { return e == ErrorDist::laplace ? "laplace" : "gaussian"; }

Regime regime_from_string(const std::string& s) {
  if (s == "dz10") return Regime::dz10;
  if (s == "dz30") return Regime::dz30;
  if (s == "dz65") return Regime::dz65;
  if (s == "dz75") return Regime::dz75;
  throw InputError("unknown instrument regime '" + s + "'");
}

Strength strength_from_string(const std::string& s) {
  if (s == "strong") return Strength::strong;
  if (s == "weak") return Strength::weak;
  if (s == "intermediate") return Strength::intermediate;
  throw InputError("unknown identification strength '" + s + "'");
}

ErrorDist error_dist_from_string(const std::string& s) {
  if (s == "laplace") return ErrorDist::laplace;
  if (s == "gaussian") return ErrorDist::gaussian;
  throw InputError("unknown error distribution '" + s + "'");
}

Index regime_columns(Regime r) {
  switch (r) {
    case Regime::dz10: return 10;
    case Regime::dz30: return 30;
    case Regime::dz65: return 65;
    case Regime::dz75: return 75;
  }
  return 10;
}

double strength_scale(Strength s, Index n) {
  const auto nd = static_cast<double>(n);
  switch (s) {
    case Strength::strong: return 1.0;
    case Strength::weak: return 1.0 / std::sqrt(nd);
    case Strength::intermediate: return std::pow(nd, -1.0 / 3.0);
  }
  return 1.0;
}

void SimulationSpec::validate() const {
  if (n < 20) throw InputError("simulation needs n >= 20");
  if (reps < 1) throw InputError("simulation needs reps >= 1");
  if (first_rep < 0) throw InputError("first_rep must be non-negative");
  if (dx != 1 && dx != 2) throw InputError("simulation supports d_x = 1 or 2");
  if (tests.empty()) throw InputError("simulation needs at least one test");
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
}

// Sampling ------------------------------------------------------------------

double laplace_sample(Engine& eng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double e1 = -std::log1p(-unif(eng));
  const double e2 = -std::log1p(-unif(eng));
  return e1 - e2;
}

Matrix toeplitz_covariance(Index d, double base) {
  Matrix S(d, d);
  for (Index l = 0; l < d; ++l)
    for (Index k = 0; k < d; ++k) S(l, k) = std::pow(base, -static_cast<double>(std::abs(l - k)));
  return S;
}

Matrix gaussian_rows(Index n, const Matrix& cov, Engine& eng) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw InputError("covariance is not positive definite");
  const Matrix L = llt.matrixL();
  std::normal_distribution<double> normal;
  Matrix G(n, cov.rows());
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < G.cols(); ++k) G(i, k) = normal(eng);
  return G * L.transpose();
}

Matrix gen_base_instruments(Index n, Engine& eng) {
  static const Matrix cov = toeplitz_covariance(10, 2.0);
  return gaussian_rows(n, cov, eng);
}

Matrix quadratic_expansion(const Matrix& z) {
  const Index n = z.rows();
  const Index d = z.cols();
  Matrix out(n, 2 * d + d * (d - 1) / 2);
  out.leftCols(d) = z;
  out.middleCols(d, d) = z.array().square().matrix();
  Index c = 2 * d;
  for (Index l = 0; l < d; ++l)
    for (Index k = l + 1; k < d; ++k) out.col(c++) = z.col(l).cwiseProduct(z.col(k));
  return out;
}

Matrix expand_regime(const Matrix& zbar, Regime regime) {
  const Index n = zbar.rows();
  const Index d = zbar.cols();
  switch (regime) {
    case Regime::dz10: return zbar;
    case Regime::dz30: {
      Matrix out(n, 3 * d);
      out << zbar, zbar.array().square().matrix(), zbar.array().cube().matrix();
      return out;
    }
    case Regime::dz65: return quadratic_expansion(zbar);
    case Regime::dz75: {
      const Matrix q = quadratic_expansion(zbar);
      Matrix out(n, q.cols() + d);
      out << q, zbar.array().cube().matrix();
      return out;
    }
  }
  return zbar;
}

SimulatedData gen_dgp(const SimulationSpec& spec, Index rep) {
  const Index n = spec.n;
  const Index dx = spec.dx;
  Engine eng = make_engine(spec.seed, Stream::dgp, static_cast<std::uint64_t>(rep));
  SimulatedData sim;
  sim.zbar = gen_base_instruments(n, eng);
  const Matrix& z = sim.zbar;

  std::normal_distribution<double> normal;
  auto draw = [&] {
    return spec.errors == ErrorDist::laplace ? laplace_sample(eng) : normal(eng);
  };
  sim.error_variance = spec.errors == ErrorDist::laplace ? 2.0 : 1.0;
  Matrix E(n, 1 + dx);
  for (Index c = 0; c < E.cols(); ++c)
    for (Index i = 0; i < n; ++i) E(i, c) = draw();

  const double rn = strength_scale(spec.strength, n);
  const double b = (1.0 - spec.rho2) * (1.0 - spec.rho2);
  sim.scale.resize(n);
  sim.eps.resize(n);
  sim.Pi.resize(n, dx);
  sim.V.resize(n, dx);
  for (Index i = 0; i < n; ++i) {
    sim.scale(i) = 1.0 + spec.rho1 * (z(i, 0) * z(i, 0) + z(i, 1) * z(i, 1) + z(i, 1) * z(i, 2));
    sim.eps(i) = sim.scale(i) * E(i, 0);
    for (Index l = 0; l < dx; ++l) {
      double pi = 0.0;
      for (Index k = 5 * l; k < 5 * l + 5; ++k) {
        const double v = z(i, k);
        pi += 0.75 * v + 0.25 * v * v + 0.25 * v * v * v;
      }
      sim.Pi(i, l) = rn * pi;
      sim.V(i, l) = spec.rho2 * (1.0 + z(i, l)) * sim.eps(i) + b * E(i, 1 + l);
    }
  }

  IVDataset& d = sim.data;
  d.X = sim.Pi + sim.V;
  d.y = d.X * Vector::Constant(dx, spec.beta_true) + sim.eps;
  d.Z = expand_regime(z, spec.regime);
  d.Z1.resize(n, 0);
  for (Index l = 0; l < dx; ++l) d.x_names.push_back("x" + std::to_string(l + 1));
  for (Index k = 0; k < d.Z.cols(); ++k) d.z_names.push_back("z" + std::to_string(k + 1));
  return sim;
}

Matrix true_rho(const SimulatedData& sim, const SimulationSpec& spec, const Vector& beta0) {
  const Index n = sim.eps.size();
  const Index dx = sim.Pi.cols();
  if (beta0.size() != dx) throw InputError("true_rho: beta0 has wrong dimension");
  const Vector delta = Vector::Constant(dx, spec.beta_true) - beta0;
  const double b2 = std::pow(1.0 - spec.rho2, 4) * sim.error_variance;
  Matrix rho(n, dx);
  Vector a(dx);
  for (Index i = 0; i < n; ++i) {
    const double see = sim.scale(i) * sim.scale(i) * sim.error_variance;
    for (Index l = 0; l < dx; ++l) a(l) = spec.rho2 * (1.0 + sim.zbar(i, l));
    const Vector sve = a * see;
    Matrix svv = a * a.transpose() * see;
    svv.diagonal().array() += b2;
    const Vector num = sve + svv * delta;
    const double den = see + 2.0 * delta.dot(sve) + delta.dot(svv * delta);
    rho.row(i) = (num / den).transpose();
  }
  return rho;
}

// Experiments ---------------------------------------------------------------

double TestFrequency::frequency() const {
  return reps ? static_cast<double>(rejections) / static_cast<double>(reps) : 0.0;
}

double TestFrequency::mc_se() const {
  const double p = frequency();
  return reps ? std::sqrt(p * (1.0 - p) / static_cast<double>(reps)) : 0.0;
}

void SizeTable::merge(const SizeTable& other) {
  if (other.tests.size() != tests.size()) throw InputError("merge: tables have different tests");
  for (std::size_t t = 0; t < tests.size(); ++t) {
    if (tests[t].test != other.tests[t].test) throw InputError("merge: tables have different tests");
    tests[t].rejections += other.tests[t].rejections;
    tests[t].reps += other.tests[t].reps;
    statistics[t].insert(statistics[t].end(), other.statistics[t].begin(),
                         other.statistics[t].end());
    degenerate[t] += other.degenerate[t];
  }
  spec.reps += other.spec.reps;
}

namespace {

bool needs_hat(const std::vector<TestSpec>& tests) {
  return std::any_of(tests.begin(), tests.end(), [](const TestSpec& t) {
    return t.kind == TestKind::jk || t.kind == TestKind::thresholding;
  });
}

// Evaluates every configured test on replication `rep` at each beta0 offset.
std::vector<std::vector<TestResult>> run_replication(const SimulationSpec& spec, Index rep,
                                                     const std::vector<double>& offsets) {
  const SimulatedData sim = gen_dgp(spec, rep);
  PartialledData pd = partial_out_controls(sim.data);
  TestConfig config = spec.config;
  config.test = spec.tests.front();
  config.bootstrap.seed = derive_seed(spec.seed, Stream::replication, static_cast<std::uint64_t>(rep));
  auto pipeline = needs_hat(spec.tests)
                      ? TestPipeline(pd, config, build_hat(pd, config.hat))
                      : TestPipeline(pd, config);
  if (spec.oracle_rho)
    pipeline.set_known_rho([&sim, &spec](const Vector& b0) { return true_rho(sim, spec, b0); });
  std::vector<std::vector<TestResult>> out;
  out.reserve(offsets.size());
  for (double off : offsets)
    out.push_back(pipeline.evaluate(Vector::Constant(spec.dx, spec.beta_true + off), spec.tests));
  return out;
}

std::vector<std::string> labels_of(const std::vector<TestSpec>& tests) {
  std::vector<std::string> out;
  for (const auto& t : tests) out.push_back(t.label());
  return out;
}

}  // namespace

SizeTable size_experiment(const SimulationSpec& spec) {
  spec.validate();
  const std::size_t T = spec.tests.size();
  std::vector<std::vector<TestResult>> results(static_cast<std::size_t>(spec.reps));
  detail::parallel_for(spec.reps, "replication", [&](Index k) {
    results[static_cast<std::size_t>(k)] = run_replication(spec, spec.first_rep + k, {0.0}).front();
  });

  SizeTable table;
  table.spec = spec;
  table.statistics.assign(T, {});
  table.degenerate.assign(T, 0);
  const auto labels = labels_of(spec.tests);
  for (std::size_t t = 0; t < T; ++t) table.tests.push_back({labels[t], 0, spec.reps});
  for (const auto& rep : results) {
    for (std::size_t t = 0; t < T; ++t) {
      table.tests[t].rejections += rep[t].reject ? 1 : 0;
      table.statistics[t].push_back(rep[t].statistic);
      table.degenerate[t] += rep[t].degenerate ? 1 : 0;
    }
  }
  return table;
}

double PowerTable::frequency(std::size_t test, std::size_t offset) const {
  return reps ? static_cast<double>(rejections[test][offset]) / static_cast<double>(reps) : 0.0;
}

double PowerTable::mc_se(std::size_t test, std::size_t offset) const {
  const double p = frequency(test, offset);
  return reps ? std::sqrt(p * (1.0 - p) / static_cast<double>(reps)) : 0.0;
}

PowerTable power_curve(const SimulationSpec& spec, const std::vector<double>& offsets,
                       bool calibrated, Index null_reps) {
  spec.validate();
  if (spec.dx != 1) throw InputError("power curves need d_x = 1");
  if (offsets.empty()) throw InputError("power curve needs at least one offset");
  const std::size_t T = spec.tests.size();

  PowerTable table;
  table.spec = spec;
  table.offsets = offsets;
  table.calibrated = calibrated;
  table.tests = labels_of(spec.tests);
  table.reps = spec.reps;

  if (calibrated) {
    if (null_reps < 1) throw InputError("calibrated power needs null_reps >= 1");
    table.null_reps = null_reps;
    SimulationSpec null_spec = spec;
    null_spec.seed = derive_seed(spec.seed, Stream::null_run, 0);
    null_spec.first_rep = 0;
    null_spec.reps = null_reps;
    std::vector<std::vector<TestResult>> null_results(static_cast<std::size_t>(null_reps));
    detail::parallel_for(null_reps, "null replication", [&](Index k) {
      null_results[static_cast<std::size_t>(k)] = run_replication(null_spec, k, {0.0}).front();
    });
    for (std::size_t t = 0; t < T; ++t) {
      Vector ratios(null_reps);
      for (Index k = 0; k < null_reps; ++k)
        ratios(k) = null_results[static_cast<std::size_t>(k)][t].normalized();
      table.calibrated_critical.push_back(
          kernels::order_statistic_quantile(ratios, 1.0 - spec.config.alpha));
    }
  }

  std::vector<std::vector<std::vector<TestResult>>> results(static_cast<std::size_t>(spec.reps));
  detail::parallel_for(spec.reps, "replication", [&](Index k) {
    results[static_cast<std::size_t>(k)] = run_replication(spec, spec.first_rep + k, offsets);
  });

  table.rejections.assign(T, std::vector<Index>(offsets.size(), 0));
  for (const auto& rep : results)
    for (std::size_t o = 0; o < offsets.size(); ++o)
      for (std::size_t t = 0; t < T; ++t) {
        const TestResult& r = rep[o][t];
        const bool reject = calibrated ? r.normalized() > table.calibrated_critical[t] : r.reject;
        table.rejections[t][o] += reject ? 1 : 0;
      }
  return table;
}

// F-statistic demonstration ---------------------------------------------------

double first_stage_f(const Vector& x, const Matrix& Zsel) {
  const Index n = x.size();
  const Index k = Zsel.cols();
  if (Zsel.rows() != n) throw InputError("first_stage_f: dimension mismatch");
  if (k < 1 || n - k - 1 < 1) throw InputError("first_stage_f: needs 1 <= k < n - 1");
  const Vector xc = x.array() - x.mean();
  const Matrix Zc = Zsel.rowwise() - Zsel.colwise().mean();
  const double ssr0 = xc.squaredNorm();
  Eigen::ColPivHouseholderQR<Matrix> qr(Zc);
  const double ssr1 = (xc - Zc * qr.solve(xc)).squaredNorm();
  if (!(ssr1 > 0.0)) throw NumericalError("first_stage_f: perfect fit");
  return ((ssr0 - ssr1) / static_cast<double>(k)) / (ssr1 / static_cast<double>(n - k - 1));
}

FStatSample gen_fstat_sample(Index n, Engine& eng) {
  static const Matrix cov = toeplitz_covariance(10, 1.1);
  const Matrix base = gaussian_rows(n, cov, eng);
  std::normal_distribution<double> normal;
  FStatSample s;
  s.x.resize(n);
  const double scale = 0.7 / std::sqrt(static_cast<double>(n));
  for (Index i = 0; i < n; ++i) s.x(i) = scale * base.row(i).sum() + normal(eng);
  s.Z = quadratic_expansion(base);
  return s;
}

namespace {

// One walk down the penalty path serves every requested count.
std::vector<std::vector<Index>> select_counts(const Vector& x, const Matrix& Z,
                                              const std::vector<Index>& counts) {
  const Vector xc = x.array() - x.mean();
  const Matrix Zc = Z.rowwise() - Z.colwise().mean();
  const Vector sd = (Zc.colwise().squaredNorm() / static_cast<double>(Zc.rows())).cwiseSqrt();
  const GramProblem problem = GramProblem::from_data(xc, Zc);
  const auto grid = lambda_grid(lasso_lambda_max(xc, Zc), 400, 1e-5);

  std::vector<std::vector<Index>> chosen(counts.size());
  std::vector<bool> done(counts.size(), false);
  std::size_t remaining = counts.size();
  Vector warm = Vector::Zero(Z.cols());
  for (double lambda : grid) {
    if (remaining == 0) break;
    warm = lasso_fit_gram(problem, lambda, &warm).coef;
    const auto support = support_of(warm);
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (done[c] || static_cast<Index>(support.size()) < counts[c]) continue;
      std::vector<Index> sel = support;
      // Overshoot: keep the largest coefficients on the standardized scale.
      std::stable_sort(sel.begin(), sel.end(), [&](Index a, Index b) {
        return std::abs(warm(a)) * sd(a) > std::abs(warm(b)) * sd(b);
      });
      sel.resize(static_cast<std::size_t>(counts[c]));
      std::sort(sel.begin(), sel.end());
      chosen[c] = std::move(sel);
      done[c] = true;
      --remaining;
    }
  }
  return chosen;
}

Matrix take_columns(const Matrix& Z, const std::vector<Index>& cols) {
  Matrix out(Z.rows(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(static_cast<Index>(c)) = Z.col(cols[c]);
  return out;
}

}  // namespace

std::vector<Index> select_by_path(const Vector& x, const Matrix& Z, Index k) {
  if (k < 1 || k > Z.cols()) throw InputError("selected count must lie in [1, number of columns]");
  return select_counts(x, Z, {k}).front();
}

FStatTable fstat_demo(Index n, const std::vector<Index>& counts, Index reps, std::uint64_t seed) {
  if (reps < 1) throw InputError("fstat demo needs reps >= 1");
  if (counts.empty()) throw InputError("fstat demo needs at least one selected count");
  for (Index k : counts)
    if (k < 1 || k > 65) throw InputError("selected counts must lie in [1, 65]");
  if (n < 80) throw InputError("fstat demo needs n >= 80");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> f(static_cast<std::size_t>(reps));
  std::vector<double> f_true(static_cast<std::size_t>(reps));
  detail::parallel_for(reps, "replication", [&](Index r) {
    Engine eng = make_engine(seed, Stream::dgp, static_cast<std::uint64_t>(r));
    const FStatSample s = gen_fstat_sample(n, eng);
    const auto chosen = select_counts(s.x, s.Z, counts);
    auto& row = f[static_cast<std::size_t>(r)];
    for (const auto& sel : chosen)
      row.push_back(sel.empty() ? nan : first_stage_f(s.x, take_columns(s.Z, sel)));
    f_true[static_cast<std::size_t>(r)] = first_stage_f(s.x, s.Z.leftCols(10));
  });

  FStatTable table;
  table.n = n;
  table.reps = reps;
  table.seed = seed;
  table.counts = counts;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    double sum = 0.0;
    Index used = 0;
    for (const auto& row : f) {
      if (std::isnan(row[c])) continue;
      sum += row[c];
      ++used;
    }
    table.mean_f.push_back(used ? sum / static_cast<double>(used) : nan);
    table.missing.push_back(reps - used);
  }
  table.true_f = std::accumulate(f_true.begin(), f_true.end(), 0.0) / static_cast<double>(reps);
  return table;
}

// Oracle diagnostics ------------------------------------------------------------

double oracle_noncentrality(const Vector& Pi, const Vector& Pi_hat, const Vector& var_eta,
                            double offset) {
  if (Pi.size() != Pi_hat.size() || Pi.size() != var_eta.size())
    throw InputError("oracle_noncentrality: dimension mismatch");
  const double den = var_eta.dot(Pi_hat.cwiseAbs2());
  if (!(den > 0.0)) throw InputError("oracle_noncentrality: zero denominator");
  const double num = Pi.dot(Pi_hat);
  return offset * offset * num * num / den;
}

double local_power_index(const std::vector<Matrix>& Pi, const std::vector<Matrix>& Pi_hat,
                         const Vector& offset) {
  if (Pi.empty() || Pi.size() != Pi_hat.size())
    throw InputError("local_power_index: needs matching, non-empty replication lists");
  const Index n = Pi.front().rows();
  const Index dx = Pi.front().cols();
  if (offset.size() != dx) throw InputError("local_power_index: offset has wrong dimension");
  const auto R = static_cast<double>(Pi.size());

  Matrix mean_sq = Matrix::Zero(n, dx);
  for (const auto& ph : Pi_hat) {
    if (ph.rows() != n || ph.cols() != dx) throw InputError("local_power_index: dimension mismatch");
    mean_sq += ph.cwiseAbs2();
  }
  mean_sq /= R;

  double P = 0.0;
  for (Index l = 0; l < dx; ++l) {
    const double max_ms = mean_sq.col(l).maxCoeff();
    if (!(max_ms > 0.0)) continue;
    const double s = 1.0 / std::sqrt(max_ms);
    double acc = 0.0;
    for (std::size_t r = 0; r < Pi.size(); ++r) {
      const double t = s / std::sqrt(static_cast<double>(n)) * Pi_hat[r].col(l).dot(Pi[r] * offset);
      acc += t * t;
    }
    P += acc / R;
  }
  return P;
}

}  // namespace jkiv
