#include "jkiv/cli.hpp"

#include "jkiv/data.hpp"
#include "jkiv/hat_matrix.hpp"
#include "jkiv/inference.hpp"
#include "jkiv/serialize.hpp"
#include "jkiv/simulator.hpp"

#include <omp.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace jkiv {

namespace {

TestSpec test_spec(const RunConfig& c, const std::string& kind) {
  TestSpec t;
  t.kind = test_kind_from_string(kind);
  t.tau = c.tau_rule == "fixed" ? TauRule::fixed(c.tau_value) : TauRule::quantile(c.tau_level);
  return t;
}

TestConfig test_config(const RunConfig& c) {
  TestConfig t;
  t.test = test_spec(c, c.kind);
  t.alpha = c.alpha;
  t.bootstrap.draws = c.draws;
  t.bootstrap.seed = c.seed;
  if (c.hat == "projection") {
    t.hat.kind = HatKind::projection;
  } else if (c.hat == "custom") {
    t.hat.kind = HatKind::custom;
    t.hat.custom = load_matrix_csv(c.hat_path);
  }
  t.hat.dof_fraction = c.dof_fraction;
  if (c.rho == "post_lasso") {
    t.rho.method = RhoMethod::post_lasso;
  } else if (c.rho == "known") {
    t.rho.method = RhoMethod::known;
    t.rho.known = load_matrix_csv(c.rho_path);
  }
  t.rho.basis = c.basis == "instruments_only" ? BasisKind::instruments_only
                                              : BasisKind::instruments_plus_intercept;
  t.rho.penalty.folds = c.cv == "loo" ? 0 : c.folds;
  return t;
}

struct LoadedData {
  PartialledData data;
  std::vector<std::string> dropped;
};

LoadedData load_data(const RunConfig& c) {
  const IVDataset raw = load_csv(c.data, Schema::load(c.schema));
  LoadedData out{partial_out_controls(raw), {}};
  const CollinearityResult pruned = drop_collinear_instruments(out.data.Z);
  if (!pruned.dropped.empty()) {
    std::vector<std::string> names;
    for (Index k : pruned.kept) names.push_back(out.data.z_names[static_cast<std::size_t>(k)]);
    for (Index k : pruned.dropped) out.dropped.push_back(out.data.z_names[static_cast<std::size_t>(k)]);
    out.data.Z = pruned.Z;
    out.data.z_names = std::move(names);
  }
  return out;
}

Vector beta0_of(const RunConfig& c, Index dx) {
  if (static_cast<Index>(c.beta0.size()) != dx)
    throw InputError("beta0: expected " + std::to_string(dx) + " values, got " +
                     std::to_string(c.beta0.size()));
  return Eigen::Map<const Vector>(c.beta0.data(), dx);
}

SimulationSpec simulation_spec(const RunConfig& c) {
  SimulationSpec s;
  s.n = c.n;
  s.regime = regime_from_string(c.regime);
  s.rho1 = c.rho1;
  s.rho2 = c.rho2;
  s.strength = strength_from_string(c.strength);
  s.beta_true = c.beta_true;
  s.dx = c.dx;
  s.errors = error_dist_from_string(c.errors);
  s.reps = c.reps;
  s.first_rep = c.first_rep;
  s.tests.clear();
  for (const auto& t : c.tests) s.tests.push_back(TestSpec::parse(t));
  s.config = test_config(c);
  s.oracle_rho = c.oracle_rho;
  s.seed = c.seed;
  return s;
}

Json envelope(const RunConfig& c) {
  Json j;
  j["command"] = to_string(c.command);
  j["seed"] = c.seed;
  j["config"] = to_json(c);
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw InputError("failed writing '" + path.string() + "'");
}

// JSON to the output path (or `out`), CSV beside it when there is a table.
void emit(const RunConfig& c, const Json& j, const std::string& csv, std::ostream& out,
          const std::string& summary) {
  const std::string text = j.dump(2) + "\n";
  if (c.output.empty()) {
    out << text;
    return;
  }
  const std::filesystem::path path(c.output);
  write_file(path, text);
  out << summary;
  out << "json: " << path.string() << "\n";
  if (!csv.empty()) {
    auto csv_path = path;
    csv_path.replace_extension(".csv");
    if (csv_path == path) csv_path += ".table.csv";
    write_file(csv_path, csv);
    out << "csv: " << csv_path.string() << "\n";
  }
}

std::string describe(const TestResult& r) {
  std::ostringstream s;
  s << std::setprecision(6) << r.label << ": statistic " << r.statistic << ", critical value "
    << r.critical_value;
  if (r.p_value) s << ", p " << *r.p_value;
  if (r.branch) s << ", branch " << to_string(*r.branch) << " (C " << *r.conditioning_value
                  << ", tau " << *r.tau << ")";
  s << (r.reject ? ", reject" : ", do not reject");
  if (r.degenerate) s << " [degenerate]";
  s << "\n";
  return s.str();
}

Json dropped_json(const std::vector<std::string>& dropped) {
  Json d = Json::array();
  for (const auto& name : dropped) d.push_back(name);
  return d;
}

void run_test_command(const RunConfig& c, std::ostream& out) {
  const LoadedData loaded = load_data(c);
  const TestConfig tc = test_config(c);
  const Vector beta0 = beta0_of(c, loaded.data.dx());
  const TestResult r = TestPipeline(loaded.data, tc).run(beta0);
  Json j = envelope(c);
  j["dropped_instruments"] = dropped_json(loaded.dropped);
  j["result"] = to_json(r);
  emit(c, j, "", out, describe(r));
}

void run_invert_command(const RunConfig& c, std::ostream& out) {
  const LoadedData loaded = load_data(c);
  const TestPipeline pipeline(loaded.data, test_config(c));
  const ConfidenceSet cs = invert_ci(pipeline, uniform_grid(c.grid_lo, c.grid_hi, c.grid_points));
  Json j = envelope(c);
  j["dropped_instruments"] = dropped_json(loaded.dropped);
  j["result"] = to_json(cs);
  std::ostringstream s;
  s << cs.test << " " << 100.0 * (1.0 - cs.alpha) << "% confidence set: ";
  if (cs.empty) s << "empty";
  for (std::size_t k = 0; k < cs.intervals.size(); ++k)
    s << (k ? " U " : "") << "[" << cs.intervals[k].first << ", " << cs.intervals[k].second << "]";
  s << "\n";
  emit(c, j, to_csv(cs), out, s.str());
}

void run_diagnose_command(const RunConfig& c, std::ostream& out) {
  const LoadedData loaded = load_data(c);
  const TestConfig tc = test_config(c);
  const Vector beta0 = beta0_of(c, loaded.data.dx());
  const TestPipeline pipeline(loaded.data, tc, build_hat(loaded.data, tc.hat));
  const HatMatrix& H = pipeline.hat();
  const RhoModel rho = pipeline.rho_model(beta0);
  const DesignDiagnostics d = design_diagnostics(H, rho.r_hat, c.q);
  Json j = envelope(c);
  j["dropped_instruments"] = dropped_json(loaded.dropped);
  Json hat;
  hat["kind"] = to_string(H.kind());
  hat["ridge_penalty"] = H.ridge_penalty() ? Json(*H.ridge_penalty()) : Json(nullptr);
  hat["dof"] = H.dof();
  hat["removed_diagonal_mass"] = H.removed_diagonal_mass();
  j["hat"] = hat;
  j["result"] = to_json(d);
  std::ostringstream s;
  for (const auto& f : d.flags)
    s << f.name << " = " << f.value << (f.warn ? "  WARNING" : "") << "\n";
  emit(c, j, "", out, s.str());
}

void run_simulate_command(const RunConfig& c, std::ostream& out) {
  const SimulationSpec spec = simulation_spec(c);
  Json j = envelope(c);
  std::ostringstream s;
  s << std::setprecision(4);
  if (c.mode == "size") {
    const SizeTable t = size_experiment(spec);
    j["result"] = to_json(t);
    for (const auto& f : t.tests)
      s << f.test << ": rejection frequency " << f.frequency() << " (mc se " << f.mc_se() << ")\n";
    emit(c, j, to_csv(t), out, s.str());
  } else {
    const auto offsets = c.offsets.empty() ? uniform_grid(-4.0, 4.0, 100) : c.offsets;
    const PowerTable t = power_curve(spec, offsets, c.calibrated, c.null_reps);
    j["result"] = to_json(t);
    s << "power curve over " << offsets.size() << " offsets, " << t.reps << " reps"
      << (t.calibrated ? ", calibrated" : "") << "\n";
    emit(c, j, to_csv(t), out, s.str());
  }
}

void run_fstat_command(const RunConfig& c, std::ostream& out) {
  const FStatTable t = fstat_demo(c.n, c.counts, c.reps, c.seed);
  Json j = envelope(c);
  j["result"] = to_json(t);
  std::ostringstream s;
  s << std::setprecision(4) << "true instruments: mean F " << t.true_f << "\n";
  for (std::size_t k = 0; k < t.counts.size(); ++k)
    s << t.counts[k] << " selected: mean F " << t.mean_f[k] << "\n";
  emit(c, j, to_csv(t), out, s.str());
}

}  // namespace

void execute(const RunConfig& config, std::ostream& out) {
  validate(config);
  if (config.threads > 0) omp_set_num_threads(config.threads);
  switch (config.command) {
    case Command::test: run_test_command(config, out); break;
    case Command::invert: run_invert_command(config, out); break;
    case Command::diagnose: run_diagnose_command(config, out); break;
    case Command::simulate: run_simulate_command(config, out); break;
    case Command::fstat_demo: run_fstat_command(config, out); break;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    execute(parse_config(args), out);
    return 0;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace jkiv
