#include "jkiv/serialize.hpp"

#include <charconv>
#include <cmath>

namespace jkiv {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string spec_columns_header() { return "n,regime,rho1,rho2,strength,beta_true,dx,errors"; }

std::string spec_columns(const SimulationSpec& s) {
  return std::to_string(s.n) + "," + to_string(s.regime) + "," + format_double(s.rho1) + "," +
         format_double(s.rho2) + "," + to_string(s.strength) + "," + format_double(s.beta_true) +
         "," + std::to_string(s.dx) + "," + to_string(s.errors);
}

Json spec_json(const SimulationSpec& s) {
  Json j;
  j["n"] = s.n;
  j["regime"] = to_string(s.regime);
  j["dz"] = regime_columns(s.regime);
  j["rho1"] = s.rho1;
  j["rho2"] = s.rho2;
  j["strength"] = to_string(s.strength);
  j["beta_true"] = s.beta_true;
  j["dx"] = s.dx;
  j["errors"] = to_string(s.errors);
  j["reps"] = s.reps;
  j["first_rep"] = s.first_rep;
  j["draws"] = s.config.bootstrap.draws;
  j["alpha"] = s.config.alpha;
  j["oracle_rho"] = s.oracle_rho;
  j["seed"] = s.seed;
  return j;
}

}  // namespace

Json to_json(const TestResult& r) {
  Json j;
  j["test"] = r.label;
  j["kind"] = to_string(r.kind);
  j["statistic"] = number(r.statistic);
  j["critical_value"] = number(r.critical_value);
  j["p_value"] = r.p_value ? number(*r.p_value) : Json(nullptr);
  j["reject"] = r.reject;
  j["alpha"] = r.alpha;
  if (r.branch) j["branch"] = to_string(*r.branch);
  if (r.conditioning_value) j["conditioning_value"] = number(*r.conditioning_value);
  if (r.tau) j["tau"] = number(*r.tau);
  j["degenerate"] = r.degenerate;
  return j;
}

Json to_json(const ConfidenceSet& cs) {
  Json j;
  j["test"] = cs.test;
  j["alpha"] = cs.alpha;
  j["empty"] = cs.empty;
  Json iv = Json::array();
  for (const auto& [lo, hi] : cs.intervals) iv.push_back(Json::array({lo, hi}));
  j["intervals"] = iv;
  j["grid_points"] = cs.grid.size();
  j["accepted_points"] = std::count(cs.accepted.begin(), cs.accepted.end(), true);
  return j;
}

Json to_json(const SizeTable& t) {
  Json j;
  j["design"] = spec_json(t.spec);
  Json rows = Json::array();
  for (std::size_t k = 0; k < t.tests.size(); ++k) {
    Json r;
    r["test"] = t.tests[k].test;
    r["rejections"] = t.tests[k].rejections;
    r["reps"] = t.tests[k].reps;
    r["frequency"] = t.tests[k].frequency();
    r["mc_se"] = t.tests[k].mc_se();
    r["degenerate"] = t.degenerate[k];
    rows.push_back(r);
  }
  j["tests"] = rows;
  return j;
}

Json to_json(const PowerTable& t) {
  Json j;
  j["design"] = spec_json(t.spec);
  j["calibrated"] = t.calibrated;
  if (t.calibrated) {
    j["null_reps"] = t.null_reps;
    Json crit;
    for (std::size_t k = 0; k < t.tests.size(); ++k) crit[t.tests[k]] = number(t.calibrated_critical[k]);
    j["calibrated_critical"] = crit;
  }
  j["offsets"] = t.offsets;
  Json rows = Json::array();
  for (std::size_t k = 0; k < t.tests.size(); ++k) {
    Json r;
    r["test"] = t.tests[k];
    Json freq = Json::array();
    Json se = Json::array();
    for (std::size_t o = 0; o < t.offsets.size(); ++o) {
      freq.push_back(t.frequency(k, o));
      se.push_back(t.mc_se(k, o));
    }
    r["frequency"] = freq;
    r["mc_se"] = se;
    rows.push_back(r);
  }
  j["tests"] = rows;
  return j;
}

Json to_json(const FStatTable& t) {
  Json j;
  j["n"] = t.n;
  j["reps"] = t.reps;
  j["seed"] = t.seed;
  j["true_instrument_f"] = number(t.true_f);
  Json rows = Json::array();
  for (std::size_t c = 0; c < t.counts.size(); ++c) {
    Json r;
    r["selected"] = t.counts[c];
    r["mean_f"] = number(t.mean_f[c]);
    r["missing"] = t.missing[c];
    rows.push_back(r);
  }
  j["selected"] = rows;
  return j;
}

Json to_json(const DesignDiagnostics& d) {
  Json j;
  j["quantile"] = d.quantile;
  j["leverage_ratio"] = number(d.leverage_ratio);
  j["first_stage_ratio"] = number(d.first_stage_ratio);
  j["first_stage_ratio_min"] = number(d.first_stage_ratio_min);
  j["row_col_ratio"] = number(d.row_col_ratio);
  j["eig_ratio"] = number(d.eig_ratio);
  Json flags = Json::array();
  for (const auto& f : d.flags) {
    Json x;
    x["name"] = f.name;
    x["value"] = number(f.value);
    x["threshold"] = f.threshold;
    x["warn"] = f.warn;
    flags.push_back(x);
  }
  j["flags"] = flags;
  j["any_warning"] = d.any_warning();
  return j;
}

Json to_json(const RunConfig& c) {
  Json j = Json::object();
  for (const auto& [key, value] : config_entries(c)) j[key] = value;
  return j;
}

Json to_json(const RhoModel& m) {
  Json j;
  j["method"] = to_string(m.method);
  Json comps = Json::array();
  for (const auto& c : m.components) {
    Json x;
    x["lambda"] = c.lambda;
    x["support"] = c.support;
    x["phi"] = std::vector<double>(c.phi.data(), c.phi.data() + c.phi.size());
    comps.push_back(x);
  }
  j["components"] = comps;
  return j;
}

std::string to_csv(const ConfidenceSet& cs) {
  std::string out = "grid,accepted,statistic,critical_value\n";
  for (std::size_t k = 0; k < cs.grid.size(); ++k)
    out += format_double(cs.grid[k]) + "," + (cs.accepted[k] ? "1" : "0") + "," +
           format_double(cs.statistic[k]) + "," + format_double(cs.critical_value[k]) + "\n";
  return out;
}

std::string to_csv(const SizeTable& t) {
  std::string out = spec_columns_header() + ",test,rejections,reps,frequency,mc_se\n";
  for (const auto& f : t.tests)
    out += spec_columns(t.spec) + "," + f.test + "," + std::to_string(f.rejections) + "," +
           std::to_string(f.reps) + "," + format_double(f.frequency()) + "," +
           format_double(f.mc_se()) + "\n";
  return out;
}

std::string to_csv(const PowerTable& t) {
  std::string out = spec_columns_header() + ",offset,test,rejections,reps,frequency,mc_se\n";
  for (std::size_t o = 0; o < t.offsets.size(); ++o)
    for (std::size_t k = 0; k < t.tests.size(); ++k)
      out += spec_columns(t.spec) + "," + format_double(t.offsets[o]) + "," + t.tests[k] + "," +
             std::to_string(t.rejections[k][o]) + "," + std::to_string(t.reps) + "," +
             format_double(t.frequency(k, o)) + "," + format_double(t.mc_se(k, o)) + "\n";
  return out;
}

std::string to_csv(const FStatTable& t) {
  std::string out = "selected,mean_f,missing\n";
  for (std::size_t c = 0; c < t.counts.size(); ++c)
    out += std::to_string(t.counts[c]) + "," + format_double(t.mean_f[c]) + "," +
           std::to_string(t.missing[c]) + "\n";
  out += "true," + format_double(t.true_f) + ",0\n";
  return out;
}

}  // namespace jkiv
