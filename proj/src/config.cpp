#include "jkiv/config.hpp"

#include "jkiv/inference.hpp"
#include "jkiv/simulator.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace jkiv {

std::string to_string(Command c) {
  switch (c) {
    case Command::test: return "test";
    case Command::invert: return "invert";
    case Command::simulate: return "simulate";
    case Command::fstat_demo: return "fstat-demo";
    case Command::diagnose: return "diagnose";
  }
  return "test";
}

Command command_from_string(const std::string& s) {
  if (s == "test") return Command::test;
  if (s == "invert") return Command::invert;
  if (s == "simulate") return Command::simulate;
  if (s == "fstat-demo") return Command::fstat_demo;
  if (s == "diagnose") return Command::diagnose;
  throw InputError("unknown command '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <class T>
std::string fmt_int(T v) {
  return std::to_string(v);
}

template <class T, class F>
std::string join(const std::vector<T>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += f(v[i]);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& what, const std::string& v) {
  throw InputError(key + ": expected " + what + ", got '" + v + "'");
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const std::string t = trim(v);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) bad_value(key, "a number", v);
  return out;
}

template <class T>
T to_integer(const std::string& key, const std::string& v) {
  T out{};
  const std::string t = trim(v);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) bad_value(key, "an integer", v);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  bad_value(key, "true or false", v);
}

std::string one_of(const std::string& key, const std::string& v,
                   std::initializer_list<const char*> allowed) {
  for (const char* a : allowed)
    if (v == a) return v;
  std::string list;
  for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
  throw InputError(key + ": unknown value '" + v + "' (expected one of " + list + ")");
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    auto str = [&v](const char* key, std::string RunConfig::*m) {
      v.push_back({key, [m](const RunConfig& c) { return c.*m; },
                   [m](RunConfig& c, const std::string& s) { c.*m = trim(s); }});
    };
    auto num = [&v](const char* key, double RunConfig::*m) {
      v.push_back({key, [m](const RunConfig& c) { return fmt(c.*m); },
                   [m, key](RunConfig& c, const std::string& s) { c.*m = to_double(key, s); }});
    };
    auto idx = [&v](const char* key, Index RunConfig::*m) {
      v.push_back({key, [m](const RunConfig& c) { return fmt_int(c.*m); },
                   [m, key](RunConfig& c, const std::string& s) { c.*m = to_integer<Index>(key, s); }});
    };
    auto flag = [&v](const char* key, bool RunConfig::*m) {
      v.push_back({key, [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); },
                   [m, key](RunConfig& c, const std::string& s) { c.*m = to_bool(key, s); }});
    };
    auto nums = [&v](const char* key, std::vector<double> RunConfig::*m) {
      v.push_back({key, [m](const RunConfig& c) { return join(c.*m, fmt); },
                   [m, key](RunConfig& c, const std::string& s) {
                     (c.*m).clear();
                     for (const auto& item : split_list(s)) (c.*m).push_back(to_double(key, item));
                   }});
    };

    v.push_back({"command", [](const RunConfig& c) { return to_string(c.command); },
                 [](RunConfig& c, const std::string& s) { c.command = command_from_string(trim(s)); }});
    str("data", &RunConfig::data);
    str("schema", &RunConfig::schema);
    str("kind", &RunConfig::kind);
    nums("beta0", &RunConfig::beta0);
    num("grid_lo", &RunConfig::grid_lo);
    num("grid_hi", &RunConfig::grid_hi);
    idx("grid_points", &RunConfig::grid_points);
    num("alpha", &RunConfig::alpha);
    str("hat", &RunConfig::hat);
    num("dof_fraction", &RunConfig::dof_fraction);
    str("hat_path", &RunConfig::hat_path);
    str("rho", &RunConfig::rho);
    str("rho_path", &RunConfig::rho_path);
    str("basis", &RunConfig::basis);
    str("cv", &RunConfig::cv);
    v.push_back({"folds", [](const RunConfig& c) { return fmt_int(c.folds); },
                 [](RunConfig& c, const std::string& s) { c.folds = to_integer<int>("folds", s); }});
    idx("draws", &RunConfig::draws);
    str("tau_rule", &RunConfig::tau_rule);
    num("tau_level", &RunConfig::tau_level);
    num("tau_value", &RunConfig::tau_value);
    num("q", &RunConfig::q);
    str("mode", &RunConfig::mode);
    idx("n", &RunConfig::n);
    str("regime", &RunConfig::regime);
    num("rho1", &RunConfig::rho1);
    num("rho2", &RunConfig::rho2);
    str("strength", &RunConfig::strength);
    num("beta_true", &RunConfig::beta_true);
    idx("dx", &RunConfig::dx);
    str("errors", &RunConfig::errors);
    idx("reps", &RunConfig::reps);
    idx("first_rep", &RunConfig::first_rep);
    v.push_back({"tests", [](const RunConfig& c) { return join(c.tests, [](const std::string& s) { return s; }); },
                 [](RunConfig& c, const std::string& s) { c.tests = split_list(s); }});
    flag("oracle_rho", &RunConfig::oracle_rho);
    nums("offsets", &RunConfig::offsets);
    flag("calibrated", &RunConfig::calibrated);
    idx("null_reps", &RunConfig::null_reps);
    v.push_back({"counts", [](const RunConfig& c) { return join(c.counts, fmt_int<Index>); },
                 [](RunConfig& c, const std::string& s) {
                   c.counts.clear();
                   for (const auto& item : split_list(s)) c.counts.push_back(to_integer<Index>("counts", item));
                 }});
    v.push_back({"seed", [](const RunConfig& c) { return fmt_int(c.seed); },
                 [](RunConfig& c, const std::string& s) { c.seed = to_integer<std::uint64_t>("seed", s); }});
    return v;
  }();
  return f;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

std::string flag_name(const std::string& key) {
  std::string s = key;
  std::replace(s.begin(), s.end(), '_', '-');
  return "--" + s;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (!find_field(key)) throw InputError("unknown config key '" + key + "'");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

RunConfig parse_config(const std::vector<std::string>& args) {
  RunConfig config;
  if (const char* env = std::getenv("JKIV_SEED"))
    config.seed = to_integer<std::uint64_t>("JKIV_SEED", env);

  CLI::App app{"identification-robust IV tests", "jkiv"};
  app.set_help_flag();
  std::string command;
  std::string config_path;
  app.add_option("command", command);
  app.add_option("--config", config_path);
  app.add_option("--output", config.output);
  app.add_option("--threads", config.threads);
  std::map<std::string, std::string> given;
  std::map<std::string, bool> flags;
  for (const auto& f : fields()) {
    if (f.key == "command") continue;
    if (f.key == "oracle_rho" || f.key == "calibrated") {
      app.add_flag(flag_name(f.key), flags[f.key]);
    } else {
      app.add_option(flag_name(f.key), given[f.key]);
    }
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    throw InputError(e.what());
  }

  if (!config_path.empty())
    for (const auto& [key, value] : parse_config_text(read_file(config_path)))
      find_field(key)->set(config, value);

  for (const auto& f : fields()) {
    if (f.key == "command") continue;
    if (app.count(flag_name(f.key)) == 0) continue;
    if (flags.count(f.key)) {
      f.set(config, flags[f.key] ? "true" : "false");
    } else {
      f.set(config, given[f.key]);
    }
  }
  if (!command.empty()) {
    config.command = command_from_string(command);
  } else if (config_path.empty()) {
    throw InputError("command: missing (test, invert, simulate, fstat-demo or diagnose)");
  }
  validate(config);
  return config;
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(config));
  return out;
}

std::string serialize(const RunConfig& config) {
  std::string out;
  for (const auto& [key, value] : config_entries(config)) out += key + " = " + value + "\n";
  return out;
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw InputError(msg);
  };
  if (c.kind != "jk" && c.kind != "sup_score" && c.kind != "thresholding" &&
      c.kind != "anderson_rubin")
    throw InputError("kind: unknown test kind '" + c.kind + "'");
  const bool uses_data =
      c.command == Command::test || c.command == Command::invert || c.command == Command::diagnose;
  if (uses_data) {
    require(!c.data.empty(), "data: required for " + to_string(c.command));
    require(!c.schema.empty(), "schema: required for " + to_string(c.command));
  }
  if (c.command == Command::test || c.command == Command::diagnose)
    require(!c.beta0.empty(), "beta0: required for " + to_string(c.command));
  if (c.command == Command::invert) {
    require(c.grid_hi > c.grid_lo, "grid_lo/grid_hi: invert needs grid_lo < grid_hi");
    require(c.grid_points >= 2, "grid_points: must be at least 2");
  }

  require(c.alpha > 0.0 && c.alpha < 1.0, "alpha: must lie in (0, 1)");
  one_of("hat", c.hat, {"ridge", "projection", "custom"});
  require(c.dof_fraction > 0.0 && c.dof_fraction <= 1.0, "dof_fraction: must lie in (0, 1]");
  if (c.hat == "custom") require(!c.hat_path.empty(), "hat_path: required for hat = custom");
  one_of("rho", c.rho, {"lasso", "post_lasso", "known"});
  if (c.rho == "known") require(!c.rho_path.empty(), "rho_path: required for rho = known");
  one_of("basis", c.basis, {"instruments_plus_intercept", "instruments_only"});
  one_of("cv", c.cv, {"kfold", "loo"});
  require(c.folds >= 2, "folds: must be at least 2");
  require(c.draws >= 100, "draws: bootstrap quantiles need at least 100 draws");
  one_of("tau_rule", c.tau_rule, {"quantile", "fixed"});
  require(c.tau_level > 0.0 && c.tau_level < 1.0, "tau_level: must lie in (0, 1)");
  require(c.tau_value >= 0.0, "tau_value: must be non-negative");
  require(c.q >= 0.0 && c.q <= 100.0, "q: must lie in [0, 100]");

  one_of("mode", c.mode, {"size", "power"});
  require(c.n >= 20, "n: must be at least 20");
  regime_from_string(c.regime);
  strength_from_string(c.strength);
  error_dist_from_string(c.errors);
  require(c.dx == 1 || c.dx == 2, "dx: must be 1 or 2");
  require(c.reps >= 1, "reps: must be at least 1");
  require(c.first_rep >= 0, "first_rep: must be non-negative");
  require(!c.tests.empty(), "tests: at least one test is required");
  for (const auto& t : c.tests) {
    try {
      TestSpec::parse(t);
    } catch (const InputError& e) {
      throw InputError(std::string("tests: ") + e.what());
    }
  }
  require(c.null_reps >= 1, "null_reps: must be at least 1");
  if (c.command == Command::simulate && c.mode == "power")
    require(c.dx == 1, "dx: power curves need dx = 1");
  require(!c.counts.empty(), "counts: at least one selected count is required");
  for (Index k : c.counts) require(k >= 1 && k <= 65, "counts: must lie in [1, 65]");
  require(c.threads >= 0, "threads: must be non-negative");
}

}  // namespace jkiv
