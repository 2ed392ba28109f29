#pragma once

#include "jkiv/common.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace jkiv {

enum class Command { test, invert, simulate, fstat_demo, diagnose };

std::string to_string(Command c);
Command command_from_string(const std::string& s);

/// Fully resolved run configuration. Enumerated fields hold validated names.
struct RunConfig {
  Command command = Command::test;

  // data
  std::string data;
  std::string schema;

  // test / invert / diagnose
  std::string kind = "jk";
  std::vector<double> beta0;
  double grid_lo = 0.0;
  double grid_hi = 0.0;
  Index grid_points = 300;
  double alpha = 0.05;
  std::string hat = "ridge";
  double dof_fraction = 0.2;
  std::string hat_path;
  std::string rho = "lasso";
  std::string rho_path;
  std::string basis = "instruments_plus_intercept";
  std::string cv = "kfold";
  int folds = 10;
  Index draws = 1000;
  std::string tau_rule = "quantile";
  double tau_level = 0.75;
  double tau_value = 0.0;
  double q = 25.0;

  // simulate
  std::string mode = "size";
  Index n = 200;
  std::string regime = "dz10";
  double rho1 = 0.2;
  double rho2 = 0.3;
  std::string strength = "weak";
  double beta_true = 1.0;
  Index dx = 1;
  std::string errors = "laplace";
  Index reps = 100;
  Index first_rep = 0;
  std::vector<std::string> tests{"jk"};
  bool oracle_rho = false;
  std::vector<double> offsets;
  bool calibrated = false;
  Index null_reps = 2000;

  // fstat-demo
  std::vector<Index> counts{1, 5, 10, 20, 40};

  std::uint64_t seed = 20240101;
  std::string output;
  int threads = 0;  // 0: OpenMP default

  bool operator==(const RunConfig&) const = default;
};

/// Keys of a config file, in serialization order. `output`, `threads` and
/// `config` are accepted on the command line only.
const std::vector<std::string>& config_keys();

/// Flat `key = value` lines; `#` starts a comment. Unknown keys are errors.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);

/// args excludes the program name. `--config FILE` values are applied first
/// and command-line flags override them. The default seed comes from
/// JKIV_SEED when set.
RunConfig parse_config(const std::vector<std::string>& args);

/// Canonical `key = value` text of every file key; parse_config on it
/// reproduces the configuration (output and threads aside).
std::string serialize(const RunConfig& config);

/// The same key/value pairs as serialize(), for embedding in results.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config);

/// Value checks beyond parsing (ranges, enumerations, command requirements).
void validate(const RunConfig& config);

}  // namespace jkiv
