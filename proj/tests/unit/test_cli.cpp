#include "helpers.hpp"

#include "jkiv/cli.hpp"
#include "jkiv/config.hpp"
#include "jkiv/serialize.hpp"
#include "jkiv/simulator.hpp"

#include <doctest.h>

#include <cstdlib>
#include <sstream>

using namespace jkiv;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

// Writes a strong-identification sample as data.csv + schema.cfg in dir.
void write_dataset(const fs::path& dir, Index n = 120) {
  SimulationSpec s;
  s.n = n;
  s.strength = Strength::strong;
  const SimulatedData sim = gen_dgp(s, 0);
  std::ostringstream csv;
  csv.precision(17);
  csv << "y,x";
  for (int k = 1; k <= 10; ++k) csv << ",z" << k;
  csv << ",dup\n";
  for (Index i = 0; i < n; ++i) {
    csv << sim.data.y(i) << "," << sim.data.X(i, 0);
    for (Index k = 0; k < 10; ++k) csv << "," << sim.data.Z(i, k);
    csv << "," << 2.0 * sim.data.Z(i, 0) << "\n";
  }
  write_text(dir / "data.csv", csv.str());
  write_text(dir / "schema.cfg",
             "outcome = y\nendogenous = x\ninstrument = z1, z2, z3, z4, z5, z6, z7, z8, z9, z10, dup\n");
}

int cli(const std::vector<std::string>& args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

std::string shell_quote(const std::string& s) { return "'" + s + "'"; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("parse: test command fills defaults") {
  const RunConfig c = parse_config(
      {"test", "--data", "d.csv", "--schema", "s.cfg", "--beta0", "1.0", "--kind", "jk"});
  CHECK(c.command == Command::test);
  CHECK(c.data == "d.csv");
  CHECK(c.beta0 == std::vector<double>{1.0});
  CHECK(c.alpha == 0.05);
  CHECK(c.hat == "ridge");
  CHECK(c.dof_fraction == 0.2);
  CHECK(c.draws == 1000);
  CHECK(c.grid_points == 300);
  CHECK(c.folds == 10);
  CHECK(c.tau_level == 0.75);
}

TEST_CASE("parse: command line overrides the config file") {
  const fs::path dir = temp_dir("cli_precedence");
  write_text(dir / "run.cfg", "# comment\ncommand = simulate\nalpha = 0.10\nreps = 7\n");
  const RunConfig a = parse_config({"--config", (dir / "run.cfg").string(), "--alpha", "0.05"});
  CHECK(a.alpha == 0.05);
  CHECK(a.reps == 7);
  CHECK(a.command == Command::simulate);
  const RunConfig b = parse_config({"--config", (dir / "run.cfg").string()});
  CHECK(b.alpha == 0.10);
}

TEST_CASE("parse: errors name the offending key") {
  auto message = [](const std::vector<std::string>& args) {
    try {
      parse_config(args);
    } catch (const InputError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message({"test", "--kind", "jkk"}).find("unknown test kind") != std::string::npos);
  CHECK(message({"simulate", "--reps", "ten"}).find("reps") != std::string::npos);
  CHECK(message({"test", "--beta0", "1"}).find("data") != std::string::npos);
  CHECK(message({"simulate", "--alpha", "1.5"}).find("alpha") != std::string::npos);
  CHECK(!message({"frobnicate"}).empty());
  CHECK(!message({}).empty());

  const fs::path dir = temp_dir("cli_unknown");
  write_text(dir / "bad.cfg", "command = simulate\nalpah = 0.1\n");
  CHECK(message({"--config", (dir / "bad.cfg").string()}).find("alpah") != std::string::npos);
  CHECK_THROWS_AS(parse_config_text("novalue\n"), InputError);
}

TEST_CASE("round trip: serialize then parse reproduces the configuration") {
  const fs::path dir = temp_dir("cli_roundtrip");
  std::vector<std::vector<std::string>> cases{
      {"simulate"},
      {"simulate", "--mode", "power", "--offsets", "-1,0,2.5", "--calibrated", "--tests",
       "jk,sup_score,thresholding_q0.3", "--regime", "dz65", "--seed", "99"},
      {"fstat-demo", "--counts", "1,2,3", "--n", "500"},
      {"invert", "--data", "a.csv", "--schema", "b.cfg", "--grid-lo", "-1", "--grid-hi", "0.5",
       "--kind", "thresholding", "--tau-rule", "fixed", "--tau-value", "0.3", "--cv", "loo"},
      {"test", "--data", "a.csv", "--schema", "b.cfg", "--beta0", "0.1,0.2", "--hat",
       "projection", "--rho", "post_lasso", "--alpha", "0.1"},
  };
  for (const auto& args : cases) {
    const RunConfig c = parse_config(args);
    write_text(dir / "c.cfg", serialize(c));
    const RunConfig back = parse_config({"--config", (dir / "c.cfg").string()});
    CHECK(back == c);
    CHECK(serialize(back) == serialize(c));
  }
}

TEST_CASE("JKIV_SEED sets the default seed") {
  setenv("JKIV_SEED", "4242", 1);
  CHECK(parse_config({"simulate"}).seed == 4242);
  CHECK(parse_config({"simulate", "--seed", "5"}).seed == 5);
  unsetenv("JKIV_SEED");
  CHECK(parse_config({"simulate"}).seed == 20240101);
}

TEST_CASE("execute: test, invert and diagnose on a synthetic dataset") {
  const fs::path dir = temp_dir("cli_data");
  write_dataset(dir);
  const std::string data = (dir / "data.csv").string();
  const std::string schema = (dir / "schema.cfg").string();

  std::string out;
  REQUIRE(cli({"test", "--data", data, "--schema", schema, "--beta0", "1", "--draws", "200"},
              &out) == 0);
  const Json j = Json::parse(out);
  CHECK(j["command"] == "test");
  CHECK(j["dropped_instruments"].size() == 1);
  CHECK(j["dropped_instruments"][0] == "dup");
  CHECK(j["result"]["test"] == "jk");

  const std::string output = (dir / "ci.json").string();
  REQUIRE(cli({"invert", "--data", data, "--schema", schema, "--grid-lo", "0", "--grid-hi", "2",
               "--grid-points", "21", "--draws", "200", "--output", output},
              &out) == 0);
  CHECK(out.find("confidence set") != std::string::npos);
  const Json ci = Json::parse(read_text(output));
  CHECK(ci["result"]["grid_points"] == 21);
  CHECK(fs::exists(dir / "ci.csv"));

  REQUIRE(cli({"diagnose", "--data", data, "--schema", schema, "--beta0", "1"}, &out) == 0);
  const Json d = Json::parse(out);
  CHECK(d["hat"]["kind"] == "ridge");
}

TEST_CASE("execute: exit codes") {
  const fs::path dir = temp_dir("cli_exit");
  write_dataset(dir);
  std::string err;
  CHECK(cli({"test", "--kind", "jkk"}, nullptr, &err) == 1);
  CHECK(err.find("unknown test kind") != std::string::npos);
  CHECK(cli({"test", "--data", (dir / "missing.csv").string(), "--schema",
             (dir / "schema.cfg").string(), "--beta0", "1"}) == 1);
  CHECK(cli({"test", "--data", (dir / "data.csv").string(), "--schema",
             (dir / "schema.cfg").string(), "--beta0", "1,2"}) == 1);

  // the installed binary maps errors the same way
  const std::string bin = JKIV_CLI_PATH;
  CHECK(std::system((shell_quote(bin) + " test --kind jkk 2>/dev/null").c_str()) != 0);
  CHECK(WEXITSTATUS(std::system((shell_quote(bin) + " test --kind jkk 2>/dev/null").c_str())) == 1);
  CHECK(std::system((shell_quote(bin) + " --help >/dev/null").c_str()) == 0);
}

TEST_CASE("simulate: ten replications to CSV") {
  const fs::path dir = temp_dir("cli_simulate");
  const std::string output = (dir / "size.json").string();
  REQUIRE(cli({"simulate", "--reps", "10", "--n", "60", "--draws", "100", "--tests",
               "jk,sup_score", "--output", output}) == 0);
  const std::string csv = read_text(dir / "size.csv");
  std::istringstream lines(csv);
  std::string header, row;
  std::getline(lines, header);
  CHECK(header.find("frequency") != std::string::npos);
  int rows = 0;
  while (std::getline(lines, row)) {
    ++rows;
    CHECK(row.find(",10,") != std::string::npos);
  }
  CHECK(rows == 2);
  const Json j = Json::parse(read_text(output));
  CHECK(j["seed"] == 20240101);
  CHECK(j["config"]["reps"] == "10");
}

TEST_CASE("replay: the embedded configuration reproduces the output") {
  const fs::path dir = temp_dir("cli_replay");
  const std::string first = (dir / "first.json").string();
  REQUIRE(cli({"simulate", "--reps", "6", "--n", "50", "--draws", "100", "--seed", "31",
               "--tests", "jk,thresholding", "--output", first}) == 0);
  const Json j = Json::parse(read_text(first));
  std::string cfg;
  for (const auto& [key, value] : j["config"].items()) cfg += key + " = " + value.get<std::string>() + "\n";
  write_text(dir / "replay.cfg", cfg);
  const std::string second = (dir / "second.json").string();
  REQUIRE(cli({"--config", (dir / "replay.cfg").string(), "--output", second}) == 0);
  CHECK(read_text(first) == read_text(second));
  CHECK(read_text(dir / "first.csv") == read_text(dir / "second.csv"));
}

TEST_CASE("thread count does not change the output") {
  const fs::path dir = temp_dir("cli_threads");
  std::vector<std::string> base{"simulate", "--reps", "8", "--n", "50", "--draws", "100",
                                "--mode", "power", "--offsets", "0,1", "--calibrated",
                                "--null-reps", "10", "--tests", "jk,sup_score"};
  std::vector<std::string> outputs;
  for (const char* t : {"1", "3", "8"}) {
    auto args = base;
    const std::string out = (dir / (std::string("t") + t + ".json")).string();
    args.insert(args.end(), {"--threads", t, "--output", out});
    REQUIRE(cli(args) == 0);
    outputs.push_back(read_text(out) + read_text(fs::path(out).replace_extension(".csv")));
  }
  CHECK(outputs[0] == outputs[1]);
  CHECK(outputs[0] == outputs[2]);
}

TEST_CASE("fstat demo through the command line") {
  std::string out;
  REQUIRE(cli({"fstat-demo", "--n", "100", "--reps", "3", "--counts", "1,65"}, &out) == 0);
  const Json j = Json::parse(out);
  CHECK(j["command"] == "fstat-demo");
  CHECK(j["result"]["selected"].size() == 2);
}

}  // TEST_SUITE
