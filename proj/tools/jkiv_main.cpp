#include "jkiv/cli.hpp"

#include <iostream>
#include <string>
#include <vector>

namespace {

const char* kUsage = R"(usage: jkiv <command> [--config FILE] [--key value ...]

commands:
  test        run one test at --beta0 on --data/--schema
  invert      confidence set over --grid-lo/--grid-hi/--grid-points
  diagnose    hat-matrix balance diagnostics at --beta0
  simulate    size table (--mode size) or power curve (--mode power)
  fstat-demo  post-selection first-stage F statistics

Every config-file key `some_key` is also the flag --some-key. Results go to
--output as JSON, with a CSV table beside it where one exists. The default
seed is read from JKIV_SEED when set. --threads sets the worker count.
)";

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  for (const auto& a : args)
    if (a == "-h" || a == "--help") {
      std::cout << kUsage;
      return 0;
    }
  return jkiv::run_cli(args, std::cout, std::cerr);
}
