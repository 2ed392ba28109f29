#pragma once

#include "jkiv/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace jkiv {

/// Runs a resolved configuration. Writes the JSON result (and a CSV table
/// where one exists) next to config.output, or the JSON to `out` when no
/// output path is set; a short summary goes to `out` otherwise.
/// Throws InputError / NumericalError.
void execute(const RunConfig& config, std::ostream& out);

/// Parses and executes; returns 0 on success, 1 on input errors and 2 on
/// numerical failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace jkiv
