#pragma once

#include "jkiv/config.hpp"
#include "jkiv/hat_matrix.hpp"
#include "jkiv/inference.hpp"
#include "jkiv/rho.hpp"
#include "jkiv/simulator.hpp"

#include <json.hpp>

#include <string>

namespace jkiv {

using Json = nlohmann::ordered_json;

Json to_json(const TestResult& r);
Json to_json(const ConfidenceSet& cs);
Json to_json(const SizeTable& t);
Json to_json(const PowerTable& t);
Json to_json(const FStatTable& t);
Json to_json(const DesignDiagnostics& d);
Json to_json(const RunConfig& c);
/// Coefficients, support and penalty per endogenous variable.
Json to_json(const RhoModel& m);

/// Columns: grid, accepted, statistic, critical_value.
std::string to_csv(const ConfidenceSet& cs);
/// One row per test: design fields, test, rejections, reps, frequency, mc_se.
std::string to_csv(const SizeTable& t);
/// One row per (offset, test).
std::string to_csv(const PowerTable& t);
/// One row per selected count plus a `true` row.
std::string to_csv(const FStatTable& t);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

}  // namespace jkiv
