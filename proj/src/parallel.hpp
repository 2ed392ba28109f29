#pragma once

#include "jkiv/common.hpp"

#include <exception>
#include <string>
#include <vector>

namespace jkiv::detail {

// Runs fn(0..count-1) across OpenMP threads. Errors are collected per item and
// the one with the lowest index is rethrown, tagged with `what` and the index,
// so failures do not depend on the schedule either.
template <class Fn>
void parallel_for(Index count, const std::string& what, Fn&& fn) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(dynamic)
  for (Index i = 0; i < count; ++i) {
    try {
      fn(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (Index i = 0; i < count; ++i) {
    const auto& e = errors[static_cast<std::size_t>(i)];
    if (!e) continue;
    const std::string tag = what + " " + std::to_string(i) + ": ";
    try {
      std::rethrow_exception(e);
    } catch (const InputError& err) {
      throw InputError(tag + err.what());
    } catch (const NumericalError& err) {
      throw NumericalError(tag + err.what());
    }
  }
}

}  // namespace jkiv::detail
