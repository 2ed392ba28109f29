#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace jkiv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Bad input: malformed files, invalid configuration, violated preconditions.
/// Mapped to exit code 1 by the CLI.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation that could not be completed (non-convergence, singular
/// systems). Mapped to exit code 2 by the CLI.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Error raised by the testing pipeline; carries the failing stage name.
template <class Base>
class StageError : public Base {
 public:
  StageError(std::string stage, const std::string& what)
      : Base(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Random streams ------------------------------------------------------------

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream labels. Each random quantity in the pipeline draws from an engine
/// seeded by a pure function of (master seed, label, index), so any parallel
/// schedule reproduces the serial result.
enum class Stream : std::uint64_t {
  sup_score = 1,
  conditioning = 2,
  cv_folds = 3,
  replication = 4,
  dgp = 5,
  null_run = 6,
};

constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream label,
                                    std::uint64_t index) noexcept {
  return mix64(mix64(seed ^ mix64(static_cast<std::uint64_t>(label))) + index);
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, Stream label, std::uint64_t index) {
  return Engine(derive_seed(seed, label, index));
}

}  // namespace jkiv
