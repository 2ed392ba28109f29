#pragma once

// Multiplier-bootstrap kernels. Each draw b uses standard-normal multipliers
// from the stream (seed, label, b), so the parallel kernels return exactly the
// same draws for any thread count. The *_serial variants are straightforward
// loop implementations kept as references for tests and benchmarks.

#include "jkiv/common.hpp"

#include <cstdint>

namespace jkiv::kernels {

/// Draws processed together as one matrix product.
inline constexpr Index kDrawBlock = 32;

void fill_multipliers(Eigen::Ref<Vector> out, std::uint64_t seed, Stream label, Index draw);

/// S^(b) = max_l |sum_i e_i eps_i z_li| / ||z_l||, b = 0..draws-1.
Vector sup_score_draws(const Vector& eps, const Matrix& Z, Index draws, std::uint64_t seed);
Vector sup_score_draws_serial(const Vector& eps, const Matrix& Z, Index draws,
                              std::uint64_t seed);

/// C^(b) = min_l max_{i: norm_i > 0} |sum_j h_ij e_j r_lj| / norm_i.
Vector conditioning_draws(const Matrix& H, const Matrix& r_hat, const Vector& row_norms,
                          Index draws, std::uint64_t seed);
Vector conditioning_draws_serial(const Matrix& H, const Matrix& r_hat, const Vector& row_norms,
                                 Index draws, std::uint64_t seed);

/// Value of the ceil(level * B)-th order statistic (1-based) of `draws`.
double order_statistic_quantile(Vector draws, double level);

}  // namespace jkiv::kernels
