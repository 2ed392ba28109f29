#include "jkiv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jkiv::kernels {

void fill_multipliers(Eigen::Ref<Vector> out, std::uint64_t seed, Stream label, Index draw) {
  Engine eng = make_engine(seed, label, static_cast<std::uint64_t>(draw));
  std::normal_distribution<double> normal;
  for (Index i = 0; i < out.size(); ++i) out(i) = normal(eng);
}

namespace {

Index block_count(Index draws) { return (draws + kDrawBlock - 1) / kDrawBlock; }

void fill_block(Matrix& E, std::uint64_t seed, Stream label, Index first, Index count) {
  for (Index k = 0; k < count; ++k) fill_multipliers(E.col(k), seed, label, first + k);
}

}  // namespace

Vector sup_score_draws(const Vector& eps, const Matrix& Z, Index draws, std::uint64_t seed) {
  const Index n = Z.rows();
  const Vector inv_norm = Z.colwise().norm().transpose().cwiseInverse();
  // Z_scaled' diag(eps): each draw is then one matrix-vector product.
  const Matrix A = (Z * inv_norm.asDiagonal()).transpose() * eps.asDiagonal();
  Vector out(draws);
  const Index blocks = block_count(draws);
#pragma omp parallel for schedule(static)
  for (Index blk = 0; blk < blocks; ++blk) {
    const Index first = blk * kDrawBlock;
    const Index count = std::min(kDrawBlock, draws - first);
    Matrix E(n, count);
    fill_block(E, seed, Stream::sup_score, first, count);
    const Matrix M = A * E;
    for (Index k = 0; k < count; ++k) out(first + k) = M.col(k).cwiseAbs().maxCoeff();
  }
  return out;
}

Vector sup_score_draws_serial(const Vector& eps, const Matrix& Z, Index draws,
                              std::uint64_t seed) {
  const Index n = Z.rows();
  const Index dz = Z.cols();
  std::vector<double> norms(static_cast<std::size_t>(dz));
  for (Index l = 0; l < dz; ++l) {
    double s = 0.0;
    for (Index i = 0; i < n; ++i) s += Z(i, l) * Z(i, l);
    norms[static_cast<std::size_t>(l)] = std::sqrt(s);
  }
  Vector e(n);
  Vector out(draws);
  for (Index b = 0; b < draws; ++b) {
    fill_multipliers(e, seed, Stream::sup_score, b);
    double best = 0.0;
    for (Index l = 0; l < dz; ++l) {
      double s = 0.0;
      for (Index i = 0; i < n; ++i) s += e(i) * eps(i) * Z(i, l);
      best = std::max(best, std::abs(s) / norms[static_cast<std::size_t>(l)]);
    }
    out(b) = best;
  }
  return out;
}

Vector conditioning_draws(const Matrix& H, const Matrix& r_hat, const Vector& row_norms,
                          Index draws, std::uint64_t seed) {
  const Index n = H.rows();
  const Index dx = r_hat.cols();
  Vector out(draws);
  const Index blocks = block_count(draws);
#pragma omp parallel for schedule(static)
  for (Index blk = 0; blk < blocks; ++blk) {
    const Index first = blk * kDrawBlock;
    const Index count = std::min(kDrawBlock, draws - first);
    Matrix E(n, count);
    fill_block(E, seed, Stream::conditioning, first, count);
    Vector best = Vector::Constant(count, std::numeric_limits<double>::infinity());
    Matrix W(n, count);
    Matrix P(n, count);
    for (Index l = 0; l < dx; ++l) {
      W = E.array().colwise() * r_hat.col(l).array();
      P.noalias() = H * W;
      for (Index k = 0; k < count; ++k) {
        double mx = 0.0;
        for (Index i = 0; i < n; ++i)
          if (row_norms(i) > 0.0) mx = std::max(mx, std::abs(P(i, k)) / row_norms(i));
        best(k) = std::min(best(k), mx);
      }
    }
    out.segment(first, count) = dx > 0 ? best : Vector::Zero(count);
  }
  return out;
}

Vector conditioning_draws_serial(const Matrix& H, const Matrix& r_hat, const Vector& row_norms,
                                 Index draws, std::uint64_t seed) {
  const Index n = H.rows();
  Vector e(n);
  Vector out(draws);
  for (Index b = 0; b < draws; ++b) {
    fill_multipliers(e, seed, Stream::conditioning, b);
    double best = std::numeric_limits<double>::infinity();
    for (Index l = 0; l < r_hat.cols(); ++l) {
      double mx = 0.0;
      for (Index i = 0; i < n; ++i) {
        if (!(row_norms(i) > 0.0)) continue;
        double s = 0.0;
        for (Index j = 0; j < n; ++j)
          if (j != i) s += H(i, j) * e(j) * r_hat(j, l);
        mx = std::max(mx, std::abs(s) / row_norms(i));
      }
      best = std::min(best, mx);
    }
    out(b) = r_hat.cols() ? best : 0.0;
  }
  return out;
}

double order_statistic_quantile(Vector draws, double level) {
  const Index B = draws.size();
  if (B == 0) throw InputError("quantile of an empty draw set");
  auto k = static_cast<Index>(std::ceil(level * static_cast<double>(B) - 1e-9));
  k = std::clamp<Index>(k, 1, B);
  std::nth_element(draws.data(), draws.data() + (k - 1), draws.data() + B);
  return draws(k - 1);
}

}  // namespace jkiv::kernels
