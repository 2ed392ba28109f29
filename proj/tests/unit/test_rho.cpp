#include "helpers.hpp"

#include "jkiv/rho.hpp"
#include "jkiv/serialize.hpp"

#include <doctest.h>

using namespace jkiv;
using namespace testutil;

namespace {

PartialledData make_data(Index n, Index dz, std::uint64_t seed) {
  PartialledData d;
  d.Z = randn(n, dz, seed);
  d.X = randn(n, 1, seed + 1) + d.Z.col(0);
  d.y = d.X.col(0) + randn(n, seed + 2);
  d.Z1.resize(n, 0);
  return d;
}

}  // namespace

TEST_SUITE("rho") {

TEST_CASE("null residuals") {
  Vector y(2);
  y << 1, 2;
  Matrix X = Matrix::Ones(2, 1);
  Vector b(1);
  b << 0.5;
  const Vector e = null_residuals(y, X, b);
  CHECK(e(0) == 0.5);
  CHECK(e(1) == 1.5);
  CHECK(null_residuals(y, X, Vector::Zero(1)) == y);
  CHECK(null_residuals(X * b, X, b).isZero(0.0));
  CHECK_THROWS_AS(null_residuals(y, X, Vector::Zero(2)), InputError);
}

TEST_CASE("basis evaluation") {
  const Matrix Z = randn(5, 2, 1);
  BasisSpec b;
  const Matrix B = b.evaluate(Z);
  CHECK(B.cols() == 3);
  CHECK(B.col(0).isOnes());
  CHECK(B.rightCols(2) == Z);
  b.kind = BasisKind::instruments_only;
  CHECK(b.evaluate(Z) == Z);
}

TEST_CASE("known rho of zero leaves X unchanged") {
  const PartialledData d = make_data(30, 3, 2);
  const Matrix zero = Matrix::Zero(30, 1);
  const RhoModel m =
      estimate_rho(d, Vector::Ones(1), {}, RhoMethod::known, {}, 0, &zero);
  CHECK(m.r_hat == d.X);
  CHECK(m.components.empty());
}

TEST_CASE("known rho is seed independent and requires values") {
  const PartialledData d = make_data(30, 3, 3);
  const Matrix rho = randn(30, 1, 4);
  const RhoModel a = estimate_rho(d, Vector::Ones(1), {}, RhoMethod::known, {}, 1, &rho);
  const RhoModel b = estimate_rho(d, Vector::Ones(1), {}, RhoMethod::known, {}, 999, &rho);
  CHECK(a.r_hat == b.r_hat);
  CHECK_THROWS_AS(estimate_rho(d, Vector::Ones(1), {}, RhoMethod::known, {}, 1, nullptr),
                  InputError);
}

TEST_CASE("zero null residuals give a zero design and phi") {
  PartialledData d = make_data(40, 3, 5);
  d.y = d.X * Vector::Constant(1, 2.0);
  const RhoModel m = estimate_rho(d, Vector::Constant(1, 2.0), {}, RhoMethod::lasso, {}, 7);
  REQUIRE(m.components.size() == 1);
  CHECK(m.components[0].phi.isZero(0.0));
  CHECK(m.components[0].support.empty());
  CHECK(m.r_hat == d.X);
}

TEST_CASE("constant slope recovered by the intercept basis") {
  // x = c * eps + u with homoskedastic Gaussian errors: rho(z) = c.
  const Index n = 4000;
  const double c = 0.6;
  PartialledData d;
  d.Z = randn(n, 2, 11);
  const Vector eps = randn(n, 12);
  d.X = (c * eps + randn(n, 13)).eval();
  d.y = d.X.col(0) + eps;  // beta = 1
  d.Z1.resize(n, 0);
  BasisSpec basis;
  basis.kind = BasisKind::custom;
  basis.custom = Matrix::Ones(n, 1);
  PenaltySelection pen;
  pen.fixed_lambda = 1e-6;
  const RhoModel m = estimate_rho(d, Vector::Ones(1), basis, RhoMethod::lasso, pen, 1);
  // Oracle: sample covariance ratio Cov(eps, x) / Var(eps), no centering as in the regression.
  const double oracle = eps.dot(d.X.col(0)) / eps.squaredNorm();
  const double se = 1.0 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(m.components[0].phi(0) - c) < 3.0 * se);
  CHECK(m.components[0].phi(0) == doctest::Approx(oracle).epsilon(1e-4));
}

TEST_CASE("rho model invariants: support and r_hat reconstruction") {
  const PartialledData d = make_data(120, 6, 20);
  for (RhoMethod method : {RhoMethod::lasso, RhoMethod::post_lasso}) {
    const Vector b0 = Vector::Constant(1, 0.5);
    const RhoModel m = estimate_rho(d, b0, {}, method, {}, 3);
    const Vector eps = null_residuals(d.y, d.X, b0);
    const Matrix B = BasisSpec{}.evaluate(d.Z);
    const auto& comp = m.components.at(0);
    CHECK(comp.support == support_of(comp.phi));
    CHECK((m.rho_values.col(0) - B * comp.phi).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((m.r_hat - partial_out_endogenous(d.X, eps, m.rho_values)).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK((m.r_hat.col(0) - (d.X.col(0) - m.rho_values.col(0).cwiseProduct(eps)))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
    CHECK(comp.lambda > 0.0);
  }
}

TEST_CASE("estimation is deterministic for a fixed seed") {
  const PartialledData d = make_data(80, 4, 30);
  const RhoModel a = estimate_rho(d, Vector::Zero(1), {}, RhoMethod::lasso, {}, 5);
  const RhoModel b = estimate_rho(d, Vector::Zero(1), {}, RhoMethod::lasso, {}, 5);
  CHECK(a.r_hat == b.r_hat);
  CHECK(a.components[0].lambda == b.components[0].lambda);
}

TEST_CASE("leave-one-out selection runs") {
  const PartialledData d = make_data(25, 2, 31);
  PenaltySelection pen;
  pen.folds = 0;
  const RhoModel m = estimate_rho(d, Vector::Zero(1), {}, RhoMethod::lasso, pen, 5);
  CHECK(m.components[0].lambda > 0.0);
}

TEST_CASE("rho model serializes coefficients, support and penalty") {
  const PartialledData d = make_data(60, 3, 32);
  const RhoModel m = estimate_rho(d, Vector::Zero(1), {}, RhoMethod::post_lasso, {}, 5);
  const Json j = to_json(m);
  CHECK(j["method"] == "post_lasso");
  CHECK(j["components"].size() == 1);
  CHECK(j["components"][0]["phi"].size() == 4);
  CHECK(j["components"][0]["lambda"].get<double>() == m.components[0].lambda);
}

}  // TEST_SUITE
