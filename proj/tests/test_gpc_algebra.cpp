#include <cmath>
#include <random>

#include "doctest.h"
#include "sgls/gpc_algebra.hpp"

using namespace sgls;

namespace {

std::shared_ptr<const GpcAlgebra> algebra(int L, int K) {
  return std::make_shared<const GpcAlgebra>(GpcBasis::build(L, K));
}

double max_abs(const GpcVector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("K = 1 closed forms") {
  const auto alg = algebra(1, 1);
  const GpcVector u = (GpcVector(2) << 1.5, -0.4).finished();
  GpcMatrix P(2, 2);
  P << 1.5, -0.4, -0.4, 1.5;
  CHECK(max_abs((alg->p_matrix(u) - P).reshaped()) < 1e-15);
  const GpcVector R = alg->second_moment(u);
  CHECK(R[0] == doctest::Approx(1.5 * 1.5 + 0.16));
  CHECK(R[1] == doctest::Approx(2 * 1.5 * -0.4));
  const GpcVector back = alg->r_inverse(R);
  CHECK(max_abs(back - u) < 1e-14);
}

TEST_CASE("unit and product") {
  const auto alg = algebra(2, 2);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-1, 1);
  GpcVector a(6), b(6);
  for (int i = 0; i < 6; ++i) a[i] = d(rng), b[i] = d(rng);
  CHECK(max_abs(alg->product(alg->unit(), a) - a) < 1e-14);
  CHECK(max_abs(alg->product(a, b) - alg->product(b, a)) < 1e-14);
  CHECK(max_abs(alg->second_moment(a) - alg->product(a, a)) < 1e-14);
  GpcMatrix buf;
  alg->p_matrix_into(a, buf);
  CHECK(max_abs((buf - alg->p_matrix(a)).reshaped()) == 0.0);
}

TEST_CASE("r_inverse of deterministic squares") {
  const auto alg = algebra(1, 3);
  GpcVector rho = alg->zero();
  rho[0] = 6.25;
  const GpcVector r = alg->r_inverse(rho);
  CHECK(r[0] == doctest::Approx(2.5));
  CHECK(max_abs(r.tail(3)) < 1e-14);
}

TEST_CASE("r_inverse round trip on SPD states") {
  for (auto [L, K] : {std::pair{1, 2}, std::pair{2, 2}, std::pair{1, 4}}) {
    const auto alg = algebra(L, K);
    std::mt19937_64 rng(7 + static_cast<unsigned>(K));
    std::uniform_real_distribution<double> d(-1, 1);
    for (int trial = 0; trial < 50; ++trial) {
      GpcVector a = alg->zero();
      a[0] = 1.0;
      for (Eigen::Index i = 1; i < a.size(); ++i) a[i] = 0.25 * d(rng) / static_cast<double>(a.size());
      REQUIRE(alg->certificate(a).positive);
      CHECK(max_abs(alg->r_inverse(alg->second_moment(a)) - a) < 1e-11);
    }
  }
}

TEST_CASE("r_inverse failures") {
  const auto alg = algebra(1, 1);
  GpcVector rho(2);
  rho << -1.0, 0.0;
  CHECK_THROWS_AS(alg->r_inverse(rho), Error);
  try {
    alg->r_inverse(rho);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IndefiniteRoot);
  }
  rho << 1.0, 1.5;  // rho0 < |rho1|: no real root
  bool threw = false;
  try {
    alg->r_inverse(rho);
  } catch (const Error& e) {
    threw = true;
    CHECK((e.kind() == ErrorKind::IndefiniteRoot || e.kind() == ErrorKind::NonConvergence));
  }
  CHECK(threw);
  CHECK_THROWS_AS(alg->r_inverse(GpcVector::Zero(3)), Error);
}

TEST_CASE("Galerkin norm of deterministic and K = 1 vectors") {
  const auto alg = algebra(1, 1);
  GpcVector a(2), b(2);
  a << 3.0, 0.0;
  b << 4.0, 0.0;
  const GpcVector comps[2] = {a, b};
  const GpcVector n = alg->norm(comps);
  CHECK(n[0] == doctest::Approx(5.0));
  CHECK(std::abs(n[1]) < 1e-14);
  a << -2.0, 0.5;
  const GpcVector one[1] = {a};
  const GpcVector n1 = alg->norm(one);
  CHECK(n1[0] == doctest::Approx(2.0));
  CHECK(n1[1] == doctest::Approx(-0.5));
}

TEST_CASE("norm floor lifts the mean") {
  const auto alg = algebra(1, 1);
  const GpcVector z[1] = {GpcVector::Zero(2)};
  CHECK_THROWS_AS(alg->norm(z), Error);
  const GpcVector n = alg->norm(z, 1e-8);
  CHECK(n[0] == doctest::Approx(1e-4));
}

TEST_CASE("positivity certificate") {
  const auto alg = algebra(1, 2);
  GpcVector u(3);
  u << 1.0, 0.2, 0.1;
  const SpdCertificate c = alg->certificate(u);
  CHECK(c.positive);
  CHECK(c.min_eigenvalue > 0.0);
  CHECK(c.min_node_value() > 0.0);
  u << 0.0, 1.0, 0.0;
  CHECK_FALSE(alg->certificate(u).positive);
  CHECK(alg->node_values(u).size() == static_cast<Eigen::Index>(alg->basis().quadrature().size()));
}

TEST_CASE("root objective: gradient R(alpha) - rho, Hessian 2 P(alpha)") {
  const auto alg = algebra(2, 2);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-0.2, 0.2);
  GpcVector a(6), rho(6);
  for (int i = 0; i < 6; ++i) a[i] = d(rng), rho[i] = d(rng);
  a[0] = 1.0;
  const GpcVector g = alg->second_moment(a) - rho;
  const double h = 1e-6;
  for (int i = 0; i < 6; ++i) {
    GpcVector e = GpcVector::Zero(6);
    e[i] = h;
    const double fd = (alg->root_objective(a + e, rho) - alg->root_objective(a - e, rho)) / (2 * h);
    CHECK(fd == doctest::Approx(g[i]).epsilon(1e-7));
  }
}

TEST_CASE("symmetric matrix functions") {
  GpcMatrix m(2, 2);
  m << 4.0, 0.0, 0.0, 9.0;
  CHECK(spd_sqrt(m).isApprox((GpcMatrix(2, 2) << 2.0, 0.0, 0.0, 3.0).finished(), 1e-15));
  CHECK(spd_inverse(m).isApprox((GpcMatrix(2, 2) << 0.25, 0.0, 0.0, 1.0 / 9.0).finished(), 1e-15));
  GpcMatrix s(2, 2);
  s << 2.0, 1.0, 1.0, 2.0;
  const GpcMatrix r = spd_inv_sqrt(s);
  CHECK((r * s * r).isApprox(GpcMatrix::Identity(2, 2), 1e-14));
  const SymmetricEigen e = symmetric_eigen(s);
  CHECK(e.values[0] == doctest::Approx(1.0));
  CHECK(e.values[1] == doctest::Approx(3.0));
  GpcMatrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  try {
    spd_inverse(bad);
    FAIL("expected NotSpd");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::NotSpd);
  }
}
