#include <cmath>
#include <sstream>

#include "doctest.h"
#include "sgls/gpc_basis.hpp"

using namespace sgls;

TEST_CASE("orthonormal Legendre values") {
  CHECK(legendre_eval(0, 0.3) == doctest::Approx(1.0));
  CHECK(legendre_eval(1, 0.5) == doctest::Approx(std::sqrt(3.0) * 0.5));
  CHECK(legendre_eval(2, 0.5) == doctest::Approx(std::sqrt(5.0) / 2.0 * (3 * 0.25 - 1)));
  const double x = -0.7;
  CHECK(legendre_eval(3, x) == doctest::Approx(std::sqrt(7.0) / 2.0 * (5 * x * x * x - 3 * x)));
  const auto all = legendre_eval_all(4, x);
  REQUIRE(all.size() == 5);
  for (int k = 0; k <= 4; ++k) CHECK(all[static_cast<std::size_t>(k)] == doctest::Approx(legendre_eval(k, x)));
}

TEST_CASE("Gauss-Legendre rule normalized to the uniform density") {
  const QuadratureRule r = gauss_legendre(3);
  REQUIRE(r.size() == 3);
  const double a = std::sqrt(0.6);
  CHECK(r.nodes(0, 0) == doctest::Approx(-a));
  CHECK(r.nodes(0, 1) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r.nodes(0, 2) == doctest::Approx(a));
  CHECK(r.weights[0] == doctest::Approx(5.0 / 18.0));
  CHECK(r.weights[1] == doctest::Approx(8.0 / 18.0));
  double s = 0.0;
  for (double w : tensor_gauss_legendre(3, 4).weights) s += w;
  CHECK(s == doctest::Approx(1.0));
  // exact for degree 2n-1: E[xi^6] = 1/7 with n = 4
  const QuadratureRule r4 = gauss_legendre(4);
  double m6 = 0.0;
  for (std::size_t q = 0; q < r4.size(); ++q) m6 += r4.weights[q] * std::pow(r4.nodes(0, static_cast<Eigen::Index>(q)), 6);
  CHECK(m6 == doctest::Approx(1.0 / 7.0).epsilon(1e-14));
}

TEST_CASE("total-degree index set: size and ordering") {
  CHECK(MultiIndexSet::cardinality(1, 3) == 4);
  CHECK(MultiIndexSet::cardinality(2, 2) == 6);
  CHECK(MultiIndexSet::cardinality(3, 2) == 10);
  MultiIndexSet s(2, 2);
  REQUIRE(s.size() == 6);
  CHECK(s[0] == MultiIndex{0, 0});
  CHECK(s[1] == MultiIndex{1, 0});
  CHECK(s[2] == MultiIndex{0, 1});
  CHECK(s[3] == MultiIndex{2, 0});
  CHECK(s[4] == MultiIndex{1, 1});
  CHECK(s[5] == MultiIndex{0, 2});
  CHECK(s.find({1, 1}) == 4);
  CHECK(s.find({2, 1}) == -1);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s.total_degree(i - 1) <= s.total_degree(i));
}

TEST_CASE("basis is orthonormal under its quadrature") {
  for (auto [L, K] : {std::pair{1, 4}, std::pair{2, 3}, std::pair{3, 2}}) {
    const auto b = GpcBasis::build(L, K);
    const auto& T = b->eval_table();
    const auto& w = b->quadrature().weights;
    for (std::size_t i = 0; i < b->size(); ++i)
      for (std::size_t j = 0; j < b->size(); ++j) {
        double s = 0.0;
        for (std::size_t q = 0; q < w.size(); ++q)
          s += w[q] * T(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(i)) * T(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(j));
        CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-13).scale(1.0));
      }
  }
}

TEST_CASE("triple tensors: known entries and symmetry") {
  const auto b = GpcBasis::build(1, 2);
  CHECK(b->triple(0).isApprox(GpcMatrix::Identity(3, 3), 1e-14));
  CHECK(b->triple(2)(1, 1) == doctest::Approx(2.0 / std::sqrt(5.0)));
  CHECK(b->triple(1)(0, 1) == doctest::Approx(1.0));
  // <phi_k, phi_i phi_j> fully symmetric in (i, j, k)
  const auto b2 = GpcBasis::build(2, 3);
  const std::size_t n = b2->size();
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double v = b2->triple(k)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        CHECK(v == doctest::Approx(b2->triple(i)(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j))).epsilon(1e-12).scale(1.0));
        CHECK(v == doctest::Approx(b2->triple(j)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))).epsilon(1e-12).scale(1.0));
      }
}

TEST_CASE("triple tensors match a brute-force dense quadrature") {
  const auto b = GpcBasis::build(2, 2);
  const auto ref = tensor_gauss_legendre(2, 12);
  const std::size_t n = b->size();
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t q = 0; q < ref.size(); ++q) {
          const double xi[2] = {ref.nodes(0, static_cast<Eigen::Index>(q)), ref.nodes(1, static_cast<Eigen::Index>(q))};
          s += ref.weights[q] * b->eval(k, xi) * b->eval(i, xi) * b->eval(j, xi);
        }
        CHECK(b->triple(k)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == doctest::Approx(s).epsilon(1e-12).scale(1.0));
      }
}

TEST_CASE("node count below exactness is rejected") {
  CHECK(GpcBasis::min_nodes(2) >= 4);
  CHECK_THROWS_AS(GpcBasis::build(1, 2, GpcBasis::min_nodes(2) - 1), Error);
  CHECK_NOTHROW(GpcBasis::build(1, 2, GpcBasis::min_nodes(2) + 3));
}

TEST_CASE("projection of xi^2") {
  const auto b = GpcBasis::build(1, 3);
  const GpcVector c = b->project([](std::span<const double> xi) { return xi[0] * xi[0]; });
  CHECK(c[0] == doctest::Approx(1.0 / 3.0));
  CHECK(std::abs(c[1]) < 1e-15);
  CHECK(c[2] == doctest::Approx(2.0 / (3.0 * std::sqrt(5.0))));
  CHECK(std::abs(c[3]) < 1e-15);
  const double xi[1] = {0.37};
  CHECK(b->realization(c, xi) == doctest::Approx(0.37 * 0.37));
}

TEST_CASE("c_constant moments") {
  const auto b = GpcBasis::build(1, 2);
  CHECK(c_constant(*b, {{1, 2}}) == doctest::Approx(1.0));
  CHECK(c_constant(*b, {{1, 4}}) == doctest::Approx(1.8));
  CHECK(c_constant(*b, {{1, 2}, {2, 1}}) == doctest::Approx(2.0 / std::sqrt(5.0)));
  CHECK(c_constant(*b, {{1, 3}}) == doctest::Approx(0.0));
}

TEST_CASE("fingerprint and tensor dump are reproducible") {
  const auto a = GpcBasis::build(2, 2);
  const auto b = GpcBasis::build(2, 2);
  CHECK(a->fingerprint() == b->fingerprint());
  CHECK(a->fingerprint() != GpcBasis::build(2, 3)->fingerprint());
  std::ostringstream x, y;
  a->dump_tensors(x);
  b->dump_tensors(y);
  CHECK(x.str() == y.str());
  CHECK(x.str().find("0 0 0 1") != std::string::npos);
}

TEST_CASE("invalid dimensions are rejected") {
  CHECK_THROWS_AS(GpcBasis::build(0, 2), Error);
  CHECK_THROWS_AS(GpcBasis::build(1, -1), Error);
}
