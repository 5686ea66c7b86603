#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sgls/common.hpp"

namespace sgls {

/// Orthonormal Legendre polynomial of degree k at xi, normalized for the
/// uniform density on [-1, 1] (so E[phi_k^2] = 1).
double legendre_eval(int k, double xi);

/// Values phi_0(xi) .. phi_kmax(xi) from a single recursion sweep.
std::vector<double> legendre_eval_all(int kmax, double xi);

using MultiIndex = std::vector<int>;

/// Total-degree index set {k in N_0^L : |k|_1 <= K} in graded
/// lexicographic order: by total degree, then lexicographically descending
/// so that (1,0) precedes (0,1). The zero index is always first.
class MultiIndexSet {
 public:
  MultiIndexSet(int dim, int degree);

  int dim() const noexcept { return dim_; }
  int degree() const noexcept { return degree_; }
  std::size_t size() const noexcept { return indices_.size(); }
  const MultiIndex& operator[](std::size_t i) const { return indices_[i]; }
  std::span<const MultiIndex> indices() const noexcept { return indices_; }
  int total_degree(std::size_t i) const;
  /// Position of `k` in the ordering, or -1.
  long find(const MultiIndex& k) const;

  static std::size_t cardinality(int dim, int degree);

 private:
  int dim_;
  int degree_;
  std::vector<MultiIndex> indices_;
};

/// Tensor quadrature rule against the uniform probability density on
/// [-1, 1]^L. Node q occupies column q of `nodes`.
struct QuadratureRule {
  Eigen::MatrixXd nodes;  // L x Q
  std::vector<double> weights;

  std::size_t size() const noexcept { return weights.size(); }
  int dim() const noexcept { return static_cast<int>(nodes.rows()); }
};

/// One-dimensional Gauss-Legendre rule with n nodes; weights sum to one.
QuadratureRule gauss_legendre(int n);

/// Tensor product of the n-point rule in each of `dim` directions.
QuadratureRule tensor_gauss_legendre(int dim, int n);

/// A univariate orthonormal polynomial family with its Gaussian rule.
class UnivariateFamily {
 public:
  virtual ~UnivariateFamily() = default;
  virtual std::string name() const = 0;
  virtual std::vector<double> eval_all(int kmax, double xi) const = 0;
  virtual QuadratureRule rule(int nodes) const = 0;
};

class LegendreFamily final : public UnivariateFamily {
 public:
  std::string name() const override { return "legendre"; }
  std::vector<double> eval_all(int kmax, double xi) const override {
    return legendre_eval_all(kmax, xi);
  }
  QuadratureRule rule(int nodes) const override { return gauss_legendre(nodes); }
};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Tensorized chaos basis: index set, quadrature, node evaluation table and
/// triple-product tensors M_k = (<phi_k, phi_i phi_j>)_{ij}. Immutable after
/// construction.
class GpcBasis {
 public:
  /// Smallest nodes-per-dimension for which triple products of total
  /// degree 3K are integrated exactly.
  static int min_nodes(int degree);
  static int default_nodes(int degree);

  static std::shared_ptr<const GpcBasis> build(int dim, int degree,
                                               std::optional<int> nodes_per_dim = {});
  static std::shared_ptr<const GpcBasis> build(std::shared_ptr<const UnivariateFamily> family,
                                               int dim, int degree,
                                               std::optional<int> nodes_per_dim = {});

  std::size_t size() const noexcept { return index_set_.size(); }
  int dim() const noexcept { return index_set_.dim(); }
  int degree() const noexcept { return index_set_.degree(); }
  int nodes_per_dim() const noexcept { return nodes_per_dim_; }
  const MultiIndexSet& index_set() const noexcept { return index_set_; }
  const QuadratureRule& quadrature() const noexcept { return quad_; }
  const UnivariateFamily& family() const noexcept { return *family_; }

  /// Row q holds phi_k(xi^(q)) for all k.
  const RowMajorMatrix& eval_table() const noexcept { return eval_table_; }
  const GpcMatrix& triple(std::size_t k) const { return triple_[k]; }

  double eval(std::size_t k, std::span<const double> xi) const;
  /// All basis functions at a point.
  GpcVector eval_all(std::span<const double> xi) const;
  /// Pi_K[c](xi) for coefficient vector c.
  double realization(const GpcVector& coeffs, std::span<const double> xi) const;

  /// Orthogonal projection of f by this basis' quadrature.
  template <class F>
  GpcVector project(F&& f) const {
    GpcVector c = GpcVector::Zero(static_cast<Eigen::Index>(size()));
    std::vector<double> xi(static_cast<std::size_t>(dim()));
    for (std::size_t q = 0; q < quad_.size(); ++q) {
      for (int d = 0; d < dim(); ++d) xi[static_cast<std::size_t>(d)] = quad_.nodes(d, static_cast<Eigen::Index>(q));
      const double fq = f(std::span<const double>(xi)) * quad_.weights[q];
      c += fq * eval_table_.row(static_cast<Eigen::Index>(q)).transpose();
    }
    return c;
  }

  /// Column text dump of the triple tensors: "i j k value" per nonzero.
  void dump_tensors(std::ostream& os) const;

  /// FNV-1a hash over the index ordering and tensor bytes.
  std::uint64_t fingerprint() const;

 private:
  GpcBasis(std::shared_ptr<const UnivariateFamily> family, int dim, int degree, int nodes);

  std::shared_ptr<const UnivariateFamily> family_;
  MultiIndexSet index_set_;
  int nodes_per_dim_;
  QuadratureRule quad_;
  RowMajorMatrix eval_table_;
  std::vector<GpcMatrix> triple_;
};

/// E[prod_j phi_j(xi)^{l_j}] for a map basis-index -> exponent, evaluated
/// with a Gauss rule refined until the integrand degree is exact.
double c_constant(const GpcBasis& basis, const std::map<std::size_t, int>& exponents);

}  // namespace sgls
