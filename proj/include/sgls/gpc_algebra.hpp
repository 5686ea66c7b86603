#pragma once

#include <memory>
#include <span>
#include <vector>

#include "sgls/common.hpp"
#include "sgls/gpc_basis.hpp"

namespace sgls {

/// Realizations of a truncated expansion at the quadrature nodes together
/// with the smallest eigenvalue of its Galerkin operator P(u).
struct SpdCertificate {
  double min_eigenvalue = 0.0;
  std::vector<double> node_values;
  double tolerance = 0.0;
  bool positive = false;

  double min_node_value() const;
};

struct RootOptions {
  double tolerance = 1e-12;  // relative residual
  int max_iterations = 100;
};

/// Intrusive arithmetic on coefficient vectors of one basis.
class GpcAlgebra {
 public:
  explicit GpcAlgebra(std::shared_ptr<const GpcBasis> basis);

  const GpcBasis& basis() const noexcept { return *basis_; }
  std::shared_ptr<const GpcBasis> basis_ptr() const noexcept { return basis_; }
  std::size_t size() const noexcept { return basis_->size(); }

  /// e_1 = (1, 0, ..., 0), the unit of the Galerkin product.
  GpcVector unit() const;
  GpcVector zero() const;

  /// P(u) = sum_k u_k M_k.
  GpcMatrix p_matrix(const GpcVector& u) const;
  void p_matrix_into(const GpcVector& u, GpcMatrix& out) const;

  /// u * q = P(u) q.
  GpcVector product(const GpcVector& u, const GpcVector& q) const;

  /// R(u) = P(u)^2 e_1 = u * u.
  GpcVector second_moment(const GpcVector& u) const;

  /// The unique alpha with R(alpha) = rho and P(alpha) positive definite,
  /// found by SPD-safeguarded damped Newton on the convex objective
  /// e_1^T P(alpha)^3 e_1 / 3 - alpha^T rho.
  GpcVector r_inverse(const GpcVector& rho, const RootOptions& opts = {}) const;

  /// Galerkin Euclidean norm R^{-1}(sum_i u_i * u_i). `floor`, when
  /// positive, is added to the mean of the summed second moments.
  GpcVector norm(std::span<const GpcVector> components, double floor = 0.0) const;

  SpdCertificate certificate(const GpcVector& u) const;

  /// Pi_K[u] at every quadrature node.
  Eigen::VectorXd node_values(const GpcVector& u) const;

  double positivity_tolerance(const GpcVector& u) const;

  /// Objective whose minimizer is R^{-1}(rho); its gradient is R(alpha) - rho
  /// and its Hessian 2 P(alpha).
  double root_objective(const GpcVector& alpha, const GpcVector& rho) const;

 private:
  void check_size(const GpcVector& u, const char* what) const;

  std::shared_ptr<const GpcBasis> basis_;
};

/// Symmetric eigendecomposition m = V diag(d) V^T with ascending d.
struct SymmetricEigen {
  Eigen::VectorXd values;
  GpcMatrix vectors;
};

SymmetricEigen symmetric_eigen(const GpcMatrix& m);

/// Tolerance for "strictly positive definite" used across the solver.
double spd_tolerance(const GpcMatrix& m);

GpcMatrix spd_sqrt(const GpcMatrix& m);
GpcMatrix spd_inverse(const GpcMatrix& m);
GpcMatrix spd_inv_sqrt(const GpcMatrix& m);

}  // namespace sgls
