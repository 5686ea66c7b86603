#pragma once

#include <optional>
#include <vector>

#include "sgls/common.hpp"
#include "sgls/gpc_algebra.hpp"

namespace sgls {

/// Coefficients of the gradient u = grad(phi): one block per space
/// dimension. `cached_norm` may carry a previously computed Galerkin norm.
struct GradState {
  GpcVector u1;
  std::optional<GpcVector> u2;
  std::optional<GpcVector> cached_norm;

  int dims() const noexcept { return u2 ? 2 : 1; }
  const GpcVector& component(int axis) const { return axis == 1 ? u1 : *u2; }
};

/// Unit direction (n1, n2); 1D states only use n1 = +-1.
class Direction {
 public:
  Direction(double n1, double n2);
  static Direction axis(int a) { return a == 1 ? Direction(1.0, 0.0) : Direction(0.0, 1.0); }
  double n1() const noexcept { return n1_; }
  double n2() const noexcept { return n2_; }
  Direction operator-() const { return Direction(-n1_, -n2_); }

 private:
  double n1_, n2_;
};

struct SpectrumReport {
  std::vector<double> eigenvalues;  // real parts, ascending
  std::vector<double> imaginary;    // imaginary parts aligned with eigenvalues
  double max_abs = 0.0;
  bool complete = true;
  bool hyperbolic = true;  // false: complex eigenvalues (NonHyperbolic)
  double eigenvector_condition = 1.0;
  GpcMatrix symmetric_similar;
};

/// Stacked flux: one GpcVector block per space dimension.
using StackedFlux = std::vector<GpcVector>;

/// Galerkin norm of u with norm failures reported as NotSpd. Honors
/// `cached_norm`.
GpcVector grad_norm(const GpcAlgebra& alg, const GradState& u, double floor = 0.0);

GpcVector hamiltonian(const GpcAlgebra& alg, const GradState& u, const GpcVector& v);

StackedFlux flux_conservative(const GpcAlgebra& alg, int axis, const GradState& u, const GpcVector& v);
StackedFlux flux_capacity(const GpcAlgebra& alg, int axis, const GradState& u);

/// [I (x) P(v) P(|u|)^{-1}] [n_a P(u_b)]_{ab}; size d|K| x d|K|.
GpcMatrix jacobian_conservative(const GpcAlgebra& alg, const GradState& u, const GpcVector& v,
                                const Direction& n);
GpcMatrix jacobian_capacity(const GpcAlgebra& alg, const GradState& u, const Direction& n);

/// Capacity-form spectrum through the symmetric similar matrix
/// P(|u|)^{-1/2} [n1 P(u1) + n2 P(u2)] P(|u|)^{-1/2}; in 2D |K| zeros are
/// appended.
SpectrumReport spectrum_capacity(const GpcAlgebra& alg, const GradState& u, const Direction& n);

/// Conservative-form spectrum. Deterministic velocities use the symmetric
/// route; random velocities need a general eigensolver and may report
/// complex eigenvalues through `hyperbolic = false`.
SpectrumReport spectrum_conservative(const GpcAlgebra& alg, const GradState& u, const GpcVector& v,
                                     const Direction& n);

/// Eigenvector matrix V and eigenvalues of the capacity Jacobian, built
/// from the symmetric route, so that J = V diag(values) V^{-1}.
struct Eigenbasis {
  GpcMatrix vectors;
  Eigen::VectorXd values;
};
Eigenbasis capacity_eigenbasis(const GpcAlgebra& alg, const GradState& u, const Direction& n);

struct VelocityDiagonalization {
  GpcMatrix vectors;        // orthogonal
  Eigen::VectorXd values;   // ascending
};

/// P(v) = V D V^T with ascending D; each column's first non-negligible
/// entry is positive.
VelocityDiagonalization diagonalize_velocity(const GpcAlgebra& alg, const GpcVector& v);

/// True if every mode but the mean is exactly zero.
bool is_deterministic(const GpcVector& v);

/// Smallest |eigenvalue| of P(v) must exceed this for P(v) to count as
/// invertible.
inline constexpr double kVelocityInvertibility = 1e-10;

}  // namespace sgls
