#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "sgls/common.hpp"
#include "sgls/fv_solver.hpp"
#include "sgls/gpc_algebra.hpp"

namespace sgls {

/// Galerkin absolute value R^{-1}(phi * phi) with its positivity certificate.
struct AbsPhi {
  GpcVector coeffs;
  SpdCertificate certificate;
};

/// Throws IndefiniteRoot near the random interface.
AbsPhi abs_phi(const GpcAlgebra& alg, const GpcVector& phi);

/// E[q^m] for m = 0..m_max where q = sum_j a_j phi_j, via the multinomial
/// expansion over products of basis polynomials.
std::vector<double> moment_series(const GpcBasis& basis, const AbsPhi& abs, int m_max);
std::vector<double> moment_series(const GpcBasis& basis, const GpcVector& coeffs, int m_max);

enum class Surrogate { pointwise, galerkin };

struct CdfOptions {
  Surrogate surrogate = Surrogate::pointwise;
  int n_cdf = 256;  // grid points per dimension when L >= 2
};

/// P[lo <= p(xi) <= hi] for xi ~ U(-1,1), p the degree-K polynomial with
/// coefficients `coeffs` in a one-dimensional basis. Breakpoints come from
/// companion-matrix roots.
double interval_probability_1d(const GpcBasis& basis, const GpcVector& coeffs, double lo, double hi);

/// Probability that the |phi| surrogate is <= epsilon. Evaluators cache the
/// tensor grid used for L >= 2, so reuse one across cells.
class CdfEvaluator {
 public:
  CdfEvaluator(std::shared_ptr<const GpcAlgebra> algebra, CdfOptions opts = {});

  double operator()(const GpcVector& phi, double epsilon) const;
  /// Pointwise surrogate |Pi_K[phi](xi)|.
  double pointwise(const GpcVector& phi, double epsilon) const;
  /// Galerkin surrogate Pi_K[|phi|]; nullopt where abs_phi fails.
  std::optional<double> galerkin(const GpcVector& phi, double epsilon) const;
  /// |pointwise - galerkin| where both exist.
  std::optional<double> surrogate_discrepancy(const GpcVector& phi, double epsilon) const;

  const CdfOptions& options() const noexcept { return opts_; }

 private:
  double probability(const GpcVector& coeffs, double lo, double hi) const;

  std::shared_ptr<const GpcAlgebra> algebra_;
  CdfOptions opts_;
  Eigen::MatrixXd grid_table_;  // grid points x modes (L >= 2)
  Eigen::VectorXd grid_weights_;
};

double cdf_at(const GpcAlgebra& alg, const GpcVector& phi, double epsilon, const CdfOptions& opts = {});

struct QuantileBand {
  double epsilon = 0.0;
  double p = 1.0;
  double t = 0.0;
  std::vector<char> mask;
  std::vector<double> cdf;

  std::size_t count() const;
};

/// mask_c = (cdf_at(phi_c, epsilon) >= p).
QuantileBand perturbed_level_set(const CdfEvaluator& cdf, const CoeffField& phi, double epsilon, double p,
                                 double t = 0.0);

}  // namespace sgls
