#include "sgls/gpc_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sgls/simd/kernels.hpp"

namespace sgls {

double SpdCertificate::min_node_value() const {
  if (node_values.empty()) return std::numeric_limits<double>::quiet_NaN();
  return *std::min_element(node_values.begin(), node_values.end());
}

GpcAlgebra::GpcAlgebra(std::shared_ptr<const GpcBasis> basis) : basis_(std::move(basis)) {
  if (!basis_) throw Error(ErrorKind::InvalidArgument, "GpcAlgebra: null basis");
}

GpcVector GpcAlgebra::unit() const {
  GpcVector e = GpcVector::Zero(static_cast<Eigen::Index>(size()));
  e(0) = 1.0;
  return e;
}

GpcVector GpcAlgebra::zero() const { return GpcVector::Zero(static_cast<Eigen::Index>(size())); }

void GpcAlgebra::check_size(const GpcVector& u, const char* what) const {
  if (static_cast<std::size_t>(u.size()) != size())
    throw Error(ErrorKind::InvalidArgument, std::string(what) + ": coefficient length " +
                                                std::to_string(u.size()) + " does not match basis size " +
                                                std::to_string(size()));
}

void GpcAlgebra::p_matrix_into(const GpcVector& u, GpcMatrix& out) const {
  check_size(u, "p_matrix");
  const auto n = static_cast<Eigen::Index>(size());
  out.setZero(n, n);
  const auto& table = simd::kernels();
  const std::size_t len = static_cast<std::size_t>(n * n);
  for (std::size_t k = 0; k < size(); ++k) {
    const double c = u(static_cast<Eigen::Index>(k));
    if (c == 0.0) continue;
    table.axpy(c, basis_->triple(k).data(), out.data(), len);
  }
}

GpcMatrix GpcAlgebra::p_matrix(const GpcVector& u) const {
  GpcMatrix out;
  p_matrix_into(u, out);
  return out;
}

GpcVector GpcAlgebra::product(const GpcVector& u, const GpcVector& q) const {
  check_size(q, "galerkin_product");
  return p_matrix(u) * q;
}

GpcVector GpcAlgebra::second_moment(const GpcVector& u) const {
  // P(u)^2 e_1 = P(u) (P(u) e_1) = P(u) u, since column 0 of M_k is e_k.
  return product(u, u);
}

double GpcAlgebra::root_objective(const GpcVector& alpha, const GpcVector& rho) const {
  const GpcMatrix p = p_matrix(alpha);
  return alpha.dot(p * alpha) / 3.0 - alpha.dot(rho);
}

double GpcAlgebra::positivity_tolerance(const GpcVector& u) const {
  return 1e-10 * (1.0 + u.cwiseAbs().maxCoeff());
}

namespace {

double min_eigenvalue(const GpcMatrix& m) {
  if (m.rows() == 1) return m(0, 0);
  Eigen::SelfAdjointEigenSolver<GpcMatrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace

GpcVector GpcAlgebra::r_inverse(const GpcVector& rho, const RootOptions& opts) const {
  check_size(rho, "r_inverse");
  if (!rho.allFinite()) throw Error(ErrorKind::InvalidArgument, "r_inverse: non-finite input");
  const double scale = 1.0 + rho.cwiseAbs().maxCoeff();
  if (!(rho(0) > 0.0))
    throw Error(ErrorKind::IndefiniteRoot,
                "r_inverse: second moment has nonpositive mean " + std::to_string(rho(0)));

  if (size() == 1) {
    GpcVector alpha(1);
    alpha(0) = std::sqrt(rho(0));
    if (!(alpha(0) > positivity_tolerance(alpha)))
      throw Error(ErrorKind::IndefiniteRoot, "r_inverse: root below positivity tolerance");
    return alpha;
  }

  GpcVector alpha = GpcVector::Zero(rho.size());
  alpha(0) = std::sqrt(rho(0));

  GpcMatrix p;
  p_matrix_into(alpha, p);
  GpcVector residual = p * alpha - rho;
  double res_norm = residual.cwiseAbs().maxCoeff();
  bool boundary_hit = false;

  for (int it = 0; it < opts.max_iterations; ++it) {
    if (res_norm <= opts.tolerance * scale) break;

    Eigen::LLT<GpcMatrix> llt(p);
    if (llt.info() != Eigen::Success)
      throw Error(ErrorKind::IndefiniteRoot, "r_inverse: iterate left the positive definite cone");
    const GpcVector delta = -0.5 * llt.solve(residual);
    const double f0 = alpha.dot(p * alpha) / 3.0 - alpha.dot(rho);
    const double slope = residual.dot(delta);

    double step = 1.0;
    bool accepted = false;
    GpcMatrix p_next;
    while (step > 1e-12) {
      GpcVector candidate = alpha + step * delta;
      p_matrix_into(candidate, p_next);
      if (min_eigenvalue(p_next) > positivity_tolerance(candidate)) {
        const GpcVector r_next = p_next * candidate - rho;
        const double res_next = r_next.cwiseAbs().maxCoeff();
        const double f1 = candidate.dot(p_next * candidate) / 3.0 - candidate.dot(rho);
        if (f1 <= f0 + 1e-4 * step * slope || res_next < res_norm) {
          alpha = std::move(candidate);
          p.swap(p_next);
          residual = r_next;
          res_norm = res_next;
          accepted = true;
          break;
        }
      } else {
        boundary_hit = true;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (res_norm <= 1e-10 * scale) break;  // stagnated at rounding level
      if (boundary_hit)
        throw Error(ErrorKind::IndefiniteRoot,
                    "r_inverse: root lies on or beyond the boundary of the positive definite cone");
      throw Error(ErrorKind::NonConvergence, "r_inverse: line search failed");
    }
  }

  // Newton polish: the stopping test is relative, so a near-singular P(alpha)
  // can leave alpha well above rounding level.
  for (int extra = 0; extra < 3 && res_norm > 0.0; ++extra) {
    Eigen::LLT<GpcMatrix> llt(p);
    if (llt.info() != Eigen::Success) break;
    const GpcVector candidate = alpha - 0.5 * llt.solve(residual);
    GpcMatrix p_next;
    p_matrix_into(candidate, p_next);
    const GpcVector r_next = p_next * candidate - rho;
    const double res_next = r_next.cwiseAbs().maxCoeff();
    if (!(res_next < res_norm) || !(min_eigenvalue(p_next) > positivity_tolerance(candidate))) break;
    alpha = candidate;
    p.swap(p_next);
    residual = r_next;
    res_norm = res_next;
  }

  if (res_norm > 1e-10 * scale) {
    throw Error(boundary_hit ? ErrorKind::IndefiniteRoot : ErrorKind::NonConvergence,
                "r_inverse: residual " + std::to_string(res_norm) + " after " +
                    std::to_string(opts.max_iterations) + " iterations");
  }
  if (!(min_eigenvalue(p) > positivity_tolerance(alpha)))
    throw Error(ErrorKind::IndefiniteRoot, "r_inverse: converged root is not positive definite");
  return alpha;
}

GpcVector GpcAlgebra::norm(std::span<const GpcVector> components, double floor) const {
  if (components.empty()) throw Error(ErrorKind::InvalidArgument, "gpc_norm: no components");
  GpcVector rho = second_moment(components[0]);
  for (std::size_t i = 1; i < components.size(); ++i) rho += second_moment(components[i]);
  if (floor > 0.0) rho(0) += floor;
  return r_inverse(rho);
}

Eigen::VectorXd GpcAlgebra::node_values(const GpcVector& u) const {
  check_size(u, "node_values");
  const auto& table = basis_->eval_table();
  const auto& kern = simd::kernels();
  Eigen::VectorXd out(table.rows());
  for (Eigen::Index q = 0; q < table.rows(); ++q)
    out(q) = kern.dot(table.row(q).data(), u.data(), size());
  return out;
}

SpdCertificate GpcAlgebra::certificate(const GpcVector& u) const {
  SpdCertificate cert;
  const Eigen::VectorXd values = node_values(u);
  cert.node_values.assign(values.data(), values.data() + values.size());
  cert.min_eigenvalue = min_eigenvalue(p_matrix(u));
  cert.tolerance = positivity_tolerance(u);
  cert.positive = values.minCoeff() > cert.tolerance;
  return cert;
}

// ---------------------------------------------------------------------------

SymmetricEigen symmetric_eigen(const GpcMatrix& m) {
  Eigen::SelfAdjointEigenSolver<GpcMatrix> es(m);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::NonConvergence, "symmetric eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

double spd_tolerance(const GpcMatrix& m) { return 1e-10 * (1.0 + m.cwiseAbs().maxCoeff()); }

namespace {

GpcMatrix spd_function(const GpcMatrix& m, double (*fn)(double), const char* what) {
  if (m.rows() != m.cols()) throw Error(ErrorKind::InvalidArgument, std::string(what) + ": matrix not square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::NotSpd, std::string(what) + ": matrix not symmetric");
  const SymmetricEigen eig = symmetric_eigen(m);
  if (!(eig.values(0) > spd_tolerance(m)))
    throw Error(ErrorKind::NotSpd, std::string(what) + ": minimum eigenvalue " +
                                       std::to_string(eig.values(0)) + " not positive");
  const Eigen::VectorXd f = eig.values.unaryExpr(fn);
  return eig.vectors * f.asDiagonal() * eig.vectors.transpose();
}

}  // namespace

GpcMatrix spd_sqrt(const GpcMatrix& m) {
  return spd_function(m, [](double x) { return std::sqrt(x); }, "spd_sqrt");
}

GpcMatrix spd_inverse(const GpcMatrix& m) {
  return spd_function(m, [](double x) { return 1.0 / x; }, "spd_inverse");
}

GpcMatrix spd_inv_sqrt(const GpcMatrix& m) {
  return spd_function(m, [](double x) { return 1.0 / std::sqrt(x); }, "spd_inv_sqrt");
}

}  // namespace sgls
