#include "sgls/flux_jacobian.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>

namespace sgls {

Direction::Direction(double n1, double n2) : n1_(n1), n2_(n2) {
  if (std::abs(n1 * n1 + n2 * n2 - 1.0) > 1e-12)
    throw Error(ErrorKind::InvalidArgument, "Direction: vector is not of unit length");
}

bool is_deterministic(const GpcVector& v) {
  for (Eigen::Index k = 1; k < v.size(); ++k)
    if (v(k) != 0.0) return false;
  return true;
}

GpcVector grad_norm(const GpcAlgebra& alg, const GradState& u, double floor) {
  if (u.cached_norm) return *u.cached_norm;
  try {
    if (u.u2) {
      const GpcVector comps[2] = {u.u1, *u.u2};
      return alg.norm(comps, floor);
    }
    const GpcVector comps[1] = {u.u1};
    return alg.norm(comps, floor);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::IndefiniteRoot || e.kind() == ErrorKind::NonConvergence)
      throw Error(ErrorKind::NotSpd, std::string("Galerkin norm has no positive definite root: ") + e.what());
    throw;
  }
}

GpcVector hamiltonian(const GpcAlgebra& alg, const GradState& u, const GpcVector& v) {
  return alg.product(v, grad_norm(alg, u));
}

namespace {

StackedFlux place_on_axis(int axis, int dims, const GpcVector& value) {
  if (axis < 1 || axis > dims) throw Error(ErrorKind::InvalidArgument, "flux: axis out of range");
  StackedFlux f(static_cast<std::size_t>(dims), GpcVector::Zero(value.size()));
  f[static_cast<std::size_t>(axis - 1)] = value;
  return f;
}

GpcMatrix directional_operator(const GpcAlgebra& alg, const GradState& u, const Direction& n) {
  GpcMatrix s = n.n1() * alg.p_matrix(u.u1);
  if (u.u2) s += n.n2() * alg.p_matrix(*u.u2);
  return s;
}

void require_invertible_velocity(const GpcAlgebra& alg, const GpcVector& v) {
  const SymmetricEigen eig = symmetric_eigen(alg.p_matrix(v));
  if (eig.values.cwiseAbs().minCoeff() <= kVelocityInvertibility)
    throw Error(ErrorKind::SingularVelocityOperator, "P(v) is singular");
}

GpcMatrix stack_jacobian(const GpcAlgebra& alg, const GradState& u, const GpcMatrix& left,
                         const Direction& n) {
  const auto m = static_cast<Eigen::Index>(alg.size());
  const int d = u.dims();
  GpcMatrix jac(d * m, d * m);
  const double nn[2] = {n.n1(), n.n2()};
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      jac.block(a * m, b * m, m, m) = nn[a] * left * alg.p_matrix(u.component(b + 1));
  return jac;
}

void finish_report(SpectrumReport& r) {
  std::vector<std::size_t> order(r.eigenvalues.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return r.eigenvalues[a] < r.eigenvalues[b]; });
  std::vector<double> re, im;
  for (std::size_t i : order) {
    re.push_back(r.eigenvalues[i]);
    im.push_back(r.imaginary[i]);
  }
  r.eigenvalues = std::move(re);
  r.imaginary = std::move(im);
  r.max_abs = 0.0;
  for (std::size_t i = 0; i < r.eigenvalues.size(); ++i)
    r.max_abs = std::max(r.max_abs, std::hypot(r.eigenvalues[i], r.imaginary[i]));
}

}  // namespace

StackedFlux flux_conservative(const GpcAlgebra& alg, int axis, const GradState& u, const GpcVector& v) {
  return place_on_axis(axis, u.dims(), hamiltonian(alg, u, v));
}

StackedFlux flux_capacity(const GpcAlgebra& alg, int axis, const GradState& u) {
  return place_on_axis(axis, u.dims(), grad_norm(alg, u));
}

GpcMatrix jacobian_conservative(const GpcAlgebra& alg, const GradState& u, const GpcVector& v,
                                const Direction& n) {
  require_invertible_velocity(alg, v);
  const GpcMatrix norm_inv = spd_inverse(alg.p_matrix(grad_norm(alg, u)));
  return stack_jacobian(alg, u, alg.p_matrix(v) * norm_inv, n);
}

GpcMatrix jacobian_capacity(const GpcAlgebra& alg, const GradState& u, const Direction& n) {
  const GpcMatrix norm_inv = spd_inverse(alg.p_matrix(grad_norm(alg, u)));
  return stack_jacobian(alg, u, norm_inv, n);
}

SpectrumReport spectrum_capacity(const GpcAlgebra& alg, const GradState& u, const Direction& n) {
  const GpcMatrix b = spd_inv_sqrt(alg.p_matrix(grad_norm(alg, u)));
  GpcMatrix lam = b * directional_operator(alg, u, n) * b;
  lam = 0.5 * (lam + lam.transpose());
  const SymmetricEigen eig = symmetric_eigen(lam);

  SpectrumReport r;
  r.symmetric_similar = lam;
  r.eigenvalues.assign(eig.values.data(), eig.values.data() + eig.values.size());
  if (u.dims() == 2) r.eigenvalues.insert(r.eigenvalues.end(), alg.size(), 0.0);
  r.imaginary.assign(r.eigenvalues.size(), 0.0);
  r.complete = true;
  finish_report(r);
  return r;
}

SpectrumReport spectrum_conservative(const GpcAlgebra& alg, const GradState& u, const GpcVector& v,
                                     const Direction& n) {
  require_invertible_velocity(alg, v);
  SpectrumReport r;
  if (is_deterministic(v)) {
    SpectrumReport cap = spectrum_capacity(alg, u, n);
    for (double& e : cap.eigenvalues) e *= v(0);
    cap.symmetric_similar *= v(0);
    finish_report(cap);
    return cap;
  }

  const GpcMatrix pn = alg.p_matrix(grad_norm(alg, u));
  const GpcMatrix a_hat = alg.p_matrix(v) * spd_inverse(pn);
  const GpcMatrix lam = a_hat * directional_operator(alg, u, n);
  Eigen::EigenSolver<GpcMatrix> es(lam, true);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::NonConvergence, "spectrum_conservative: eigensolver failed");

  const Eigen::VectorXcd values = es.eigenvalues();
  const Eigen::MatrixXcd vectors = es.eigenvectors();
  const double scale = 1.0 + values.cwiseAbs().maxCoeff();
  r.symmetric_similar = lam;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    r.eigenvalues.push_back(values(i).real());
    r.imaginary.push_back(values(i).imag());
    if (std::abs(values(i).imag()) > 1e-10 * scale) r.hyperbolic = false;
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(vectors);
  const auto& sv = svd.singularValues();
  r.eigenvector_condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  r.complete = r.eigenvector_condition < 1e8;
  if (u.dims() == 2) {
    r.eigenvalues.insert(r.eigenvalues.end(), alg.size(), 0.0);
    r.imaginary.insert(r.imaginary.end(), alg.size(), 0.0);
  }
  finish_report(r);
  return r;
}

Eigenbasis capacity_eigenbasis(const GpcAlgebra& alg, const GradState& u, const Direction& n) {
  const auto m = static_cast<Eigen::Index>(alg.size());
  const GpcMatrix b = spd_inv_sqrt(alg.p_matrix(grad_norm(alg, u)));
  GpcMatrix lam = b * directional_operator(alg, u, n) * b;
  lam = 0.5 * (lam + lam.transpose());
  const SymmetricEigen eig = symmetric_eigen(lam);
  const GpcMatrix bq = b * eig.vectors;

  Eigenbasis out;
  if (u.dims() == 1) {
    out.vectors = bq;
    out.values = eig.values;
    return out;
  }
  // Zero eigenvalues: kernel of [P(u1) P(u2)].
  GpcMatrix row(m, 2 * m);
  row << alg.p_matrix(u.u1), alg.p_matrix(*u.u2);
  Eigen::JacobiSVD<GpcMatrix> svd(row, Eigen::ComputeFullV);
  out.vectors.resize(2 * m, 2 * m);
  out.vectors.leftCols(m) = svd.matrixV().rightCols(m);
  out.vectors.block(0, m, m, m) = n.n1() * bq;
  out.vectors.block(m, m, m, m) = n.n2() * bq;
  out.values.resize(2 * m);
  out.values.head(m).setZero();
  out.values.tail(m) = eig.values;
  return out;
}

VelocityDiagonalization diagonalize_velocity(const GpcAlgebra& alg, const GpcVector& v) {
  SymmetricEigen eig = symmetric_eigen(alg.p_matrix(v));
  for (Eigen::Index c = 0; c < eig.vectors.cols(); ++c) {
    for (Eigen::Index r = 0; r < eig.vectors.rows(); ++r) {
      if (std::abs(eig.vectors(r, c)) > 1e-12) {
        if (eig.vectors(r, c) < 0.0) eig.vectors.col(c) *= -1.0;
        break;
      }
    }
  }
  return {eig.vectors, eig.values};
}

}  // namespace sgls
