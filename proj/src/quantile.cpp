#include "sgls/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace sgls {

AbsPhi abs_phi(const GpcAlgebra& alg, const GpcVector& phi) {
  AbsPhi out;
  out.coeffs = alg.r_inverse(alg.second_moment(phi));
  out.certificate = alg.certificate(out.coeffs);
  if (!out.certificate.positive)
    throw Error(ErrorKind::IndefiniteRoot, "abs_phi: root has nonpositive node realizations (min " +
                                               std::to_string(out.certificate.min_node_value()) + ")");
  return out;
}

std::vector<double> moment_series(const GpcBasis& basis, const AbsPhi& abs, int m_max) {
  return moment_series(basis, abs.coeffs, m_max);
}

std::vector<double> moment_series(const GpcBasis& basis, const GpcVector& coeffs, int m_max) {
  if (m_max < 0) throw Error(ErrorKind::InvalidArgument, "moment_series: m_max must be nonnegative");
  const std::size_t n = basis.size();
  if (static_cast<std::size_t>(coeffs.size()) != n)
    throw Error(ErrorKind::InvalidArgument, "moment_series: coefficient length does not match basis");

  // One rule exact for every product of m_max basis polynomials.
  const int nodes = m_max * basis.degree() / 2 + 1;
  const QuadratureRule rule = tensor_gauss_legendre(basis.dim(), nodes);
  Eigen::MatrixXd table(static_cast<Eigen::Index>(rule.size()), static_cast<Eigen::Index>(n));
  std::vector<double> xi(static_cast<std::size_t>(basis.dim()));
  for (std::size_t q = 0; q < rule.size(); ++q) {
    for (int d = 0; d < basis.dim(); ++d) xi[static_cast<std::size_t>(d)] = rule.nodes(d, static_cast<Eigen::Index>(q));
    table.row(static_cast<Eigen::Index>(q)) = basis.eval_all(xi).transpose();
  }

  // c_l = E[prod_j phi_j^{l_j}] on the shared rule.
  auto c_l = [&](const std::vector<int>& l) {
    double sum = 0.0;
    for (Eigen::Index q = 0; q < table.rows(); ++q) {
      double prod = rule.weights[static_cast<std::size_t>(q)];
      for (std::size_t j = 0; j < n; ++j)
        if (l[j]) prod *= std::pow(table(q, static_cast<Eigen::Index>(j)), l[j]);
      sum += prod;
    }
    return sum;
  };

  std::vector<double> out(static_cast<std::size_t>(m_max) + 1, 0.0);
  out[0] = 1.0;
  std::vector<int> l(n, 0);
  for (int m = 1; m <= m_max; ++m) {
    const double m_fact = std::tgamma(m + 1.0);
    double total = 0.0;
    // Enumerate compositions of m into n nonnegative parts.
    std::function<void(std::size_t, int)> rec = [&](std::size_t j, int left) {
      if (j + 1 == n) {
        l[j] = left;
        double coef = m_fact;
        double mono = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
          coef /= std::tgamma(l[i] + 1.0);
          if (l[i]) mono *= std::pow(coeffs(static_cast<Eigen::Index>(i)), l[i]);
        }
        if (mono != 0.0) total += coef * mono * c_l(l);
        return;
      }
      for (int v = left; v >= 0; --v) {
        l[j] = v;
        rec(j + 1, left - v);
      }
    };
    rec(0, m);
    out[static_cast<std::size_t>(m)] = total;
  }
  return out;
}

namespace {

/// Monomial coefficients of a one-dimensional expansion via interpolation
/// at Chebyshev points.
Eigen::VectorXd to_monomial(const GpcBasis& basis, const GpcVector& coeffs) {
  const int k = basis.degree();
  const int n = k + 1;
  Eigen::MatrixXd v(n, n);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double x = std::cos(M_PI * (i + 0.5) / n);
    double pw = 1.0;
    for (int j = 0; j < n; ++j, pw *= x) v(i, j) = pw;
    const double xi[1] = {x};
    y(i) = basis.realization(coeffs, xi);
  }
  return v.colPivHouseholderQr().solve(y);
}

double horner(const Eigen::VectorXd& c, double x) {
  double r = 0.0;
  for (Eigen::Index i = c.size() - 1; i >= 0; --i) r = r * x + c(i);
  return r;
}

double horner_derivative(const Eigen::VectorXd& c, double x) {
  double r = 0.0;
  for (Eigen::Index i = c.size() - 1; i >= 1; --i) r = r * x + static_cast<double>(i) * c(i);
  return r;
}

/// Real roots of c(x) in [-1, 1], including near-real ones (harmless: each
/// is only a candidate breakpoint).
void roots_in_unit_interval(Eigen::VectorXd c, std::vector<double>& out) {
  const double scale = c.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  Eigen::Index deg = c.size() - 1;
  while (deg > 0 && std::abs(c(deg)) <= 1e-13 * scale) --deg;
  if (deg == 0) return;
  c.conservativeResize(deg + 1);

  std::vector<double> cand;
  if (deg == 1) {
    cand.push_back(-c(0) / c(1));
  } else {
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
    for (Eigen::Index i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    for (Eigen::Index i = 0; i < deg; ++i) comp(i, deg - 1) = -c(i) / c(deg);
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    const Eigen::VectorXcd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (std::abs(ev(i).imag()) <= 1e-6 * (1.0 + std::abs(ev(i).real()))) cand.push_back(ev(i).real());
  }
  for (double r : cand) {
    if (r < -1.0 - 1e-6 || r > 1.0 + 1e-6) continue;
    // Newton polish; keep the better of the two points.
    double x = r;
    for (int it = 0; it < 4; ++it) {
      const double d = horner_derivative(c, x);
      if (d == 0.0) break;
      const double nx = x - horner(c, x) / d;
      if (!std::isfinite(nx) || std::abs(horner(c, nx)) >= std::abs(horner(c, x))) break;
      x = nx;
    }
    out.push_back(std::clamp(x, -1.0, 1.0));
  }
}

}  // namespace

double interval_probability_1d(const GpcBasis& basis, const GpcVector& coeffs, double lo, double hi) {
  if (basis.dim() != 1) throw Error(ErrorKind::InvalidArgument, "interval_probability_1d: basis must be one-dimensional");
  if (lo > hi) return 0.0;
  const Eigen::VectorXd c = to_monomial(basis, coeffs);
  std::vector<double> br{-1.0, 1.0};
  for (double level : {lo, hi}) {
    if (!std::isfinite(level)) continue;
    Eigen::VectorXd shifted = c;
    shifted(0) -= level;
    roots_in_unit_interval(shifted, br);
  }
  std::sort(br.begin(), br.end());
  double measure = 0.0;
  for (std::size_t i = 0; i + 1 < br.size(); ++i) {
    const double a = br[i], b = br[i + 1];
    if (b <= a) continue;
    const double mid = 0.5 * (a + b);
    const double xi[1] = {mid};
    const double val = basis.realization(coeffs, xi);
    if (val >= lo && val <= hi) measure += b - a;
  }
  return std::clamp(measure / 2.0, 0.0, 1.0);
}

CdfEvaluator::CdfEvaluator(std::shared_ptr<const GpcAlgebra> algebra, CdfOptions opts)
    : algebra_(std::move(algebra)), opts_(opts) {
  if (!algebra_) throw Error(ErrorKind::InvalidArgument, "CdfEvaluator: null algebra");
  const GpcBasis& basis = algebra_->basis();
  if (basis.dim() == 1) return;
  if (opts_.n_cdf < 2) throw Error(ErrorKind::InvalidArgument, "CdfEvaluator: N_cdf must be >= 2");
  const int L = basis.dim();
  const auto n = static_cast<std::size_t>(opts_.n_cdf);
  std::size_t total = 1;
  for (int d = 0; d < L; ++d) total *= n;
  grid_table_.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(basis.size()));
  grid_weights_.resize(static_cast<Eigen::Index>(total));
  const double h = 2.0 / static_cast<double>(n - 1);
  std::vector<double> xi(static_cast<std::size_t>(L));
  for (std::size_t q = 0; q < total; ++q) {
    std::size_t rem = q;
    double w = 1.0;
    for (int d = L - 1; d >= 0; --d) {
      const std::size_t i = rem % n;
      rem /= n;
      xi[static_cast<std::size_t>(d)] = -1.0 + h * static_cast<double>(i);
      w *= (i == 0 || i == n - 1 ? 0.5 : 1.0) * h / 2.0;
    }
    grid_table_.row(static_cast<Eigen::Index>(q)) = basis.eval_all(xi).transpose();
    grid_weights_(static_cast<Eigen::Index>(q)) = w;
  }
}

double CdfEvaluator::probability(const GpcVector& coeffs, double lo, double hi) const {
  const GpcBasis& basis = algebra_->basis();
  if (basis.dim() == 1) return interval_probability_1d(basis, coeffs, lo, hi);
  const Eigen::VectorXd values = grid_table_ * coeffs;
  // Normalizing by the summed weights keeps all-in and all-out exactly 1 and 0.
  double in = 0.0, out = 0.0;
  for (Eigen::Index q = 0; q < values.size(); ++q)
    (values(q) >= lo && values(q) <= hi ? in : out) += grid_weights_(q);
  if (out == 0.0) return 1.0;
  return in / (in + out);
}

double CdfEvaluator::pointwise(const GpcVector& phi, double epsilon) const {
  if (!(epsilon >= 0.0)) throw Error(ErrorKind::InvalidArgument, "cdf_at: epsilon must be nonnegative");
  return probability(phi, -epsilon, epsilon);
}

std::optional<double> CdfEvaluator::galerkin(const GpcVector& phi, double epsilon) const {
  if (!(epsilon >= 0.0)) throw Error(ErrorKind::InvalidArgument, "cdf_at: epsilon must be nonnegative");
  try {
    const AbsPhi a = abs_phi(*algebra_, phi);
    return probability(a.coeffs, -std::numeric_limits<double>::infinity(), epsilon);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::IndefiniteRoot || e.kind() == ErrorKind::NonConvergence) return std::nullopt;
    throw;
  }
}

double CdfEvaluator::operator()(const GpcVector& phi, double epsilon) const {
  if (opts_.surrogate == Surrogate::galerkin)
    if (auto g = galerkin(phi, epsilon)) return *g;
  return pointwise(phi, epsilon);
}

std::optional<double> CdfEvaluator::surrogate_discrepancy(const GpcVector& phi, double epsilon) const {
  const auto g = galerkin(phi, epsilon);
  if (!g) return std::nullopt;
  return std::abs(*g - pointwise(phi, epsilon));
}

double cdf_at(const GpcAlgebra& alg, const GpcVector& phi, double epsilon, const CdfOptions& opts) {
  // Non-owning alias; the evaluator does not outlive this call.
  const CdfEvaluator eval(std::shared_ptr<const GpcAlgebra>(&alg, [](const GpcAlgebra*) {}), opts);
  return eval(phi, epsilon);
}

std::size_t QuantileBand::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

QuantileBand perturbed_level_set(const CdfEvaluator& cdf, const CoeffField& phi, double epsilon, double p, double t) {
  if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "perturbed_level_set: p must lie in (0, 1]");
  if (!(epsilon >= 0.0)) throw Error(ErrorKind::InvalidArgument, "perturbed_level_set: epsilon must be nonnegative");
  QuantileBand band;
  band.epsilon = epsilon;
  band.p = p;
  band.t = t;
  band.mask.assign(phi.cells(), 0);
  band.cdf.assign(phi.cells(), 0.0);
  parallel_for(phi.cells(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      band.cdf[c] = cdf(phi.cell(c), epsilon);
      band.mask[c] = band.cdf[c] >= p ? 1 : 0;
    }
  });
  return band;
}

}  // namespace sgls
