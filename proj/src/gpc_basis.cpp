#include "sgls/gpc_basis.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <utility>

namespace sgls {

double legendre_eval(int k, double xi) {
  if (k < 0) throw Error(ErrorKind::InvalidArgument, "legendre_eval: negative degree");
  return legendre_eval_all(k, xi)[static_cast<std::size_t>(k)];
}

std::vector<double> legendre_eval_all(int kmax, double xi) {
  std::vector<double> phi(static_cast<std::size_t>(std::max(kmax, 0)) + 1);
  phi[0] = 1.0;
  if (kmax >= 1) phi[1] = std::sqrt(3.0) * xi;
  for (int k = 1; k < kmax; ++k) {
    const double kd = k;
    phi[static_cast<std::size_t>(k + 1)] =
        std::sqrt(2.0 * kd + 3.0) / (kd + 1.0) *
        (std::sqrt(2.0 * kd + 1.0) * xi * phi[static_cast<std::size_t>(k)] -
         kd / std::sqrt(2.0 * kd - 1.0) * phi[static_cast<std::size_t>(k - 1)]);
  }
  return phi;
}

// ---------------------------------------------------------------------------
// Multi-index set

namespace {

// All multi-indices of exact total degree `deg`, lexicographically
// descending.
void enumerate_degree(int dim, int deg, MultiIndex& prefix, std::vector<MultiIndex>& out) {
  const int pos = static_cast<int>(prefix.size());
  if (pos == dim - 1) {
    prefix.push_back(deg);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int first = deg; first >= 0; --first) {
    prefix.push_back(first);
    enumerate_degree(dim, deg - first, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

MultiIndexSet::MultiIndexSet(int dim, int degree) : dim_(dim), degree_(degree) {
  if (dim < 1) throw Error(ErrorKind::InvalidArgument, "MultiIndexSet: dimension must be >= 1");
  if (degree < 0) throw Error(ErrorKind::InvalidArgument, "MultiIndexSet: degree must be >= 0");
  for (int deg = 0; deg <= degree; ++deg) {
    MultiIndex prefix;
    prefix.reserve(static_cast<std::size_t>(dim));
    enumerate_degree(dim, deg, prefix, indices_);
  }
}

int MultiIndexSet::total_degree(std::size_t i) const {
  int s = 0;
  for (int v : indices_[i]) s += v;
  return s;
}

long MultiIndexSet::find(const MultiIndex& k) const {
  auto it = std::find(indices_.begin(), indices_.end(), k);
  return it == indices_.end() ? -1 : static_cast<long>(it - indices_.begin());
}

std::size_t MultiIndexSet::cardinality(int dim, int degree) {
  // (L+K)! / (L! K!) computed incrementally to stay exact.
  std::size_t c = 1;
  for (int i = 1; i <= dim; ++i) c = c * static_cast<std::size_t>(degree + i) / static_cast<std::size_t>(i);
  return c;
}

// ---------------------------------------------------------------------------
// Quadrature

namespace {

// Unnormalized P_n(z) and P_{n-1}(z).
std::pair<double, double> legendre_pair(int n, double z) {
  double p0 = 1.0, p1 = z;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return {p1, p0};
}

}  // namespace

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "gauss_legendre: need at least one node");
  std::vector<double> x(static_cast<std::size_t>(n));
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [pn, pnm1] = legendre_pair(n, z);
      const double dz = pn / (n * (z * pn - pnm1) / (z * z - 1.0));
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const auto [pn, pnm1] = legendre_pair(n, z);
    const double dp = n * (z * pn - pnm1) / (z * z - 1.0);
    x[static_cast<std::size_t>(i)] = z;
    // Half the classical weight: uniform probability density on [-1, 1].
    w[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
  // Ascending nodes; symmetrize so the rule is exactly odd-symmetric.
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  QuadratureRule rule;
  rule.nodes.resize(1, n);
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    rule.nodes(0, i) = x[order[static_cast<std::size_t>(i)]];
    rule.weights[static_cast<std::size_t>(i)] = w[order[static_cast<std::size_t>(i)]];
  }
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double xs = 0.5 * (rule.nodes(0, j) - rule.nodes(0, i));
    const double ws = 0.5 * (rule.weights[static_cast<std::size_t>(i)] + rule.weights[static_cast<std::size_t>(j)]);
    rule.nodes(0, i) = -xs;
    rule.nodes(0, j) = xs;
    rule.weights[static_cast<std::size_t>(i)] = ws;
    rule.weights[static_cast<std::size_t>(j)] = ws;
  }
  if (n % 2 == 1) rule.nodes(0, n / 2) = 0.0;
  return rule;
}

namespace {

QuadratureRule tensorize(const QuadratureRule& line, int dim) {
  const std::size_t n = line.size();
  std::size_t total = 1;
  for (int d = 0; d < dim; ++d) total *= n;
  QuadratureRule rule;
  rule.nodes.resize(dim, static_cast<Eigen::Index>(total));
  rule.weights.resize(total);
  std::vector<std::size_t> digit(static_cast<std::size_t>(dim), 0);
  for (std::size_t q = 0; q < total; ++q) {
    double w = 1.0;
    for (int d = 0; d < dim; ++d) {
      rule.nodes(d, static_cast<Eigen::Index>(q)) = line.nodes(0, static_cast<Eigen::Index>(digit[static_cast<std::size_t>(d)]));
      w *= line.weights[digit[static_cast<std::size_t>(d)]];
    }
    rule.weights[q] = w;
    // Last dimension varies fastest.
    for (int d = dim - 1; d >= 0; --d) {
      if (++digit[static_cast<std::size_t>(d)] < n) break;
      digit[static_cast<std::size_t>(d)] = 0;
    }
  }
  return rule;
}

}  // namespace

QuadratureRule tensor_gauss_legendre(int dim, int n) { return tensorize(gauss_legendre(n), dim); }

// ---------------------------------------------------------------------------
// Basis

int GpcBasis::min_nodes(int degree) { return std::max(degree + 1, (3 * degree + 2) / 2); }

int GpcBasis::default_nodes(int degree) { return std::max(degree + 2, (3 * degree + 2) / 2); }

std::shared_ptr<const GpcBasis> GpcBasis::build(int dim, int degree, std::optional<int> nodes_per_dim) {
  return build(std::make_shared<LegendreFamily>(), dim, degree, nodes_per_dim);
}

std::shared_ptr<const GpcBasis> GpcBasis::build(std::shared_ptr<const UnivariateFamily> family, int dim,
                                                int degree, std::optional<int> nodes_per_dim) {
  const int nodes = nodes_per_dim.value_or(default_nodes(degree));
  if (nodes < min_nodes(degree)) {
    throw Error(ErrorKind::InvalidArgument,
                "build_basis: nodes_per_dim=" + std::to_string(nodes) +
                    " cannot integrate triple products exactly; need >= " +
                    std::to_string(min_nodes(degree)));
  }
  return std::shared_ptr<const GpcBasis>(new GpcBasis(std::move(family), dim, degree, nodes));
}

GpcBasis::GpcBasis(std::shared_ptr<const UnivariateFamily> family, int dim, int degree, int nodes)
    : family_(std::move(family)), index_set_(dim, degree), nodes_per_dim_(nodes) {
  quad_ = tensorize(family_->rule(nodes), dim);
  const auto n_basis = static_cast<Eigen::Index>(index_set_.size());
  const auto n_quad = static_cast<Eigen::Index>(quad_.size());

  eval_table_.resize(n_quad, n_basis);
  for (Eigen::Index q = 0; q < n_quad; ++q) {
    std::vector<std::vector<double>> per_dim(static_cast<std::size_t>(dim));
    for (int d = 0; d < dim; ++d) per_dim[static_cast<std::size_t>(d)] = family_->eval_all(degree, quad_.nodes(d, q));
    for (Eigen::Index k = 0; k < n_basis; ++k) {
      double v = 1.0;
      const auto& idx = index_set_[static_cast<std::size_t>(k)];
      for (int d = 0; d < dim; ++d) v *= per_dim[static_cast<std::size_t>(d)][static_cast<std::size_t>(idx[static_cast<std::size_t>(d)])];
      eval_table_(q, k) = v;
    }
  }

  // Values below this are quadrature rounding of exact zeros.
  constexpr double kSnap = 1e-14;
  triple_.assign(static_cast<std::size_t>(n_basis), GpcMatrix::Zero(n_basis, n_basis));
  for (Eigen::Index k = 0; k < n_basis; ++k) {
    GpcMatrix& m = triple_[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < n_basis; ++i) {
      for (Eigen::Index j = i; j < n_basis; ++j) {
        double s = 0.0;
        for (Eigen::Index q = 0; q < n_quad; ++q)
          s += quad_.weights[static_cast<std::size_t>(q)] * eval_table_(q, k) * eval_table_(q, i) * eval_table_(q, j);
        if (std::abs(s) < kSnap) s = 0.0;
        m(i, j) = s;
        m(j, i) = s;
      }
    }
  }
  // <phi_0, phi_i phi_j> = delta_ij exactly for an orthonormal family.
  triple_[0].setIdentity();
}

double GpcBasis::eval(std::size_t k, std::span<const double> xi) const {
  const auto& idx = index_set_[k];
  double v = 1.0;
  for (int d = 0; d < dim(); ++d) v *= legendre_eval(idx[static_cast<std::size_t>(d)], xi[static_cast<std::size_t>(d)]);
  return v;
}

GpcVector GpcBasis::eval_all(std::span<const double> xi) const {
  std::vector<std::vector<double>> per_dim(static_cast<std::size_t>(dim()));
  for (int d = 0; d < dim(); ++d) per_dim[static_cast<std::size_t>(d)] = family_->eval_all(degree(), xi[static_cast<std::size_t>(d)]);
  GpcVector out(static_cast<Eigen::Index>(size()));
  for (std::size_t k = 0; k < size(); ++k) {
    double v = 1.0;
    for (int d = 0; d < dim(); ++d) v *= per_dim[static_cast<std::size_t>(d)][static_cast<std::size_t>(index_set_[k][static_cast<std::size_t>(d)])];
    out(static_cast<Eigen::Index>(k)) = v;
  }
  return out;
}

double GpcBasis::realization(const GpcVector& coeffs, std::span<const double> xi) const {
  return coeffs.dot(eval_all(xi));
}

void GpcBasis::dump_tensors(std::ostream& os) const {
  os << "# triple-product tensors <phi_k, phi_i phi_j>; L=" << dim() << " K=" << degree()
     << " size=" << size() << "\n# i j k value\n";
  os.precision(17);
  for (std::size_t k = 0; k < size(); ++k)
    for (Eigen::Index i = 0; i < triple_[k].rows(); ++i)
      for (Eigen::Index j = 0; j < triple_[k].cols(); ++j)
        if (triple_[k](i, j) != 0.0) os << i << ' ' << j << ' ' << k << ' ' << triple_[k](i, j) << '\n';
}

std::uint64_t GpcBasis::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  const int header[3] = {dim(), degree(), nodes_per_dim_};
  mix(header, sizeof(header));
  for (const auto& k : index_set_.indices()) mix(k.data(), k.size() * sizeof(int));
  for (const auto& m : triple_) mix(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  return h;
}

// ---------------------------------------------------------------------------

double c_constant(const GpcBasis& basis, const std::map<std::size_t, int>& exponents) {
  const int dim = basis.dim();
  int max_degree = 0;
  for (int d = 0; d < dim; ++d) {
    int deg = 0;
    for (const auto& [j, l] : exponents) {
      if (l < 0) throw Error(ErrorKind::InvalidArgument, "c_constant: negative exponent");
      if (j >= basis.size()) throw Error(ErrorKind::InvalidArgument, "c_constant: basis index out of range");
      deg += l * basis.index_set()[j][static_cast<std::size_t>(d)];
    }
    max_degree = std::max(max_degree, deg);
  }
  // n nodes integrate degree 2n-1 exactly.
  const int nodes = max_degree / 2 + 1;
  const QuadratureRule rule = tensor_gauss_legendre(dim, nodes);
  double sum = 0.0;
  std::vector<double> xi(static_cast<std::size_t>(dim));
  for (std::size_t q = 0; q < rule.size(); ++q) {
    for (int d = 0; d < dim; ++d) xi[static_cast<std::size_t>(d)] = rule.nodes(d, static_cast<Eigen::Index>(q));
    const GpcVector phi = basis.eval_all(xi);
    double prod = 1.0;
    for (const auto& [j, l] : exponents) prod *= std::pow(phi(static_cast<Eigen::Index>(j)), l);
    sum += rule.weights[q] * prod;
  }
  return sum;
}

}  // namespace sgls
