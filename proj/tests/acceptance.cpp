// Acceptance gate: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sgls/flux_jacobian.hpp"
#include "sgls/fv_solver.hpp"
#include "sgls/gpc_algebra.hpp"
#include "sgls/gpc_basis.hpp"
#include "sgls/mc_oracle.hpp"
#include "sgls/quantile.hpp"

using namespace sgls;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::shared_ptr<const GpcAlgebra> algebra(int L, int K) {
  return std::make_shared<const GpcAlgebra>(GpcBasis::build(L, K));
}

double max_abs(const GpcVector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Random expansion with mean in [lo, hi] and fluctuation modes scaled so the
// total fluctuation stays below `spread` times the mean in sup norm.
GpcVector random_state(std::mt19937_64& rng, const GpcBasis& b, double lo, double hi, double spread) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), m(lo, hi);
  GpcVector a(static_cast<Eigen::Index>(b.size()));
  const double mean = m(rng);
  double sup = 0.0;
  for (Eigen::Index i = 1; i < a.size(); ++i) {
    a[i] = u(rng);
    double s = 1.0;
    for (int k : b.index_set()[static_cast<std::size_t>(i)]) s *= std::sqrt(2.0 * k + 1.0);
    sup += std::abs(a[i]) * s;
  }
  const double scale = sup > 0.0 ? spread * std::abs(mean) * std::uniform_real_distribution<double>(0.0, 1.0)(rng) / sup : 0.0;
  a *= scale;
  a[0] = mean;
  return a;
}

// --- 1 ---------------------------------------------------------------------
Outcome algebra_round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t tested = 0;
  std::mt19937_64 rng(101);
  for (auto [L, K] : {std::pair{1, 1}, std::pair{1, 3}, std::pair{2, 2}}) {
    const auto alg = algebra(L, K);
    int accepted = 0;
    while (accepted < 1000) {
      const GpcVector a = random_state(rng, alg->basis(), 0.2, 3.0, 1.6);
      if (!alg->certificate(a).positive) continue;
      ++accepted;
      worst = std::max(worst, max_abs(alg->r_inverse(alg->second_moment(a)) - a));
    }
    tested += static_cast<std::size_t>(accepted);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst < 1e-9 && secs < 10.0, fmt("%zu states, max error %.2e, %.2f s", tested, worst, secs)};
}

// --- 2 ---------------------------------------------------------------------
Outcome closed_forms_k1() {
  const auto alg = algebra(1, 1);
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> d0(-2.0, 2.0), d1(-1.0, 1.0);
  double worst = 0.0;
  int points = 0;
  auto rinv = [](double r0, double r1) {
    const double a = std::sqrt(r0 + r1), b = std::sqrt(r0 - r1);
    return std::array<double, 2>{0.5 * (a + b), 0.5 * (a - b)};
  };
  while (points < 100) {
    const double u0 = d0(rng), u1 = d1(rng);
    if (!(std::abs(u0) > std::abs(u1))) continue;
    ++points;
    const GpcVector u = (GpcVector(2) << u0, u1).finished();
    const GpcMatrix P = alg->p_matrix(u);
    worst = std::max({worst, std::abs(P(0, 0) - u0), std::abs(P(1, 1) - u0), std::abs(P(0, 1) - u1),
                      std::abs(P(1, 0) - u1)});
    const GpcVector R = alg->second_moment(u);
    const double r0 = u0 * u0 + u1 * u1, r1 = 2 * u0 * u1;
    worst = std::max({worst, std::abs(R[0] - r0), std::abs(R[1] - r1)});
    const auto ri = rinv(r0, r1);
    const GpcVector a = alg->r_inverse((GpcVector(2) << r0, r1).finished());
    worst = std::max({worst, std::abs(a[0] - ri[0]), std::abs(a[1] - ri[1])});
    // 1D norm: R^{-1}(u * u); 2D norm with a second sweep component
    const GpcVector one[1] = {u};
    const GpcVector n1 = alg->norm(one);
    worst = std::max({worst, std::abs(n1[0] - ri[0]), std::abs(n1[1] - ri[1])});
    const double w0 = 0.5 * d1(rng), w1 = 0.5 * w0 * d1(rng);
    const GpcVector two[2] = {u, (GpcVector(2) << w0, w1).finished()};
    const auto r2 = rinv(r0 + w0 * w0 + w1 * w1, r1 + 2 * w0 * w1);
    const GpcVector n2 = alg->norm(two);
    worst = std::max({worst, std::abs(n2[0] - r2[0]), std::abs(n2[1] - r2[1])});
  }
  return {worst < 1e-12, fmt("%d points, max error %.2e", points, worst)};
}

// --- 3 ---------------------------------------------------------------------
Outcome hyperbolicity() {
  std::mt19937_64 rng(303);
  double eig_gap = 0.0, recon = 0.0, imag = 0.0;
  int states = 0;
  for (auto [L, K, dims] : {std::tuple{1, 3, 1}, std::tuple{2, 2, 2}}) {
    const auto alg = algebra(L, K);
    int accepted = 0;
    while (accepted < 500) {
      GradState u{random_state(rng, alg->basis(), -2.0, 2.0, 0.9), std::nullopt, {}};
      if (dims == 2) u.u2 = random_state(rng, alg->basis(), -2.0, 2.0, 0.9);
      try {
        const GpcVector n = grad_norm(*alg, u);
        if (!alg->certificate(n).positive) continue;
      } catch (const Error&) {
        continue;
      }
      ++accepted;
      for (int k = 0; k < 16; ++k) {
        const double th = 2 * kPi * k / 16.0;
        const Direction dir = dims == 1 ? Direction(k % 2 ? -1.0 : 1.0, 0.0) : Direction(std::cos(th), std::sin(th));
        const SpectrumReport s = spectrum_capacity(*alg, u, dir);
        if (!s.hyperbolic) imag = std::max(imag, 1.0);
        const GpcMatrix J = jacobian_capacity(*alg, u, dir);
        const Eigen::EigenSolver<GpcMatrix> es(J);
        std::vector<double> re(static_cast<std::size_t>(J.rows()));
        for (Eigen::Index i = 0; i < J.rows(); ++i) {
          re[static_cast<std::size_t>(i)] = es.eigenvalues()[i].real();
          imag = std::max(imag, std::abs(es.eigenvalues()[i].imag()));
        }
        std::sort(re.begin(), re.end());
        for (std::size_t i = 0; i < re.size(); ++i) eig_gap = std::max(eig_gap, std::abs(re[i] - s.eigenvalues[i]));
        const Eigenbasis eb = capacity_eigenbasis(*alg, u, dir);
        const GpcMatrix rec = eb.vectors * eb.values.asDiagonal() * eb.vectors.inverse();
        recon = std::max(recon, (rec - J).cwiseAbs().maxCoeff() / std::max(1.0, J.cwiseAbs().maxCoeff()));
      }
    }
    states += accepted;
  }
  return {eig_gap < 1e-8 && imag < 1e-8 && recon < 1e-8,
          fmt("%d states x 16 directions, eigenvalue gap %.2e, max imaginary part %.2e, reconstruction %.2e", states,
              eig_gap, imag, recon)};
}

// --- 4 ---------------------------------------------------------------------
Outcome gradient_identity() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  double g_err = 0.0, h_err = 0.0;
  int points = 0;
  for (auto [L, K] : {std::pair{1, 3}, std::pair{2, 2}}) {
    const auto alg = algebra(L, K);
    const Eigen::Index n = static_cast<Eigen::Index>(alg->size());
    for (int trial = 0; trial < 100; ++trial, ++points) {
      GpcVector a(n), rho(n);
      for (Eigen::Index i = 0; i < n; ++i) a[i] = d(rng), rho[i] = d(rng);
      const GpcVector g = alg->second_moment(a) - rho;
      const GpcMatrix H = 2.0 * alg->p_matrix(a);
      // The objective is cubic, so the Hessian stencil is exact and can use a
      // wider step that keeps rounding small.
      const double h = 1e-5, hh = 1e-3;
      GpcVector fd(n);
      GpcMatrix fh(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        GpcVector ei = GpcVector::Zero(n);
        ei[i] = h;
        fd[i] = (alg->root_objective(a + ei, rho) - alg->root_objective(a - ei, rho)) / (2 * h);
        GpcVector ei2 = GpcVector::Zero(n);
        ei2[i] = hh;
        for (Eigen::Index j = 0; j < n; ++j) {
          GpcVector ej = GpcVector::Zero(n);
          ej[j] = hh;
          fh(i, j) = (alg->root_objective(a + ei2 + ej, rho) - alg->root_objective(a + ei2 - ej, rho) -
                      alg->root_objective(a - ei2 + ej, rho) + alg->root_objective(a - ei2 - ej, rho)) /
                     (4 * hh * hh);
        }
      }
      g_err = std::max(g_err, (fd - g).norm() / g.norm());
      h_err = std::max(h_err, (fh - H).norm() / H.norm());
    }
  }
  return {g_err < 1e-6 && h_err < 1e-6,
          fmt("%d points, gradient rel. error %.2e, Hessian rel. error %.2e", points, g_err, h_err)};
}

// --- shared scenarios --------------------------------------------------------
InitialCondition wavy_1d() {
  return {[](Point p) { return p.x + 0.05 * std::sin(2 * kPi * p.x); },
          [](Point p) { return std::array<double, 2>{1.0 + 0.1 * kPi * std::cos(2 * kPi * p.x), 0.0}; }};
}

InitialCondition wavy_2d() {
  return {[](Point p) { return p.x + 0.5 * p.y + 0.05 * std::sin(2 * kPi * p.x) * std::sin(2 * kPi * p.y); },
          [](Point p) {
            return std::array<double, 2>{1.0 + 0.1 * kPi * std::cos(2 * kPi * p.x) * std::sin(2 * kPi * p.y),
                                         0.5 + 0.1 * kPi * std::sin(2 * kPi * p.x) * std::cos(2 * kPi * p.y)};
          }};
}

InitialCondition circle(double cx, double cy, double r) {
  return {[=](Point p) { return r - std::hypot(p.x - cx, p.y - cy); },
          [=](Point p) {
            const double d = std::hypot(p.x - cx, p.y - cy);
            return std::array<double, 2>{-(p.x - cx) / d, -(p.y - cy) / d};
          }};
}

double field_diff(const CoeffField& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t c = 0; c < b.size(); ++c) m = std::max(m, std::abs(a.cell(c)[0] - b[c]));
  return m;
}

// --- 5 ---------------------------------------------------------------------
Outcome deterministic_limit() {
  const auto alg = algebra(1, 0);
  const auto basis = alg->basis_ptr();
  const VelocitySpec v({GaussianBumpMode{0.4, 0.5, 0.5, 0.15, 1.0}});
  const double xi0[1] = {0.0};
  double worst = 0.0;
  std::string runs;
  for (int dims : {1, 2}) {
    const Grid g = dims == 1 ? Grid::line(96, 1.0 / 96, 0.5 / 96, Boundary::periodic)
                             : Grid::plane(40, 40, 1.0 / 40, 1.0 / 40, 0.5 / 40, 0.5 / 40, Boundary::periodic);
    const InitialCondition ic = dims == 1 ? wavy_1d() : wavy_2d();
    for (Form form : {Form::conservative, Form::capacity}) {
      SolverState s = init_deterministic(g, ic, v, alg, {form, 0.45, 0.0});
      DeterministicSolver ref(g, ic, ScalarVelocity::realization(v, *basis, {xi0[0]}), form, 0.45);
      double local = 0.0;
      for (int k = 0; k < 200; ++k) {
        StepResult r = step(s);
        if (r.report.halted) return {false, "intrusive run halted: " + r.report.message};
        ref.step_forced(r.report.dt_used);
        s = std::move(r.state);
        local = std::max({local, field_diff(s.phi, ref.phi()), field_diff(s.u1, ref.ux())});
        if (dims == 2) local = std::max(local, field_diff(s.u2, ref.uy()));
      }
      worst = std::max(worst, local);
      runs += fmt(" %dD-%s %.1e", dims, form == Form::conservative ? "cons" : "cap", local);
    }
  }
  return {worst < 1e-12, fmt("200 steps, max discrepancy %.2e;", worst) + runs};
}

// --- 6 ---------------------------------------------------------------------
Outcome cross_form() {
  const auto alg = algebra(1, 3);
  const int n = 64;
  const Grid g = Grid::plane(n, n, 1.0 / n, 1.0 / n, 0.5 / n, 0.5 / n, Boundary::periodic);
  const VelocitySpec v = VelocitySpec::constant({1.3});
  SolverState a = init_deterministic(g, wavy_2d(), v, alg, {Form::conservative, 0.45, 0.0});
  // Give the gradient random, spatially smooth higher modes.
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> d(-0.08, 0.08);
  std::array<double, 3> e1{d(rng), d(rng), d(rng)}, e2{d(rng), d(rng), d(rng)};
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const Point p = g.center(c);
    for (int k = 1; k <= 3; ++k) {
      a.u1.cell(c)[k] = e1[static_cast<std::size_t>(k - 1)] * std::cos(2 * kPi * (p.x + k * p.y));
      a.u2.cell(c)[k] = e2[static_cast<std::size_t>(k - 1)] * std::sin(2 * kPi * (k * p.x - p.y));
    }
  }
  SolverState b = a;
  b.form = Form::capacity;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    StepResult ra = step(a);
    if (ra.report.halted) return {false, "conservative run halted: " + ra.report.message};
    StepResult rb = step(b, INFINITY, ra.report.dt_used);
    if (rb.report.halted) return {false, "capacity run halted: " + rb.report.message};
    a = std::move(ra.state);
    b = std::move(rb.state);
    for (std::size_t i = 0; i < a.u1.values().size(); ++i) {
      worst = std::max(worst, std::abs(a.u1.values()[i] - b.u1.values()[i]));
      worst = std::max(worst, std::abs(a.u2.values()[i] - b.u2.values()[i]));
      worst = std::max(worst, std::abs(a.phi.values()[i] - b.phi.values()[i]));
    }
  }
  return {worst < 1e-10, fmt("64^2 grid, K = 3, 100 steps, max difference %.2e", worst)};
}

// --- 7 ---------------------------------------------------------------------
struct IntrusiveMoments {
  std::vector<double> mean, stdev;
};

IntrusiveMoments intrusive_moments(int cells, double t_end, bool& ok) {
  const auto alg = algebra(1, 4);
  const Grid g = Grid::line(cells, 1.0 / cells, 0.5 / cells, Boundary::periodic);
  const SolverState s = init_deterministic(g, wavy_1d(), VelocitySpec::constant({1.0, 0.1}), alg);
  const RunResult r = run(s, t_end);
  ok = r.completed;
  IntrusiveMoments m;
  for (std::size_t c = 0; c < g.cells(); ++c) {
    const auto phi = r.state.phi.cell(c);
    m.mean.push_back(phi[0]);
    m.stdev.push_back(phi.tail(phi.size() - 1).norm());
  }
  return m;
}

Outcome intrusive_vs_mc() {
  const auto t0 = std::chrono::steady_clock::now();
  const double t_end = 0.2;
  bool ok_fine = false, ok_coarse = false;
  const IntrusiveMoments fine = intrusive_moments(128, t_end, ok_fine);
  const IntrusiveMoments coarse = intrusive_moments(64, t_end, ok_coarse);
  if (!ok_fine || !ok_coarse) return {false, "intrusive run did not reach t_end"};

  const Grid g = Grid::line(128, 1.0 / 128, 0.5 / 128, Boundary::periodic);
  const auto basis = GpcBasis::build(1, 4);
  EnsembleOptions opts;
  opts.keep_runs = true;
  const std::size_t N = 10000;
  const EnsembleStats mc = ensemble(g, wavy_1d(), VelocitySpec::constant({1.0, 0.1}), *basis, t_end, MonteCarlo{N, 2024}, opts);

  double worst_mean = 0.0, worst_std = 0.0;
  int violations = 0;
  for (std::size_t c = 0; c < g.cells(); ++c) {
    // fourth central moment for the standard error of the sample deviation
    double m4 = 0.0;
    for (const SampleRun& r : mc.runs) m4 += std::pow(r.phi[c] - mc.mean[c], 4);
    m4 /= static_cast<double>(N);
    const double var = mc.variance[c];
    const double sd = std::sqrt(var);
    const double se_sd = sd > 0.0 ? std::sqrt(std::max(m4 - var * var, 0.0) / static_cast<double>(N)) / (2.0 * sd) : 0.0;

    const std::size_t cc = c / 2;
    const double gap_mean = std::abs(0.5 * (fine.mean[2 * cc] + fine.mean[2 * cc + 1]) - coarse.mean[cc]);
    const double fine_pair_std = 0.5 * (fine.stdev[2 * cc] + fine.stdev[2 * cc + 1]);
    const double gap_std = std::abs(fine_pair_std - coarse.stdev[cc]);

    const double tol_mean = std::max(3.0 * mc.std_error[c], 2.0 * gap_mean);
    const double tol_std = std::max(3.0 * se_sd, 2.0 * gap_std);
    const double dm = std::abs(fine.mean[c] - mc.mean[c]);
    const double ds = std::abs(fine.stdev[c] - sd);
    worst_mean = std::max(worst_mean, dm / tol_mean);
    worst_std = std::max(worst_std, ds / tol_std);
    if (dm > tol_mean || ds > tol_std) ++violations;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {violations == 0 && secs < 300.0,
          fmt("%zu samples, worst |diff|/tol: mean %.2f, std %.2f, %d cells outside, %.1f s", N, worst_mean, worst_std,
              violations, secs)};
}

// --- 8 ---------------------------------------------------------------------
Outcome moment_cross_check() {
  std::mt19937_64 rng(808);
  double worst = 0.0;
  int states = 0;
  for (int L : {1, 2})
    for (int K = 1; K <= 3; ++K) {
      const auto alg = algebra(L, K);
      const QuadratureRule ref = tensor_gauss_legendre(L, 16);
      int accepted = 0;
      while (accepted < 50) {
        const GpcVector phi = random_state(rng, alg->basis(), -1.5, 1.5, 2.0);
        AbsPhi a;
        try {
          a = abs_phi(*alg, phi);
        } catch (const Error&) {
          continue;
        }
        if (!a.certificate.positive) continue;
        ++accepted;
        const auto m = moment_series(alg->basis(), a, 4);
        std::vector<double> xi(static_cast<std::size_t>(L));
        for (int k = 1; k <= 4; ++k) {
          long double s = 0.0L;
          for (std::size_t q = 0; q < ref.size(); ++q) {
            for (int d = 0; d < L; ++d) xi[static_cast<std::size_t>(d)] = ref.nodes(d, static_cast<Eigen::Index>(q));
            s += ref.weights[q] * std::pow(static_cast<long double>(alg->basis().realization(a.coeffs, xi)), k);
          }
          const double direct = static_cast<double>(s);
          worst = std::max(worst, std::abs(m[static_cast<std::size_t>(k)] - direct) / std::max(1.0, std::abs(direct)));
        }
      }
      states += accepted;
    }
  return {worst < 1e-12, fmt("%d certified states, m = 1..4, max rel. error %.2e", states, worst)};
}

// --- 9 ---------------------------------------------------------------------
Outcome cdf_exactness() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> d(-1.0, 1.0), e(0.02, 1.5);
  std::uniform_int_distribution<int> kd(1, 4);
  const int M = 1000000;
  double worst = 0.0;
  std::vector<double> leg(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int K = kd(rng);
    const auto alg = algebra(1, K);
    GpcVector c(K + 1);
    for (auto& x : c) x = d(rng);
    const double eps = e(rng);
    const double f = cdf_at(*alg, c, eps);
    long hit = 0;
    for (int i = 0; i < M; ++i) {
      const double x = -1.0 + (i + 0.5) * 2.0 / M;
      // three-term recursion for the monic-normalized Legendre values
      double p0 = 1.0, p1 = x, val = c[0] + (K >= 1 ? c[1] * std::sqrt(3.0) * x : 0.0);
      for (int k = 2; k <= K; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        val += c[k] * std::sqrt(2.0 * k + 1.0) * p2;
        p0 = p1;
        p1 = p2;
      }
      if (std::abs(val) <= eps) ++hit;
    }
    worst = std::max(worst, std::abs(f - static_cast<double>(hit) / M));
  }
  const auto alg1 = algebra(1, 1);
  const double analytic = std::abs(cdf_at(*alg1, (GpcVector(2) << 0.0, 1.0).finished(), std::sqrt(3.0) / 2.0) - 0.5);
  return {worst < 2e-3 && analytic < 1e-12,
          fmt("100 random states, max discrepancy %.2e; analytic case error %.2e", worst, analytic)};
}

// --- 10 --------------------------------------------------------------------
Outcome band_monotonicity() {
  const auto alg = algebra(1, 2);
  const int n = 48;
  const Grid g = Grid::plane(n, n, 1.0 / n, 1.0 / n, 0.5 / n, 0.5 / n);
  const VelocitySpec v({GaussianBumpMode{0.3, 0.3, 0.6, 0.2, 1.0}, ConstantMode{0.15}, ConstantMode{0.03}});
  const SolverState s = init_deterministic(g, circle(0.52, 0.47, 0.3), v, alg);
  const RunResult r = run(s, 0.08);
  if (!r.completed) return {false, "evolution halted: " + r.last_report.message};
  const CdfEvaluator cdf(alg);
  const double eps[3] = {0.02, 0.05, 0.1}, ps[3] = {0.5, 0.9, 0.99};
  std::vector<QuantileBand> bands;
  for (double e : eps)
    for (double p : ps) bands.push_back(perturbed_level_set(cdf, r.state.phi, e, p, r.state.t));
  auto at = [&](int i, int j) -> const QuantileBand& { return bands[static_cast<std::size_t>(i * 3 + j)]; };
  long violations = 0;
  for (std::size_t c = 0; c < g.cells(); ++c)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        if (i + 1 < 3 && at(i, j).mask[c] > at(i + 1, j).mask[c]) ++violations;  // wider epsilon contains
        if (j + 1 < 3 && at(i, j + 1).mask[c] > at(i, j).mask[c]) ++violations;  // lower p contains
      }
  return {violations == 0 && at(2, 0).count() > 0,
          fmt("t = %.3f, band sizes eps=0.1: %zu/%zu/%zu cells, %ld violations", r.state.t, at(2, 0).count(),
              at(2, 1).count(), at(2, 2).count(), violations)};
}

// --- 11 --------------------------------------------------------------------
Outcome conservation() {
  const auto alg = algebra(1, 3);
  const Grid g = Grid::line(200, 1.0 / 200, 0.5 / 200, Boundary::periodic);
  const VelocitySpec v({GaussianBumpMode{0.2, 0.5, 0.0, 0.1, 1.0}, ConstantMode{0.1}, AffineMode{0.02, 0.01, 0.0}});
  SolverState s = init_deterministic(g, wavy_1d(), v, alg);
  auto sums = [&](const SolverState& st) {
    GpcVector t = GpcVector::Zero(4);
    for (std::size_t c = 0; c < g.cells(); ++c) t += st.u1.cell(c);
    return t;
  };
  double scale = 0.0;
  for (std::size_t c = 0; c < g.cells(); ++c) scale += std::abs(s.u1.cell(c)[0]);
  const GpcVector before = sums(s);
  for (int k = 0; k < 500; ++k) {
    StepResult r = step(s);
    if (r.report.halted) return {false, "run halted: " + r.report.message};
    s = std::move(r.state);
  }
  const GpcVector drift = (sums(s) - before).cwiseAbs() / scale;
  GpcVector moved = GpcVector::Zero(4);
  for (std::size_t c = 0; c < g.cells(); ++c) moved = moved.cwiseMax(s.u1.cell(c).cwiseAbs());
  return {drift.maxCoeff() < 1e-11 && moved.tail(3).maxCoeff() > 0.0,
          fmt("500 steps, t = %.3f, relative drift per mode %.1e %.1e %.1e %.1e", s.t, drift[0], drift[1], drift[2],
              drift[3])};
}

// --- 12 --------------------------------------------------------------------
double area_radius(const Grid& g, const std::function<double(std::size_t)>& phi) {
  double frac = 0.0;
  for (std::size_t c = 0; c < g.cells(); ++c) frac += std::clamp(0.5 + phi(c) / g.dx, 0.0, 1.0);
  return std::sqrt(frac * g.dx * g.dy / kPi);
}

double fit_slope(const std::vector<double>& t, const std::vector<double>& r) {
  const double n = static_cast<double>(t.size());
  double st = 0, sr = 0, stt = 0, str = 0;
  for (std::size_t i = 0; i < t.size(); ++i) st += t[i], sr += r[i], stt += t[i] * t[i], str += t[i] * r[i];
  return (n * str - st * sr) / (n * stt - st * st);
}

Outcome circle_benchmark() {
  const int n = 200;
  const double R0 = 0.3, t_end = 0.15;
  const Grid g = Grid::plane(n, n, 1.0 / n, 1.0 / n, 0.5 / n, 0.5 / n);
  const auto alg = algebra(1, 1);
  const SolverState s = init_deterministic(g, circle(0.5, 0.5, R0), VelocitySpec::constant({1.0}), alg);
  const RunResult r = run(s, t_end, 10);
  if (!r.completed) return {false, "intrusive run halted: " + r.last_report.message};
  std::vector<double> ti, ri;
  for (const Snapshot& sn : r.snapshots) {
    ti.push_back(sn.t);
    ri.push_back(area_radius(g, [&](std::size_t c) { return sn.phi.cell(c)[0]; }));
  }
  const double slope_i = fit_slope(ti, ri);

  DeterministicSolver det(g, circle(0.5, 0.5, R0), ScalarVelocity::constant(1.0));
  const auto snaps = det.run_until(t_end, 10);
  std::vector<double> td, rd;
  for (const auto& sn : snaps) {
    td.push_back(sn.t);
    rd.push_back(area_radius(g, [&](std::size_t c) { return sn.phi[c]; }));
  }
  const double slope_d = fit_slope(td, rd);
  const double shrink_i = (ri.front() - ri.back()) / (ti.back() - ti.front());
  const double worst = std::max({std::abs(slope_i + 1.0), std::abs(slope_d + 1.0), std::abs(shrink_i - 1.0)});
  return {worst < 0.02, fmt("200^2 grid, R %.4f -> %.4f over t = %.2f; shrink rate intrusive %.4f, oracle %.4f", ri.front(),
                            ri.back(), ti.back(), -slope_i, -slope_d)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "algebra round trip", algebra_round_trip},
      {2, "closed-form K=1 identities", closed_forms_k1},
      {3, "capacity hyperbolicity", hyperbolicity},
      {4, "objective gradient and Hessian", gradient_identity},
      {5, "deterministic limit vs scalar oracle", deterministic_limit},
      {6, "conservative vs capacity agreement", cross_form},
      {7, "intrusive vs Monte Carlo", intrusive_vs_mc},
      {8, "moment series vs quadrature", moment_cross_check},
      {9, "CDF exactness in one dimension", cdf_exactness},
      {10, "band monotonicity", band_monotonicity},
      {11, "conservation", conservation},
      {12, "circle benchmark", circle_benchmark},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  %2d  %-38s %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
