#include "sgls/fv_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sgls/simd/kernels.hpp"

namespace sgls {

namespace {

constexpr double kDegenerateGradient = 1e-12;

int wrap(int i, int n, Boundary b) {
  if (b == Boundary::periodic) return ((i % n) + n) % n;
  return std::clamp(i, 0, n - 1);
}

std::string cell_list(const std::vector<std::size_t>& cells, std::size_t limit = 8) {
  std::ostringstream os;
  for (std::size_t i = 0; i < std::min(limit, cells.size()); ++i) os << (i ? "," : "") << cells[i];
  if (cells.size() > limit) os << ",... (" << cells.size() << " cells)";
  return os.str();
}

double spectral_radius_sym(const GpcMatrix& m) {
  if (m.rows() == 1) return std::abs(m(0, 0));
  Eigen::SelfAdjointEigenSolver<GpcMatrix> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

/// Per-step cache: Galerkin norm and capacity wave speeds of every cell.
struct CellPass {
  std::vector<GpcVector> norm;
  std::vector<std::array<double, 2>> sigma;
  std::vector<GpcMatrix> norm_inv;  // filled only when random face velocities need it
  std::vector<std::size_t> failures;
  std::string message;
};

CellPass cell_pass(const SolverState& s, bool need_inverse) {
  const std::size_t n = s.grid.cells();
  const int d = s.grid.dims;
  const GpcAlgebra& alg = s.alg();
  CellPass out;
  out.norm.resize(n);
  out.sigma.assign(n, {0.0, 0.0});
  if (need_inverse) out.norm_inv.resize(n);
  std::vector<char> failed(n, 0);
  std::vector<std::string> messages(n);

  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t c = begin; c < end; ++c) {
      try {
        const GradState g = s.grad(c);
        out.norm[c] = grad_norm(alg, g, s.norm_floor);
        if (alg.size() == 1) {
          const double nv = out.norm[c](0);
          for (int a = 0; a < d; ++a) out.sigma[c][static_cast<std::size_t>(a)] = std::abs(g.component(a + 1)(0)) / nv;
          if (need_inverse) out.norm_inv[c] = GpcMatrix::Constant(1, 1, 1.0 / nv);
          continue;
        }
        const GpcMatrix b = spd_inv_sqrt(alg.p_matrix(out.norm[c]));
        for (int a = 0; a < d; ++a) {
          GpcMatrix lam = b * alg.p_matrix(g.component(a + 1)) * b;
          lam = 0.5 * (lam + lam.transpose());
          out.sigma[c][static_cast<std::size_t>(a)] = spectral_radius_sym(lam);
        }
        if (need_inverse) out.norm_inv[c] = b * b;
      } catch (const Error& e) {
        failed[c] = 1;
        messages[c] = e.what();
      }
    }
  });
  for (std::size_t c = 0; c < n; ++c) {
    if (!failed[c]) continue;
    if (out.failures.empty()) out.message = messages[c];
    out.failures.push_back(c);
  }
  return out;
}

/// Max |eigenvalue| of P(v) P(|u|)^{-1} P(u_axis); sets `hyperbolic` false
/// on complex pairs.
double random_velocity_speed(const GpcMatrix& pv, const GpcMatrix& norm_inv, const GpcMatrix& s, bool& hyperbolic) {
  const GpcMatrix lam = pv * norm_inv * s;
  if (lam.rows() == 1) return std::abs(lam(0, 0));
  Eigen::EigenSolver<GpcMatrix> es(lam, false);
  if (es.info() != Eigen::Success) {
    hyperbolic = false;
    return 0.0;
  }
  const Eigen::VectorXcd ev = es.eigenvalues();
  const double radius = ev.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i).imag()) > 1e-10 * (1.0 + radius)) hyperbolic = false;
  return radius;
}

struct FaceFluxes {
  std::vector<double> flux;   // faces x (d * m)
  std::vector<double> sigma;  // per face
  std::vector<std::size_t> nonhyperbolic;
};

/// LLF fluxes on all faces normal to `axis`.
FaceFluxes face_pass(const SolverState& s, const CellPass& cells, int axis) {
  const Grid& g = s.grid;
  const GpcAlgebra& alg = s.alg();
  const VelocityCache& vc = *s.vcache;
  const std::size_t m = s.modes();
  const int d = g.dims;
  const std::size_t width = static_cast<std::size_t>(d) * m;
  const int fx = axis == 1 ? g.nx + 1 : g.nx;
  const int fy = axis == 1 ? g.ny : g.ny + 1;
  const std::size_t n_faces = static_cast<std::size_t>(fx) * static_cast<std::size_t>(fy);
  const auto& kern = simd::kernels();
  const bool conservative = s.form == Form::conservative;
  const CoeffField& vface = axis == 1 ? vc.x_face : vc.y_face;
  const std::vector<char>& vdet = axis == 1 ? vc.x_face_deterministic : vc.y_face_deterministic;
  const std::size_t ax = static_cast<std::size_t>(axis - 1);

  FaceFluxes out;
  out.flux.assign(n_faces * width, 0.0);
  out.sigma.assign(n_faces, 0.0);
  std::vector<char> bad(g.cells(), 0);

  parallel_for(n_faces, [&](std::size_t begin, std::size_t end) {
    std::vector<double> ul(width), ur(width), fl(width, 0.0), fr(width, 0.0);
    GpcMatrix pv;
    for (std::size_t f = begin; f < end; ++f) {
      const int i = static_cast<int>(f % static_cast<std::size_t>(fx));
      const int j = static_cast<int>(f / static_cast<std::size_t>(fx));
      int li, lj, ri, rj;
      if (axis == 1) {
        li = wrap(i - 1, g.nx, g.boundary), ri = wrap(i, g.nx, g.boundary);
        lj = rj = j;
      } else {
        lj = wrap(j - 1, g.ny, g.boundary), rj = wrap(j, g.ny, g.boundary);
        li = ri = i;
      }
      const std::size_t cl = g.index(li, lj), cr = g.index(ri, rj);
      for (int b = 0; b < d; ++b) {
        const CoeffField& uf = b == 0 ? s.u1 : s.u2;
        std::copy_n(uf.cell(cl).data(), m, ul.data() + static_cast<std::size_t>(b) * m);
        std::copy_n(uf.cell(cr).data(), m, ur.data() + static_cast<std::size_t>(b) * m);
      }
      double* fla = fl.data() + ax * m;
      double* fra = fr.data() + ax * m;
      const GpcVector& nl = cells.norm[cl];
      const GpcVector& nr = cells.norm[cr];
      double sigma;
      if (!conservative) {
        std::copy_n(nl.data(), m, fla);
        std::copy_n(nr.data(), m, fra);
        sigma = std::max(cells.sigma[cl][ax], cells.sigma[cr][ax]);
      } else if (vdet[f]) {
        const double v0 = vface.cell(f)(0);
        for (std::size_t k = 0; k < m; ++k) {
          fla[k] = v0 * nl(static_cast<Eigen::Index>(k));
          fra[k] = v0 * nr(static_cast<Eigen::Index>(k));
        }
        sigma = std::abs(v0) * std::max(cells.sigma[cl][ax], cells.sigma[cr][ax]);
      } else {
        alg.p_matrix_into(vface.cell(f), pv);
        Eigen::Map<GpcVector>(fla, static_cast<Eigen::Index>(m)) = pv * nl;
        Eigen::Map<GpcVector>(fra, static_cast<Eigen::Index>(m)) = pv * nr;
        const CoeffField& ua = axis == 1 ? s.u1 : s.u2;
        bool hyp_l = true, hyp_r = true;
        const double sl = random_velocity_speed(pv, cells.norm_inv[cl], alg.p_matrix(ua.cell(cl)), hyp_l);
        const double sr = random_velocity_speed(pv, cells.norm_inv[cr], alg.p_matrix(ua.cell(cr)), hyp_r);
        if (!hyp_l) bad[cl] = 1;
        if (!hyp_r) bad[cr] = 1;
        sigma = std::max(sl, sr);
      }
      out.sigma[f] = sigma;
      kern.llf_combine(out.flux.data() + f * width, fl.data(), fr.data(), ul.data(), ur.data(), sigma, width);
    }
  });

  // The two boundary faces of a periodic direction are one face.
  if (g.boundary == Boundary::periodic) {
    for (int k = 0; k < (axis == 1 ? g.ny : g.nx); ++k) {
      const std::size_t first = axis == 1 ? static_cast<std::size_t>(k) * static_cast<std::size_t>(fx)
                                          : static_cast<std::size_t>(k);
      const std::size_t last = axis == 1 ? first + static_cast<std::size_t>(g.nx)
                                         : static_cast<std::size_t>(g.ny) * static_cast<std::size_t>(fx) + static_cast<std::size_t>(k);
      std::copy_n(out.flux.data() + first * width, width, out.flux.data() + last * width);
      out.sigma[last] = out.sigma[first];
    }
  }
  for (std::size_t c = 0; c < bad.size(); ++c)
    if (bad[c]) out.nonhyperbolic.push_back(c);
  return out;
}

StepResult failed(const SolverState& s, ErrorKind kind, std::string message, std::vector<std::size_t> cells = {}) {
  StepResult r{s, {}};
  r.report.halted = true;
  r.report.error = kind;
  r.report.message = std::move(message);
  if (kind == ErrorKind::NonHyperbolic)
    r.report.nonhyperbolic_cells = std::move(cells);
  else
    r.report.positivity_failures = std::move(cells);
  return r;
}

bool any_random_face(const VelocityCache& vc) {
  auto random = [](const std::vector<char>& v) { return std::any_of(v.begin(), v.end(), [](char c) { return !c; }); };
  return random(vc.x_face_deterministic) || random(vc.y_face_deterministic);
}

StepResult advance(const SolverState& s, Form form, double dt_limit, std::optional<double> forced_dt) {
  if (s.form != form)
    return failed(s, ErrorKind::InvalidArgument, "step: state form does not match the requested scheme");
  if (!s.vcache || !s.algebra) return failed(s, ErrorKind::InvalidArgument, "step: state is not initialized");
  const Grid& g = s.grid;
  const std::size_t n = g.cells();
  const std::size_t m = s.modes();
  const int d = g.dims;
  const VelocityCache& vc = *s.vcache;
  const GpcAlgebra& alg = s.alg();
  const bool capacity = form == Form::capacity;

  if (capacity) {
    std::vector<std::size_t> singular;
    for (std::size_t c = 0; c < n; ++c)
      if (vc.p_center_min_abs[c] <= kVelocityInvertibility) singular.push_back(c);
    if (!singular.empty())
      return failed(s, ErrorKind::SingularVelocityOperator,
                    "P(v) is singular at cell centres " + cell_list(singular), singular);
  }

  const bool need_inverse = !capacity && any_random_face(vc);
  const CellPass cells = cell_pass(s, need_inverse);
  if (!cells.failures.empty())
    return failed(s, ErrorKind::NotSpd,
                  "positivity lost in cells " + cell_list(cells.failures) + ": " + cells.message, cells.failures);

  FaceFluxes xf = face_pass(s, cells, 1);
  FaceFluxes yf;
  if (d == 2) yf = face_pass(s, cells, 2);
  {
    std::vector<std::size_t> nonhyp = xf.nonhyperbolic;
    nonhyp.insert(nonhyp.end(), yf.nonhyperbolic.begin(), yf.nonhyperbolic.end());
    std::sort(nonhyp.begin(), nonhyp.end());
    nonhyp.erase(std::unique(nonhyp.begin(), nonhyp.end()), nonhyp.end());
    if (!nonhyp.empty())
      return failed(s, ErrorKind::NonHyperbolic,
                    "complex conservative eigenvalues in cells " + cell_list(nonhyp) + "; use the capacity form",
                    nonhyp);
  }

  // CFL rate per cell: adjacent face speeds over the spacing, summed over
  // directions; the capacity form scales by the spectral radius of P(v).
  const std::size_t fxw = static_cast<std::size_t>(g.nx) + 1;
  double max_rate = 0.0, max_speed = 0.0;
  for (double sgm : xf.sigma) max_speed = std::max(max_speed, sgm);
  for (double sgm : yf.sigma) max_speed = std::max(max_speed, sgm);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t c = g.index(i, j);
      const std::size_t f = static_cast<std::size_t>(j) * fxw + static_cast<std::size_t>(i);
      double rate = std::max(xf.sigma[f], xf.sigma[f + 1]) / g.dx;
      if (d == 2) {
        const std::size_t fy0 = static_cast<std::size_t>(j) * static_cast<std::size_t>(g.nx) + static_cast<std::size_t>(i);
        rate += std::max(yf.sigma[fy0], yf.sigma[fy0 + static_cast<std::size_t>(g.nx)]) / g.dy;
      }
      if (capacity) rate *= vc.p_center_radius[c];
      max_rate = std::max(max_rate, rate);
    }
  }

  double dt;
  if (forced_dt) {
    dt = *forced_dt;
    if (!(dt >= 0.0)) return failed(s, ErrorKind::InvalidArgument, "step: forced dt must be nonnegative");
    if (dt * max_rate > s.cfl * (1.0 + 1e-12)) {
      StepResult r = failed(s, ErrorKind::CflViolation,
                            "dt = " + std::to_string(dt) + " violates the CFL bound " +
                                std::to_string(s.cfl / max_rate));
      r.report.max_rate = max_rate;
      r.report.max_wavespeed = max_speed;
      return r;
    }
  } else {
    dt = max_rate > 0.0 ? s.cfl / max_rate : INFINITY;
    dt = std::min(dt, dt_limit);
    if (!std::isfinite(dt))
      return failed(s, ErrorKind::InvalidArgument, "step: all wave speeds vanish and no time limit was given");
  }

  StepResult r{s, {}};
  SolverState& out = r.state;
  const auto& kern = simd::kernels();
  const std::size_t width = static_cast<std::size_t>(d) * m;
  const std::size_t fyw = static_cast<std::size_t>(g.nx);

  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    GpcVector diff(static_cast<Eigen::Index>(m));
    for (std::size_t c = begin; c < end; ++c) {
      const std::size_t i = c % static_cast<std::size_t>(g.nx), j = c / static_cast<std::size_t>(g.nx);
      const double* xl = xf.flux.data() + (j * fxw + i) * width;
      const double* xr = xl + width;
      const double* yl = d == 2 ? yf.flux.data() + (j * fyw + i) * width : nullptr;
      const double* yr = d == 2 ? yl + fyw * width : nullptr;
      for (int b = 0; b < d; ++b) {
        const std::size_t off = static_cast<std::size_t>(b) * m;
        double* u = (b == 0 ? out.u1 : out.u2).cell(c).data();
        if (!capacity) {
          kern.flux_update(u, xr + off, xl + off, dt / g.dx, m);
          if (d == 2) kern.flux_update(u, yr + off, yl + off, dt / g.dy, m);
        } else {
          for (std::size_t k = 0; k < m; ++k) {
            double v = (xr[off + k] - xl[off + k]) / g.dx;
            if (d == 2) v += (yr[off + k] - yl[off + k]) / g.dy;
            diff(static_cast<Eigen::Index>(k)) = v;
          }
          const CoeffField& dv = b == 0 ? vc.ddx : vc.ddy;
          const GpcVector incr = vc.p_center[c] * diff + alg.product(dv.cell(c), cells.norm[c]);
          Eigen::Map<GpcVector>(u, static_cast<Eigen::Index>(m)) -= dt * incr;
        }
      }
      Eigen::Map<GpcVector>(out.phi.cell(c).data(), static_cast<Eigen::Index>(m)) -=
          dt * (vc.p_center[c] * cells.norm[c]);
    }
  });

  out.t = s.t + dt;
  out.step_count = s.step_count + 1;
  r.report.dt_used = dt;
  r.report.max_wavespeed = max_speed;
  r.report.max_rate = max_rate;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------

VelocityCache VelocityCache::build(const Grid& grid, const VelocitySpec& spec, const GpcAlgebra& alg) {
  grid.validate();
  const std::size_t m = alg.size();
  const std::size_t n = grid.cells();
  VelocityCache vc;
  vc.center = CoeffField(n, m);
  vc.ddx = CoeffField(n, m);
  vc.ddy = CoeffField(n, m);
  vc.p_center.resize(n);
  vc.p_center_radius.resize(n);
  vc.p_center_min_abs.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    const Point p = grid.center(c);
    vc.center.cell(c) = spec.at(p, m);
    const auto grad = spec.gradient_at(p, m);
    vc.ddx.cell(c) = grad[0];
    if (grid.dims == 2) vc.ddy.cell(c) = grad[1];
    vc.p_center[c] = alg.p_matrix(vc.center.cell(c));
    const Eigen::VectorXd ev = symmetric_eigen(vc.p_center[c]).values;
    vc.p_center_radius[c] = ev.cwiseAbs().maxCoeff();
    vc.p_center_min_abs[c] = ev.cwiseAbs().minCoeff();
  }
  const std::size_t nxf = static_cast<std::size_t>(grid.nx + 1) * static_cast<std::size_t>(grid.ny);
  vc.x_face = CoeffField(nxf, m);
  vc.x_face_deterministic.resize(nxf);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i <= grid.nx; ++i) {
      const std::size_t f = static_cast<std::size_t>(j) * static_cast<std::size_t>(grid.nx + 1) + static_cast<std::size_t>(i);
      vc.x_face.cell(f) = spec.at(grid.x_face(i, j), m);
      vc.x_face_deterministic[f] = is_deterministic(vc.x_face.cell(f));
    }
  if (grid.dims == 2) {
    const std::size_t nyf = static_cast<std::size_t>(grid.nx) * static_cast<std::size_t>(grid.ny + 1);
    vc.y_face = CoeffField(nyf, m);
    vc.y_face_deterministic.resize(nyf);
    for (int j = 0; j <= grid.ny; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        const std::size_t f = static_cast<std::size_t>(j) * static_cast<std::size_t>(grid.nx) + static_cast<std::size_t>(i);
        vc.y_face.cell(f) = spec.at(grid.y_face(i, j), m);
        vc.y_face_deterministic[f] = is_deterministic(vc.y_face.cell(f));
      }
  }
  return vc;
}

GradState SolverState::grad(std::size_t c) const {
  GradState g;
  g.u1 = u1.cell(c);
  if (grid.dims == 2) g.u2 = GpcVector(u2.cell(c));
  return g;
}

SolverState init_deterministic(const Grid& grid, const InitialCondition& phi0, const VelocitySpec& vspec,
                               std::shared_ptr<const GpcAlgebra> algebra, const SolverOptions& opts) {
  grid.validate();
  if (!algebra) throw Error(ErrorKind::InvalidArgument, "init_deterministic: null algebra");
  if (!phi0.phi) throw Error(ErrorKind::InvalidArgument, "init_deterministic: phi0 missing");
  if (!(opts.cfl > 0.0 && opts.cfl < 1.0)) throw Error(ErrorKind::InvalidArgument, "cfl must lie in (0, 1)");
  const std::size_t n = grid.cells();
  const std::size_t m = algebra->size();

  SolverState s;
  s.grid = grid;
  s.form = opts.form;
  s.cfl = opts.cfl;
  s.norm_floor = opts.norm_floor;
  s.algebra = algebra;
  s.velocity = std::make_shared<const VelocitySpec>(vspec);
  s.vcache = std::make_shared<const VelocityCache>(VelocityCache::build(grid, vspec, *algebra));
  s.phi = CoeffField(n, m);
  s.u1 = CoeffField(n, m);
  if (grid.dims == 2) s.u2 = CoeffField(n, m);

  std::vector<std::size_t> degenerate;
  for (std::size_t c = 0; c < n; ++c) {
    const Point p = grid.center(c);
    s.phi.cell(c)(0) = phi0.phi(p);
    std::array<double, 2> gr{0.0, 0.0};
    if (phi0.gradient) {
      gr = phi0.gradient(p);
    } else {
      gr[0] = (phi0.phi({p.x + grid.dx, p.y}) - phi0.phi({p.x - grid.dx, p.y})) / (2.0 * grid.dx);
      if (grid.dims == 2)
        gr[1] = (phi0.phi({p.x, p.y + grid.dy}) - phi0.phi({p.x, p.y - grid.dy})) / (2.0 * grid.dy);
    }
    if (grid.dims == 1) gr[1] = 0.0;
    s.u1.cell(c)(0) = gr[0];
    if (grid.dims == 2) s.u2.cell(c)(0) = gr[1];
    if (std::hypot(gr[0], gr[1]) <= kDegenerateGradient) degenerate.push_back(c);
  }
  if (!degenerate.empty())
    throw Error(ErrorKind::DegenerateGradient, "initial gradient vanishes in cells " + cell_list(degenerate),
                degenerate);
  return s;
}

StackedFlux llf_flux_conservative(const GpcAlgebra& alg, const GradState& ul, const GradState& ur,
                                  const GpcVector& v_face, int axis) {
  const int d = ul.dims();
  if (ur.dims() != d || axis < 1 || axis > d) throw Error(ErrorKind::InvalidArgument, "llf_flux: bad arguments");
  const SpectrumReport sl = spectrum_conservative(alg, ul, v_face, Direction::axis(axis));
  const SpectrumReport sr = spectrum_conservative(alg, ur, v_face, Direction::axis(axis));
  if (!sl.hyperbolic || !sr.hyperbolic)
    throw Error(ErrorKind::NonHyperbolic, "llf_flux_conservative: complex eigenvalues");
  const double sigma = std::max(sl.max_abs, sr.max_abs);
  const StackedFlux fl = flux_conservative(alg, axis, ul, v_face);
  const StackedFlux fr = flux_conservative(alg, axis, ur, v_face);
  StackedFlux out(static_cast<std::size_t>(d));
  for (int b = 0; b < d; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    out[bi] = 0.5 * (fl[bi] + fr[bi]) - 0.5 * sigma * (ur.component(b + 1) - ul.component(b + 1));
  }
  return out;
}

StackedFlux llf_flux_capacity(const GpcAlgebra& alg, const GradState& ul, const GradState& ur, int axis) {
  const int d = ul.dims();
  if (ur.dims() != d || axis < 1 || axis > d) throw Error(ErrorKind::InvalidArgument, "llf_flux: bad arguments");
  const double sigma = std::max(spectrum_capacity(alg, ul, Direction::axis(axis)).max_abs,
                                spectrum_capacity(alg, ur, Direction::axis(axis)).max_abs);
  const StackedFlux fl = flux_capacity(alg, axis, ul);
  const StackedFlux fr = flux_capacity(alg, axis, ur);
  StackedFlux out(static_cast<std::size_t>(d));
  for (int b = 0; b < d; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    out[bi] = 0.5 * (fl[bi] + fr[bi]) - 0.5 * sigma * (ur.component(b + 1) - ul.component(b + 1));
  }
  return out;
}

StepResult step_conservative(const SolverState& state, double dt_limit, std::optional<double> forced_dt) {
  return advance(state, Form::conservative, dt_limit, forced_dt);
}

StepResult step_capacity(const SolverState& state, double dt_limit, std::optional<double> forced_dt) {
  return advance(state, Form::capacity, dt_limit, forced_dt);
}

StepResult step(const SolverState& state, double dt_limit, std::optional<double> forced_dt) {
  return advance(state, state.form, dt_limit, forced_dt);
}

CoeffField step_phi(const SolverState& state, double dt) {
  const std::size_t n = state.grid.cells();
  const VelocityCache& vc = *state.vcache;
  CoeffField out = state.phi;
  std::vector<std::size_t> failures;
  std::string message;
  for (std::size_t c = 0; c < n; ++c) {
    if (vc.center.cell(c).isZero(0.0)) continue;
    try {
      out.cell(c) -= dt * (vc.p_center[c] * grad_norm(state.alg(), state.grad(c), state.norm_floor));
    } catch (const Error& e) {
      if (failures.empty()) message = e.what();
      failures.push_back(c);
    }
  }
  if (!failures.empty())
    throw Error(ErrorKind::NotSpd, "step_phi: positivity lost in cells " + cell_list(failures) + ": " + message,
                failures);
  return out;
}

double gradient_consistency(const SolverState& s) {
  const Grid& g = s.grid;
  const std::size_t m = s.modes();
  double worst = 0.0;
  auto derivative = [&](int i, int j, int axis, std::size_t k) {
    const int n = axis == 1 ? g.nx : g.ny;
    const double h = axis == 1 ? g.dx : g.dy;
    const int pos = axis == 1 ? i : j;
    auto at = [&](int q) {
      const std::size_t c = axis == 1 ? g.index(q, j) : g.index(i, q);
      return s.phi.cell(c)(static_cast<Eigen::Index>(k));
    };
    if (pos == 0) return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
    if (pos == n - 1) return (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
    return (at(pos + 1) - at(pos - 1)) / (2.0 * h);
  };
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t c = g.index(i, j);
      for (std::size_t k = 0; k < m; ++k) {
        worst = std::max(worst, std::abs(derivative(i, j, 1, k) - s.u1.cell(c)(static_cast<Eigen::Index>(k))));
        if (g.dims == 2)
          worst = std::max(worst, std::abs(derivative(i, j, 2, k) - s.u2.cell(c)(static_cast<Eigen::Index>(k))));
      }
    }
  return worst;
}

Eigen::MatrixXd effective_volumes(const VelocitySpec& vspec, const Grid& grid, const GpcAlgebra& alg) {
  grid.validate();
  if (grid.dims != 1) throw Error(ErrorKind::InvalidArgument, "effective_volumes: 1D grids only");
  const auto m = static_cast<Eigen::Index>(alg.size());
  Eigen::MatrixXd out(grid.nx, m);
  std::vector<std::size_t> singular;
  for (int i = 0; i < grid.nx; ++i) {
    const VelocityDiagonalization diag = diagonalize_velocity(alg, vspec.at(grid.center(i, 0), alg.size()));
    if (diag.values.cwiseAbs().minCoeff() <= kVelocityInvertibility) {
      singular.push_back(static_cast<std::size_t>(i));
      continue;
    }
    for (Eigen::Index l = 0; l < m; ++l) out(i, l) = grid.dx / diag.values(l);
  }
  if (!singular.empty())
    throw Error(ErrorKind::SingularVelocityOperator, "effective_volumes: P(v) singular in cells " + cell_list(singular),
                singular);
  return out;
}

Snapshot take_snapshot(const SolverState& state, double max_wavespeed) {
  Snapshot snap;
  snap.t = state.t;
  snap.step = state.step_count;
  snap.phi = state.phi;
  snap.u1 = state.u1;
  snap.u2 = state.u2;
  snap.gradient_consistency = gradient_consistency(state);
  snap.max_wavespeed = max_wavespeed;
  return snap;
}

RunResult run(const SolverState& state, double t_end, int snapshot_every, long max_steps) {
  if (t_end < state.t) throw Error(ErrorKind::InvalidArgument, "run: t_end lies before the current time");
  RunResult out{state, {}, {}, true};
  out.snapshots.push_back(take_snapshot(out.state));
  long last_snap = out.state.step_count;
  double speed = 0.0;
  while (out.state.t < t_end) {
    if (out.state.step_count - state.step_count >= max_steps) {
      out.completed = false;
      out.last_report.halted = true;
      out.last_report.error = ErrorKind::NonConvergence;
      out.last_report.message = "run: step budget exhausted before t_end";
      break;
    }
    const double remaining = t_end - out.state.t;
    StepResult r = step(out.state, remaining);
    out.last_report = r.report;
    if (r.report.halted) {
      out.completed = false;
      break;
    }
    speed = r.report.max_wavespeed;
    out.state = std::move(r.state);
    if (r.report.dt_used >= remaining) out.state.t = t_end;
    if (snapshot_every > 0 && (out.state.step_count - state.step_count) % snapshot_every == 0) {
      out.snapshots.push_back(take_snapshot(out.state, speed));
      last_snap = out.state.step_count;
    }
  }
  if (out.state.step_count != last_snap) out.snapshots.push_back(take_snapshot(out.state, speed));
  return out;
}

}  // namespace sgls
