#include "sgls/mc_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace sgls {

ScalarVelocity ScalarVelocity::constant(double v) {
  return {[v](Point) { return v; }, [](Point) { return std::array<double, 2>{0.0, 0.0}; }};
}

ScalarVelocity ScalarVelocity::realization(const VelocitySpec& spec, const GpcBasis& basis, std::vector<double> xi) {
  if (static_cast<int>(xi.size()) != basis.dim())
    throw Error(ErrorKind::InvalidArgument, "velocity realization: xi has the wrong dimension");
  const GpcVector weights = basis.eval_all(xi);
  const std::size_t n = basis.size();
  return {[spec, weights, n](Point p) { return spec.at(p, n).dot(weights); },
          [spec, weights, n](Point p) {
            const auto g = spec.gradient_at(p, n);
            return std::array<double, 2>{g[0].dot(weights), g[1].dot(weights)};
          }};
}

// ---------------------------------------------------------------------------

DeterministicSolver::DeterministicSolver(const Grid& grid, const InitialCondition& phi0, ScalarVelocity velocity,
                                         Form form, double cfl)
    : grid_(grid), form_(form), cfl_(cfl) {
  grid_.validate();
  if (!(cfl > 0.0 && cfl < 1.0)) throw Error(ErrorKind::InvalidArgument, "cfl must lie in (0, 1)");
  const int nx = grid_.nx, ny = grid_.ny;
  const std::size_t n = grid_.cells();
  phi_.resize(n);
  ux_.resize(n);
  uy_.assign(n, 0.0);
  vc_.resize(n);
  dvx_.resize(n);
  dvy_.assign(n, 0.0);
  std::vector<std::size_t> flat;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t c = static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i);
      const double x = grid_.x0 + i * grid_.dx;
      const double y = grid_.y0 + j * grid_.dy;
      phi_[c] = phi0.phi({x, y});
      if (phi0.gradient) {
        const auto g = phi0.gradient({x, y});
        ux_[c] = g[0];
        if (grid_.dims == 2) uy_[c] = g[1];
      } else {
        ux_[c] = (phi0.phi({x + grid_.dx, y}) - phi0.phi({x - grid_.dx, y})) / (2.0 * grid_.dx);
        if (grid_.dims == 2) uy_[c] = (phi0.phi({x, y + grid_.dy}) - phi0.phi({x, y - grid_.dy})) / (2.0 * grid_.dy);
      }
      if (std::sqrt(ux_[c] * ux_[c] + uy_[c] * uy_[c]) <= 1e-12) flat.push_back(c);
      vc_[c] = velocity.value({x, y});
      const auto dv = velocity.gradient({x, y});
      dvx_[c] = dv[0];
      if (grid_.dims == 2) dvy_[c] = dv[1];
    }
  }
  if (!flat.empty())
    throw Error(ErrorKind::DegenerateGradient,
                "initial gradient vanishes in " + std::to_string(flat.size()) + " cells", flat);
  vfx_.resize(static_cast<std::size_t>(nx + 1) * static_cast<std::size_t>(ny));
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i <= nx; ++i)
      vfx_[static_cast<std::size_t>(j) * static_cast<std::size_t>(nx + 1) + static_cast<std::size_t>(i)] =
          velocity.value({grid_.x0 + (i - 0.5) * grid_.dx, grid_.y0 + j * grid_.dy});
  if (grid_.dims == 2) {
    vfy_.resize(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny + 1));
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i < nx; ++i)
        vfy_[static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i)] =
            velocity.value({grid_.x0 + i * grid_.dx, grid_.y0 + (j - 0.5) * grid_.dy});
  }
  if (form_ == Form::capacity)
    for (std::size_t c = 0; c < n; ++c)
      if (std::abs(vc_[c]) <= 1e-10)
        throw Error(ErrorKind::SingularVelocityOperator, "velocity vanishes at a cell centre", {c});
}

double DeterministicSolver::advance(std::optional<double> forced, double dt_limit) {
  const int nx = grid_.nx, ny = grid_.ny;
  const bool two_d = grid_.dims == 2;
  const bool periodic = grid_.boundary == Boundary::periodic;
  const std::size_t n = grid_.cells();
  auto cell = [nx](int i, int j) { return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i); };
  auto nb = [periodic](int i, int count) {
    if (periodic) return (i + count) % count;
    return i < 0 ? 0 : (i >= count ? count - 1 : i);
  };

  std::vector<double> norm(n);
  for (std::size_t c = 0; c < n; ++c) {
    norm[c] = std::sqrt(ux_[c] * ux_[c] + uy_[c] * uy_[c]);
    if (!(norm[c] > 1e-10 * (1.0 + norm[c])))
      throw Error(ErrorKind::NotSpd, "gradient norm vanishes in cell " + std::to_string(c), {c});
  }

  // x faces: flux of (ux, uy) and wave speed.
  const std::size_t wx = static_cast<std::size_t>(nx + 1);
  std::vector<double> gx_u(wx * static_cast<std::size_t>(ny)), gx_v(gx_u.size()), sx(gx_u.size());
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      const std::size_t f = static_cast<std::size_t>(j) * wx + static_cast<std::size_t>(i);
      if (periodic && i == nx) {
        const std::size_t f0 = static_cast<std::size_t>(j) * wx;
        gx_u[f] = gx_u[f0], gx_v[f] = gx_v[f0], sx[f] = sx[f0];
        continue;
      }
      const std::size_t l = cell(nb(i - 1, nx), j), r = cell(nb(i, nx), j);
      double hl = norm[l], hr = norm[r];
      double s = std::max(std::abs(ux_[l]) / norm[l], std::abs(ux_[r]) / norm[r]);
      if (form_ == Form::conservative) {
        const double v = vfx_[f];
        hl *= v, hr *= v;
        s *= std::abs(v);
      }
      gx_u[f] = 0.5 * (hl + hr) - 0.5 * s * (ux_[r] - ux_[l]);
      gx_v[f] = -0.5 * s * (uy_[r] - uy_[l]);
      sx[f] = s;
    }
  }
  // y faces.
  const std::size_t wy = static_cast<std::size_t>(nx);
  std::vector<double> gy_u, gy_v, sy;
  if (two_d) {
    gy_u.resize(wy * static_cast<std::size_t>(ny + 1));
    gy_v.resize(gy_u.size());
    sy.resize(gy_u.size());
    for (int j = 0; j <= ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t f = static_cast<std::size_t>(j) * wy + static_cast<std::size_t>(i);
        if (periodic && j == ny) {
          gy_u[f] = gy_u[static_cast<std::size_t>(i)], gy_v[f] = gy_v[static_cast<std::size_t>(i)];
          sy[f] = sy[static_cast<std::size_t>(i)];
          continue;
        }
        const std::size_t l = cell(i, nb(j - 1, ny)), r = cell(i, nb(j, ny));
        double hl = norm[l], hr = norm[r];
        double s = std::max(std::abs(uy_[l]) / norm[l], std::abs(uy_[r]) / norm[r]);
        if (form_ == Form::conservative) {
          const double v = vfy_[f];
          hl *= v, hr *= v;
          s *= std::abs(v);
        }
        gy_u[f] = -0.5 * s * (ux_[r] - ux_[l]);
        gy_v[f] = 0.5 * (hl + hr) - 0.5 * s * (uy_[r] - uy_[l]);
        sy[f] = s;
      }
    }
  }

  double rate_max = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const std::size_t f = static_cast<std::size_t>(j) * wx + static_cast<std::size_t>(i);
      double rate = std::max(sx[f], sx[f + 1]) / grid_.dx;
      if (two_d) {
        const std::size_t g = static_cast<std::size_t>(j) * wy + static_cast<std::size_t>(i);
        rate += std::max(sy[g], sy[g + wy]) / grid_.dy;
      }
      if (form_ == Form::capacity) rate *= std::abs(vc_[cell(i, j)]);
      rate_max = std::max(rate_max, rate);
    }

  double dt;
  if (forced) {
    dt = *forced;
    if (dt * rate_max > cfl_ * (1.0 + 1e-12)) throw Error(ErrorKind::CflViolation, "forced dt exceeds the CFL bound");
  } else {
    dt = rate_max > 0.0 ? std::min(cfl_ / rate_max, dt_limit) : dt_limit;
    if (!std::isfinite(dt)) throw Error(ErrorKind::InvalidArgument, "no wave speed and no time limit");
  }

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t c = cell(i, j);
      const std::size_t f = static_cast<std::size_t>(j) * wx + static_cast<std::size_t>(i);
      const std::size_t g = static_cast<std::size_t>(j) * wy + static_cast<std::size_t>(i);
      if (form_ == Form::conservative) {
        ux_[c] -= dt / grid_.dx * (gx_u[f + 1] - gx_u[f]);
        if (two_d) {
          ux_[c] -= dt / grid_.dy * (gy_u[g + wy] - gy_u[g]);
          uy_[c] -= dt / grid_.dx * (gx_v[f + 1] - gx_v[f]);
          uy_[c] -= dt / grid_.dy * (gy_v[g + wy] - gy_v[g]);
        }
      } else {
        double du = (gx_u[f + 1] - gx_u[f]) / grid_.dx;
        double dv = 0.0;
        if (two_d) {
          du += (gy_u[g + wy] - gy_u[g]) / grid_.dy;
          dv = (gx_v[f + 1] - gx_v[f]) / grid_.dx + (gy_v[g + wy] - gy_v[g]) / grid_.dy;
        }
        ux_[c] -= dt * (vc_[c] * du + dvx_[c] * norm[c]);
        if (two_d) uy_[c] -= dt * (vc_[c] * dv + dvy_[c] * norm[c]);
      }
      phi_[c] -= dt * (vc_[c] * norm[c]);
    }
  }
  t_ += dt;
  ++steps_;
  return dt;
}

double DeterministicSolver::step(double dt_limit) { return advance(std::nullopt, dt_limit); }

double DeterministicSolver::step_forced(double dt) { return advance(dt, INFINITY); }

DeterministicSnapshot DeterministicSolver::snapshot() const { return {t_, steps_, phi_, ux_, uy_}; }

std::vector<DeterministicSnapshot> DeterministicSolver::run_until(double t_end, int snapshot_every) {
  std::vector<DeterministicSnapshot> out{snapshot()};
  long last = steps_;
  const long first = steps_;
  while (t_ < t_end) {
    const double remaining = t_end - t_;
    const double dt = step(remaining);
    if (dt >= remaining) t_ = t_end;
    if (snapshot_every > 0 && (steps_ - first) % snapshot_every == 0) {
      out.push_back(snapshot());
      last = steps_;
    }
  }
  if (steps_ != last) out.push_back(snapshot());
  return out;
}

std::vector<DeterministicSnapshot> deterministic_solve(const Grid& grid, const InitialCondition& phi0,
                                                       const ScalarVelocity& velocity, double t_end, Form form,
                                                       double cfl, int snapshot_every) {
  DeterministicSolver solver(grid, phi0, velocity, form, cfl);
  return solver.run_until(t_end, snapshot_every);
}

// ---------------------------------------------------------------------------

std::vector<char> zero_set_cells(const Grid& grid, const std::vector<double>& phi) {
  std::vector<char> out(phi.size(), 0);
  auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) {
      const std::size_t c = grid.index(i, j);
      const int s = sign(phi[c]);
      if (s == 0) {
        out[c] = 1;
        continue;
      }
      const int di[4] = {-1, 1, 0, 0}, dj[4] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        const int ii = i + di[k], jj = j + dj[k];
        if (ii < 0 || ii >= grid.nx || jj < 0 || jj >= grid.ny) continue;
        if (sign(phi[grid.index(ii, jj)]) != s) {
          out[c] = 1;
          break;
        }
      }
    }
  return out;
}

namespace {

/// Weighted running statistics of one chunk of samples.
struct Partial {
  double weight = 0.0;
  std::size_t count = 0;
  std::vector<double> mean, m2;
  std::vector<std::vector<double>> cdf;
  std::vector<char> any, all;
};

Partial merge(const Partial& a, const Partial& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  Partial out = a;
  out.weight = a.weight + b.weight;
  out.count = a.count + b.count;
  for (std::size_t c = 0; c < a.mean.size(); ++c) {
    const double delta = b.mean[c] - a.mean[c];
    out.mean[c] = a.mean[c] + delta * (b.weight / out.weight);
    out.m2[c] = a.m2[c] + b.m2[c] + delta * delta * (a.weight * b.weight / out.weight);
    out.any[c] = a.any[c] || b.any[c];
    out.all[c] = a.all[c] && b.all[c];
  }
  for (std::size_t e = 0; e < a.cdf.size(); ++e)
    for (std::size_t c = 0; c < a.mean.size(); ++c) out.cdf[e][c] = a.cdf[e][c] + b.cdf[e][c];
  return out;
}

Partial tree_merge(const std::vector<Partial>& parts, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return parts[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  return merge(tree_merge(parts, lo, mid), tree_merge(parts, mid, hi));
}

}  // namespace

EnsembleStats ensemble(const Grid& grid, const InitialCondition& phi0, const VelocitySpec& vspec,
                       const GpcBasis& basis, double t_end, const EnsembleMode& mode, const EnsembleOptions& opts) {
  const int L = basis.dim();
  std::vector<std::vector<double>> xis;
  std::vector<double> weights;
  EnsembleStats stats;
  bool monte_carlo = false;

  if (const auto* mc = std::get_if<MonteCarlo>(&mode)) {
    if (mc->samples == 0) throw Error(ErrorKind::InvalidArgument, "ensemble: need at least one sample");
    monte_carlo = true;
    stats.seed = mc->seed;
    std::mt19937_64 rng(mc->seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    xis.resize(mc->samples, std::vector<double>(static_cast<std::size_t>(L)));
    for (auto& xi : xis)
      for (double& x : xi) x = dist(rng);
    weights.assign(mc->samples, 1.0 / static_cast<double>(mc->samples));
  } else {
    const auto& col = std::get<Collocation>(mode);
    if (col.nodes < 1) throw Error(ErrorKind::InvalidArgument, "ensemble: need at least one collocation node");
    const QuadratureRule rule = tensor_gauss_legendre(L, col.nodes);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      std::vector<double> xi(static_cast<std::size_t>(L));
      for (int d = 0; d < L; ++d) xi[static_cast<std::size_t>(d)] = rule.nodes(d, static_cast<Eigen::Index>(q));
      xis.push_back(std::move(xi));
      weights.push_back(rule.weights[q]);
    }
  }

  const std::size_t n_samples = xis.size();
  const std::size_t cells = grid.cells();
  const std::size_t chunk = std::max<std::size_t>(1, opts.chunk);
  const std::size_t n_eps = opts.epsilons.size();
  std::vector<Partial> parts;

  for (std::size_t begin = 0; begin < n_samples; begin += chunk) {
    const std::size_t end = std::min(n_samples, begin + chunk);
    std::vector<std::vector<double>> fields(end - begin);
    parallel_for(end - begin, [&](std::size_t a, std::size_t b) {
      for (std::size_t s = a; s < b; ++s) {
        DeterministicSolver solver(grid, phi0, ScalarVelocity::realization(vspec, basis, xis[begin + s]), opts.form,
                                   opts.cfl);
        solver.run_until(t_end);
        fields[s] = solver.phi();
      }
    });

    Partial p;
    p.mean.assign(cells, 0.0);
    p.m2.assign(cells, 0.0);
    p.cdf.assign(n_eps, std::vector<double>(cells, 0.0));
    p.any.assign(cells, 0);
    p.all.assign(cells, 1);
    for (std::size_t s = 0; s < fields.size(); ++s) {
      const double w = weights[begin + s];
      const auto& f = fields[s];
      p.weight += w;
      ++p.count;
      for (std::size_t c = 0; c < cells; ++c) {
        const double delta = f[c] - p.mean[c];
        p.mean[c] += delta * (w / p.weight);
        p.m2[c] += w * delta * (f[c] - p.mean[c]);
      }
      for (std::size_t e = 0; e < n_eps; ++e)
        for (std::size_t c = 0; c < cells; ++c)
          if (std::abs(f[c]) <= opts.epsilons[e]) p.cdf[e][c] += w;
      const std::vector<char> zs = zero_set_cells(grid, f);
      for (std::size_t c = 0; c < cells; ++c) {
        p.any[c] = p.any[c] || zs[c];
        p.all[c] = p.all[c] && zs[c];
      }
      if (opts.keep_runs) stats.runs.push_back({xis[begin + s], w, f});
    }
    parts.push_back(std::move(p));
  }

  const Partial total = tree_merge(parts, 0, parts.size());
  stats.samples = n_samples;
  stats.weight_sum = total.weight;
  stats.t = t_end;
  stats.mean = total.mean;
  stats.variance.resize(cells);
  stats.std_error.assign(cells, 0.0);
  for (std::size_t c = 0; c < cells; ++c) {
    stats.variance[c] = std::max(0.0, total.m2[c] / total.weight);
    if (monte_carlo && n_samples > 1)
      stats.std_error[c] = std::sqrt(stats.variance[c] / static_cast<double>(n_samples - 1));
  }
  stats.cdf = total.cdf;
  stats.union_envelope = total.any;
  stats.intersection_envelope = total.all;
  return stats;
}

}  // namespace sgls
