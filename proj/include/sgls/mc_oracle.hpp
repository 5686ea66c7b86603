#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "sgls/common.hpp"
#include "sgls/fv_solver.hpp"
#include "sgls/gpc_basis.hpp"
#include "sgls/velocity.hpp"

namespace sgls {

/// One velocity realization v(x) with its gradient.
struct ScalarVelocity {
  std::function<double(Point)> value;
  std::function<std::array<double, 2>(Point)> gradient;

  static ScalarVelocity constant(double v);
  /// v(x, xi) = sum_k v_k(x) phi_k(xi).
  static ScalarVelocity realization(const VelocitySpec& spec, const GpcBasis& basis, std::vector<double> xi);
};

struct DeterministicSnapshot {
  double t = 0.0;
  long step = 0;
  std::vector<double> phi, ux, uy;
};

/// Scalar local Lax-Friedrichs level-set solver for a single velocity
/// realization. Written without the Galerkin machinery so it can check it.
class DeterministicSolver {
 public:
  DeterministicSolver(const Grid& grid, const InitialCondition& phi0, ScalarVelocity velocity,
                      Form form = Form::conservative, double cfl = 0.45);

  /// One explicit Euler step, dt <= dt_limit; returns dt. Throws NotSpd on a
  /// vanishing gradient, CflViolation for a forced dt above the bound.
  double step(double dt_limit = INFINITY);
  double step_forced(double dt);
  /// Steps to t_end; snapshots at start, every `snapshot_every` steps and end.
  std::vector<DeterministicSnapshot> run_until(double t_end, int snapshot_every = 0);

  DeterministicSnapshot snapshot() const;
  const Grid& grid() const noexcept { return grid_; }
  double t() const noexcept { return t_; }
  long steps() const noexcept { return steps_; }
  const std::vector<double>& phi() const noexcept { return phi_; }
  const std::vector<double>& ux() const noexcept { return ux_; }
  const std::vector<double>& uy() const noexcept { return uy_; }

 private:
  double advance(std::optional<double> forced, double dt_limit);

  Grid grid_;
  Form form_;
  double cfl_;
  double t_ = 0.0;
  long steps_ = 0;
  std::vector<double> phi_, ux_, uy_;
  std::vector<double> vc_, dvx_, dvy_;  // cell centres
  std::vector<double> vfx_, vfy_;       // face midpoints
};

std::vector<DeterministicSnapshot> deterministic_solve(const Grid& grid, const InitialCondition& phi0,
                                                       const ScalarVelocity& velocity, double t_end,
                                                       Form form = Form::conservative, double cfl = 0.45,
                                                       int snapshot_every = 0);

struct MonteCarlo {
  std::size_t samples = 1000;
  std::uint64_t seed = 1;
};

struct Collocation {
  int nodes = 8;  // Gauss-Legendre nodes per stochastic dimension
};

using EnsembleMode = std::variant<MonteCarlo, Collocation>;

struct EnsembleOptions {
  Form form = Form::conservative;
  double cfl = 0.45;
  std::vector<double> epsilons;  // CDF thresholds for |phi|
  std::size_t chunk = 64;        // reduction granularity; fixed for reproducibility
  bool keep_runs = false;
};

struct SampleRun {
  std::vector<double> xi;
  double weight = 0.0;
  std::vector<double> phi;  // final field
};

struct EnsembleStats {
  std::size_t samples = 0;
  double weight_sum = 0.0;
  std::uint64_t seed = 0;
  double t = 0.0;
  std::vector<double> mean, variance, std_error;
  /// cdf[e][c]: weighted fraction of samples with |phi_c| <= epsilons[e].
  std::vector<std::vector<double>> cdf;
  std::vector<char> union_envelope, intersection_envelope;
  std::vector<SampleRun> runs;
};

/// Cells where phi is zero or differs in sign from a face neighbour.
std::vector<char> zero_set_cells(const Grid& grid, const std::vector<double>& phi);

EnsembleStats ensemble(const Grid& grid, const InitialCondition& phi0, const VelocitySpec& vspec,
                       const GpcBasis& basis, double t_end, const EnsembleMode& mode,
                       const EnsembleOptions& opts = {});

}  // namespace sgls
