#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sgls/common.hpp"
#include "sgls/flux_jacobian.hpp"
#include "sgls/gpc_algebra.hpp"
#include "sgls/velocity.hpp"

namespace sgls {

enum class Form { conservative, capacity };

/// Per-cell coefficient vectors stored contiguously (cell-major).
class CoeffField {
 public:
  CoeffField() = default;
  CoeffField(std::size_t cells, std::size_t modes) : cells_(cells), modes_(modes), data_(cells * modes, 0.0) {}

  std::size_t cells() const noexcept { return cells_; }
  std::size_t modes() const noexcept { return modes_; }
  bool empty() const noexcept { return data_.empty(); }

  Eigen::Map<GpcVector> cell(std::size_t c) {
    return Eigen::Map<GpcVector>(data_.data() + c * modes_, static_cast<Eigen::Index>(modes_));
  }
  Eigen::Map<const GpcVector> cell(std::size_t c) const {
    return Eigen::Map<const GpcVector>(data_.data() + c * modes_, static_cast<Eigen::Index>(modes_));
  }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

 private:
  std::size_t cells_ = 0, modes_ = 0;
  std::vector<double> data_;
};

/// Velocity coefficients sampled once per grid: cell centres (with spatial
/// derivatives and P(v)) and face midpoints.
struct VelocityCache {
  CoeffField center, ddx, ddy;
  CoeffField x_face;  // (nx + 1) * ny faces, index j * (nx + 1) + i
  CoeffField y_face;  // nx * (ny + 1) faces, index j * nx + i
  std::vector<GpcMatrix> p_center;
  std::vector<double> p_center_radius;  // spectral radius of P(v) per cell
  std::vector<double> p_center_min_abs;  // smallest |eigenvalue| of P(v) per cell
  std::vector<char> x_face_deterministic, y_face_deterministic;

  static VelocityCache build(const Grid& grid, const VelocitySpec& spec, const GpcAlgebra& alg);
};

struct SolverState {
  Grid grid;
  double t = 0.0;
  CoeffField u1, u2;  // u2 empty in 1D
  CoeffField phi;
  Form form = Form::conservative;
  double cfl = 0.45;
  long step_count = 0;
  double norm_floor = 0.0;  // 0: off
  std::shared_ptr<const GpcAlgebra> algebra;
  std::shared_ptr<const VelocitySpec> velocity;
  std::shared_ptr<const VelocityCache> vcache;

  const GpcAlgebra& alg() const { return *algebra; }
  std::size_t modes() const { return algebra->size(); }
  GradState grad(std::size_t c) const;
};

struct StepReport {
  double dt_used = 0.0;
  double max_wavespeed = 0.0;
  /// max over cells of the CFL rate; dt_used * max_rate <= cfl
  double max_rate = 0.0;
  std::vector<std::size_t> positivity_failures;
  std::vector<std::size_t> nonhyperbolic_cells;
  bool halted = false;
  std::optional<ErrorKind> error;
  std::string message;
};

struct StepResult {
  SolverState state;
  StepReport report;
};

/// phi0 with an optional analytic gradient.
struct InitialCondition {
  std::function<double(Point)> phi;
  std::function<std::array<double, 2>(Point)> gradient;
};

struct SolverOptions {
  Form form = Form::conservative;
  double cfl = 0.45;
  double norm_floor = 0.0;
};

inline constexpr double kDefaultNormFloor = 1e-8;

/// phi_k(0, x) = phi0(x) delta_k0 and u_k(0, x) = grad phi0(x) delta_k0.
/// Throws DegenerateGradient listing the cells where |grad phi0| <= 1e-12.
SolverState init_deterministic(const Grid& grid, const InitialCondition& phi0, const VelocitySpec& vspec,
                               std::shared_ptr<const GpcAlgebra> algebra, const SolverOptions& opts = {});

/// Stacked LLF fluxes through a face normal to `axis`; entry b is the flux
/// of gradient component b. Throws NonHyperbolic or NotSpd.
StackedFlux llf_flux_conservative(const GpcAlgebra& alg, const GradState& ul, const GradState& ur,
                                  const GpcVector& v_face, int axis);
StackedFlux llf_flux_capacity(const GpcAlgebra& alg, const GradState& ul, const GradState& ur, int axis);

/// Explicit Euler steps. `dt_limit` caps the CFL step (final-step clipping);
/// `forced_dt` bypasses the adaptive choice and is refused with CflViolation
/// when it breaks the CFL inequality. On failure the returned state equals
/// the input and the report says why.
StepResult step_conservative(const SolverState& state, double dt_limit = INFINITY,
                             std::optional<double> forced_dt = std::nullopt);
StepResult step_capacity(const SolverState& state, double dt_limit = INFINITY,
                         std::optional<double> forced_dt = std::nullopt);
StepResult step(const SolverState& state, double dt_limit = INFINITY, std::optional<double> forced_dt = std::nullopt);

/// phi^{k+1} = phi^k - dt * v(x_c) * |u^k| cellwise.
CoeffField step_phi(const SolverState& state, double dt);

/// max over cells and modes of |D phi - u|: central differences inside,
/// second-order one-sided at the domain edges (phi itself need not be
/// periodic even when u is).
double gradient_consistency(const SolverState& state);

/// dx / D_l(v(x_j)) for each 1D cell j (row) and eigencomponent l (column).
Eigen::MatrixXd effective_volumes(const VelocitySpec& vspec, const Grid& grid, const GpcAlgebra& alg);

struct Snapshot {
  double t = 0.0;
  long step = 0;
  CoeffField phi, u1, u2;
  double gradient_consistency = 0.0;
  double max_wavespeed = 0.0;
};

struct RunResult {
  SolverState state;
  std::vector<Snapshot> snapshots;
  StepReport last_report;
  bool completed = true;
};

Snapshot take_snapshot(const SolverState& state, double max_wavespeed = 0.0);

/// Steps until t_end (final dt clipped). Snapshots at the start, every
/// `snapshot_every` steps (0: none in between) and at the end or failure.
RunResult run(const SolverState& state, double t_end, int snapshot_every = 0, long max_steps = 10'000'000);

}  // namespace sgls
