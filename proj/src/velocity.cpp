#include "sgls/velocity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sgls {

Grid Grid::line(int nx, double dx, double x0, Boundary b) {
  Grid g;
  g.dims = 1;
  g.nx = nx;
  g.ny = 1;
  g.dx = dx;
  g.dy = 1.0;
  g.x0 = x0;
  g.y0 = 0.0;
  g.boundary = b;
  g.validate();
  return g;
}

Grid Grid::plane(int nx, int ny, double dx, double dy, double x0, double y0, Boundary b) {
  Grid g;
  g.dims = 2;
  g.nx = nx;
  g.ny = ny;
  g.dx = dx;
  g.dy = dy;
  g.x0 = x0;
  g.y0 = y0;
  g.boundary = b;
  g.validate();
  return g;
}

void Grid::validate() const {
  if (dims != 1 && dims != 2) throw Error(ErrorKind::InvalidArgument, "grid: dims must be 1 or 2");
  if (nx < 3) throw Error(ErrorKind::InvalidArgument, "grid: nx must be >= 3");
  if (dims == 2 && ny < 3) throw Error(ErrorKind::InvalidArgument, "grid: ny must be >= 3");
  if (dims == 1 && ny != 1) throw Error(ErrorKind::InvalidArgument, "grid: 1D grids have ny = 1");
  if (!(dx > 0.0) || (dims == 2 && !(dy > 0.0)))
    throw Error(ErrorKind::InvalidArgument, "grid: spacings must be positive");
}

// ---------------------------------------------------------------------------

TabulatedMode::TabulatedMode(Grid g, std::vector<double> v) : grid(g), values(std::move(v)) {
  grid.validate();
  if (values.size() != grid.cells())
    throw Error(ErrorKind::InvalidArgument, "tabulated velocity: expected " + std::to_string(grid.cells()) +
                                                " values, got " + std::to_string(values.size()));
  ddx.assign(values.size(), 0.0);
  ddy.assign(values.size(), 0.0);
  auto at = [&](int i, int j) { return values[grid.index(i, j)]; };
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const std::size_t c = grid.index(i, j);
      if (i == 0)
        ddx[c] = (-3.0 * at(0, j) + 4.0 * at(1, j) - at(2, j)) / (2.0 * grid.dx);
      else if (i == grid.nx - 1)
        ddx[c] = (3.0 * at(i, j) - 4.0 * at(i - 1, j) + at(i - 2, j)) / (2.0 * grid.dx);
      else
        ddx[c] = (at(i + 1, j) - at(i - 1, j)) / (2.0 * grid.dx);
      if (grid.dims == 2) {
        if (j == 0)
          ddy[c] = (-3.0 * at(i, 0) + 4.0 * at(i, 1) - at(i, 2)) / (2.0 * grid.dy);
        else if (j == grid.ny - 1)
          ddy[c] = (3.0 * at(i, j) - 4.0 * at(i, j - 1) + at(i, j - 2)) / (2.0 * grid.dy);
        else
          ddy[c] = (at(i, j + 1) - at(i, j - 1)) / (2.0 * grid.dy);
      }
    }
  }
}

namespace {

double bilinear(const Grid& g, const std::vector<double>& table, Point p) {
  auto locate = [](double coord, double origin, double h, int n, int& i0, double& frac) {
    double s = (coord - origin) / h;
    s = std::clamp(s, 0.0, static_cast<double>(n - 1));
    i0 = std::min(static_cast<int>(std::floor(s)), n - 2);
    if (n == 1) i0 = 0;
    frac = s - i0;
  };
  int i0, j0 = 0;
  double fx, fy = 0.0;
  locate(p.x, g.x0, g.dx, g.nx, i0, fx);
  if (g.dims == 1) return (1.0 - fx) * table[g.index(i0, 0)] + fx * table[g.index(i0 + 1, 0)];
  locate(p.y, g.y0, g.dy, g.ny, j0, fy);
  const double v00 = table[g.index(i0, j0)], v10 = table[g.index(i0 + 1, j0)];
  const double v01 = table[g.index(i0, j0 + 1)], v11 = table[g.index(i0 + 1, j0 + 1)];
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11);
}

}  // namespace

double mode_value(const ModeFunction& f, Point p) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConstantMode>) {
          return m.value;
        } else if constexpr (std::is_same_v<T, AffineMode>) {
          return m.c0 + m.g1 * p.x + m.g2 * p.y;
        } else if constexpr (std::is_same_v<T, GaussianBumpMode>) {
          const double r2 = (p.x - m.cx) * (p.x - m.cx) + (p.y - m.cy) * (p.y - m.cy);
          return m.offset + m.amplitude * std::exp(-r2 / (2.0 * m.width * m.width));
        } else {
          return bilinear(m.grid, m.values, p);
        }
      },
      f);
}

std::array<double, 2> mode_gradient(const ModeFunction& f, Point p) {
  return std::visit(
      [&](const auto& m) -> std::array<double, 2> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConstantMode>) {
          return {0.0, 0.0};
        } else if constexpr (std::is_same_v<T, AffineMode>) {
          return {m.g1, m.g2};
        } else if constexpr (std::is_same_v<T, GaussianBumpMode>) {
          const double w2 = m.width * m.width;
          const double r2 = (p.x - m.cx) * (p.x - m.cx) + (p.y - m.cy) * (p.y - m.cy);
          const double e = m.amplitude * std::exp(-r2 / (2.0 * w2));
          return {-e * (p.x - m.cx) / w2, -e * (p.y - m.cy) / w2};
        } else {
          return {bilinear(m.grid, m.ddx, p), m.grid.dims == 2 ? bilinear(m.grid, m.ddy, p) : 0.0};
        }
      },
      f);
}

VelocitySpec VelocitySpec::constant(std::vector<double> coeffs) {
  std::vector<ModeFunction> modes;
  modes.reserve(coeffs.size());
  for (double c : coeffs) modes.emplace_back(ConstantMode{c});
  return VelocitySpec(std::move(modes));
}

GpcVector VelocitySpec::at(Point p, std::size_t n_modes) const {
  GpcVector v = GpcVector::Zero(static_cast<Eigen::Index>(n_modes));
  for (std::size_t k = 0; k < std::min(n_modes, modes_.size()); ++k) v(static_cast<Eigen::Index>(k)) = mode_value(modes_[k], p);
  return v;
}

std::array<GpcVector, 2> VelocitySpec::gradient_at(Point p, std::size_t n_modes) const {
  std::array<GpcVector, 2> g{GpcVector::Zero(static_cast<Eigen::Index>(n_modes)),
                             GpcVector::Zero(static_cast<Eigen::Index>(n_modes))};
  for (std::size_t k = 0; k < std::min(n_modes, modes_.size()); ++k) {
    const auto d = mode_gradient(modes_[k], p);
    g[0](static_cast<Eigen::Index>(k)) = d[0];
    g[1](static_cast<Eigen::Index>(k)) = d[1];
  }
  return g;
}

double VelocitySpec::realization(const GpcBasis& basis, Point p, std::span<const double> xi) const {
  return at(p, basis.size()).dot(basis.eval_all(xi));
}

std::array<double, 2> VelocitySpec::realization_gradient(const GpcBasis& basis, Point p,
                                                         std::span<const double> xi) const {
  const GpcVector phi = basis.eval_all(xi);
  const auto g = gradient_at(p, basis.size());
  return {g[0].dot(phi), g[1].dot(phi)};
}

}  // namespace sgls
