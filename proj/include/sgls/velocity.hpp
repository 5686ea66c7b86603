#pragma once

#include <array>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sgls/common.hpp"
#include "sgls/gpc_basis.hpp"

namespace sgls {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

enum class Boundary { periodic, outflow };

/// Uniform cell-centred grid in one or two dimensions. In 1D ny == 1 and dy
/// is unused.
struct Grid {
  int dims = 1;
  int nx = 3;
  int ny = 1;
  double dx = 1.0;
  double dy = 1.0;
  double x0 = 0.0;  // first cell centre
  double y0 = 0.0;
  Boundary boundary = Boundary::outflow;

  static Grid line(int nx, double dx, double x0, Boundary b = Boundary::outflow);
  static Grid plane(int nx, int ny, double dx, double dy, double x0, double y0,
                    Boundary b = Boundary::outflow);

  void validate() const;
  std::size_t cells() const noexcept { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i);
  }
  Point center(int i, int j) const { return {x0 + i * dx, y0 + j * dy}; }
  Point center(std::size_t c) const {
    return center(static_cast<int>(c % static_cast<std::size_t>(nx)), static_cast<int>(c / static_cast<std::size_t>(nx)));
  }
  /// Midpoint of the face between cells (i-1, j) and (i, j); i in [0, nx].
  Point x_face(int i, int j) const { return {x0 + (i - 0.5) * dx, y0 + j * dy}; }
  /// Midpoint of the face between cells (i, j-1) and (i, j); j in [0, ny].
  Point y_face(int i, int j) const { return {x0 + i * dx, y0 + (j - 0.5) * dy}; }
};

struct ConstantMode {
  double value = 0.0;
};

/// c0 + g1 x + g2 y
struct AffineMode {
  double c0 = 0.0, g1 = 0.0, g2 = 0.0;
};

/// offset + amplitude * exp(-|x - c|^2 / (2 width^2))
struct GaussianBumpMode {
  double amplitude = 0.0, cx = 0.0, cy = 0.0, width = 1.0, offset = 0.0;
};

/// Values at the centres of a grid; bilinear in between, so face midpoints
/// receive the arithmetic mean of the two adjacent cells. Derivatives come
/// from second-order finite differences of the table.
struct TabulatedMode {
  Grid grid;
  std::vector<double> values;
  std::vector<double> ddx, ddy;

  TabulatedMode(Grid g, std::vector<double> v);
};

using ModeFunction = std::variant<ConstantMode, AffineMode, GaussianBumpMode, TabulatedMode>;

double mode_value(const ModeFunction& f, Point p);
std::array<double, 2> mode_gradient(const ModeFunction& f, Point p);

/// Galerkin modes v_k(x) of an uncertain velocity field. Modes past the end
/// of `modes` are zero.
class VelocitySpec {
 public:
  VelocitySpec() = default;
  explicit VelocitySpec(std::vector<ModeFunction> modes) : modes_(std::move(modes)) {}

  static VelocitySpec constant(std::vector<double> coeffs);

  const std::vector<ModeFunction>& modes() const noexcept { return modes_; }

  GpcVector at(Point p, std::size_t n_modes) const;
  /// d/dx and d/dy of every mode.
  std::array<GpcVector, 2> gradient_at(Point p, std::size_t n_modes) const;

  /// v(x, xi) = sum_k v_k(x) phi_k(xi).
  double realization(const GpcBasis& basis, Point p, std::span<const double> xi) const;
  std::array<double, 2> realization_gradient(const GpcBasis& basis, Point p, std::span<const double> xi) const;

 private:
  std::vector<ModeFunction> modes_;
};

}  // namespace sgls
