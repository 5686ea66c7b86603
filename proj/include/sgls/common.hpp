#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace sgls {

using GpcVector = Eigen::VectorXd;
using GpcMatrix = Eigen::MatrixXd;

enum class ErrorKind {
  NonConvergence,
  IndefiniteRoot,
  NotSpd,
  SingularVelocityOperator,
  NonHyperbolic,
  DegenerateGradient,
  CflViolation,
  InvalidArgument,
  Config,
  Io,
  Format,
};

std::string_view to_string(ErrorKind kind);

/// Error raised by every module of the solver. `cells` lists offending grid
/// cells (linear indices) when the failure is spatially localized.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::vector<std::size_t> cells = {})
      : std::runtime_error(what), kind_(kind), cells_(std::move(cells)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::vector<std::size_t>& cells() const noexcept { return cells_; }

 private:
  ErrorKind kind_;
  std::vector<std::size_t> cells_;
};

/// Worker count: SGLS_THREADS when set, otherwise hardware concurrency.
unsigned worker_count();

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks are disjoint,
/// so callers writing per-index outputs get results independent of the
/// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

/// Pairwise summation in index order; deterministic for a fixed input.
double pairwise_sum(const double* values, std::size_t n);

}  // namespace sgls
