#include "sgls/common.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <thread>

namespace sgls {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::IndefiniteRoot: return "IndefiniteRoot";
    case ErrorKind::NotSpd: return "NotSpd";
    case ErrorKind::SingularVelocityOperator: return "SingularVelocityOperator";
    case ErrorKind::NonHyperbolic: return "NonHyperbolic";
    case ErrorKind::DegenerateGradient: return "DegenerateGradient";
    case ErrorKind::CflViolation: return "CflViolation";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Format: return "Format";
  }
  return "Unknown";
}

unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SGLS_THREADS")) {
    char* end = nullptr;
    long requested = std::strtol(env, &end, 10);
    if (end != env && requested >= 1) return std::min<unsigned>(hw, static_cast<unsigned>(requested));
  }
  return hw;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1 || n < 64) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures(workers);
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, &failures, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        failures[w] = std::current_exception();
      }
    });
  }
  try {
    fn(0, std::min(n, chunk));
  } catch (...) {
    failures[0] = std::current_exception();
  }
  for (auto& t : pool) t.join();
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
}

double pairwise_sum(const double* values, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

}  // namespace sgls
