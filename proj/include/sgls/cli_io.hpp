#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "sgls/common.hpp"
#include "sgls/fv_solver.hpp"
#include "sgls/gpc_basis.hpp"
#include "sgls/mc_oracle.hpp"
#include "sgls/quantile.hpp"
#include "sgls/velocity.hpp"

namespace sgls {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr std::uint32_t kSnapshotVersion = 1;

// --- configuration ---------------------------------------------------------

struct BasisConfig {
  int L = 1;
  int K = 1;
  int nodes_per_dim = 0;  // 0: default for K
};

struct GridConfig {
  int dims = 1;
  int nx = 64;
  int ny = 1;
  double dx = 1.0 / 64.0;
  double dy = 1.0 / 64.0;
  std::array<double, 2> origin{0.5 / 64.0, 0.5 / 64.0};
  bool origin_set = false;
  Boundary boundary = Boundary::outflow;
};

enum class RunMode { intrusive, mc, collocation };

struct RunSection {
  Form form = Form::conservative;
  double cfl = 0.45;
  double t_end = 0.0;
  int snapshot_every = 0;
  RunMode mode = RunMode::intrusive;
  std::size_t samples = 1000;
  std::uint64_t seed = 1;
  int nodes = 8;
  double norm_floor = 0.0;  // 0: off
};

/// plane: phi = n . x + offset; circle: radius - |x - center| (positive
/// inside); sine: x + amplitude sin(2 pi wavenumber x).
struct Phi0Config {
  std::string type = "plane";
  std::array<double, 2> normal{1.0, 0.0};
  double offset = 0.0;
  std::array<double, 2> center{0.5, 0.5};
  double radius = 0.25;
  double amplitude = 0.05;
  double wavenumber = 1.0;
};

/// One velocity mode as written in the config, e.g. "affine 1 0.2 0".
struct VelocityModeConfig {
  std::string kind = "constant";
  std::vector<double> params;
  std::string path;  // tabulated only
};

struct QuantileConfig {
  double epsilon = 0.05;
  double p = 0.9;
  int n_cdf = 256;
  Surrogate surrogate = Surrogate::pointwise;
};

struct RunConfig {
  BasisConfig basis;
  GridConfig grid;
  RunSection run;
  Phi0Config phi0;
  std::vector<VelocityModeConfig> velocity;  // index = basis index
  QuantileConfig quantile;
  std::filesystem::path base_dir = ".";      // for relative tabulated paths
};

struct ConfigIssue {
  std::string section;
  std::string key;
  int line = 0;
  std::string message;
};

/// Config error carrying every problem found, each anchored to a line.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

const std::vector<std::string>& accepted_sections();

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);
/// Canonical text; serialize(parse(serialize(c))) == serialize(c).
std::string serialize(const RunConfig& cfg);
/// FNV-1a of the canonical text, 16 hex digits.
std::string config_hash(const RunConfig& cfg);

Grid make_grid(const RunConfig& cfg);
std::shared_ptr<const GpcBasis> make_basis(const RunConfig& cfg);
VelocitySpec make_velocity(const RunConfig& cfg);
InitialCondition make_initial_condition(const RunConfig& cfg);
SolverOptions make_solver_options(const RunConfig& cfg);
CdfOptions make_cdf_options(const RunConfig& cfg);

// --- snapshots -------------------------------------------------------------

/// Payload index ((ix * ny + iy) * modes + k) * components + c.
struct FieldSnapshot {
  double t = 0.0;
  std::uint32_t nx = 0, ny = 0, modes = 0, components = 0;
  std::vector<double> payload;

  double& at(std::uint32_t ix, std::uint32_t iy, std::uint32_t k, std::uint32_t c) {
    return payload[((static_cast<std::size_t>(ix) * ny + iy) * modes + k) * components + c];
  }
  double at(std::uint32_t ix, std::uint32_t iy, std::uint32_t k, std::uint32_t c) const {
    return payload[((static_cast<std::size_t>(ix) * ny + iy) * modes + k) * components + c];
  }
};

/// Components: phi, u1 and (2D) u2.
FieldSnapshot to_field_snapshot(const Snapshot& snap, const Grid& grid);
/// phi coefficients of every cell, indexed like Grid::index.
CoeffField phi_field(const FieldSnapshot& snap);

enum class Endianness : std::uint8_t { little = 0, big = 1 };

void write_snapshot(const std::filesystem::path& path, const FieldSnapshot& snap,
                    Endianness order = Endianness::little);
void write_snapshot(std::ostream& os, const FieldSnapshot& snap, Endianness order = Endianness::little);
FieldSnapshot read_snapshot(const std::filesystem::path& path);
FieldSnapshot read_snapshot(std::istream& is);

// --- text exports ----------------------------------------------------------

/// Header comments (epsilon, p, t, config hash) then one row per cell:
/// x y cdf in_band.
void export_band(const std::filesystem::path& path, const QuantileBand& band, const Grid& grid,
                 const std::string& hash);
void export_band(std::ostream& os, const QuantileBand& band, const Grid& grid, const std::string& hash);

/// 1D slice: x then every phi mode.
void export_csv_1d(std::ostream& os, const FieldSnapshot& snap, const Grid& grid);

struct ManifestInfo {
  std::string config_hash;
  std::uint64_t basis_fingerprint = 0;
  std::uint64_t seed = 0;
  std::string command;
  std::string config_text;
  std::vector<std::string> outputs;
};

void write_manifest(const std::filesystem::path& path, const ManifestInfo& info);
ManifestInfo read_manifest(const std::filesystem::path& path);

}  // namespace sgls
