#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ipic/vec3.hpp"

namespace ipic {

/// Raised for malformed configuration documents. Carries the 1-based line.
class ConfigParseError : public std::runtime_error {
 public:
  ConfigParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Raised when a parsed configuration violates an invariant.
class ConfigValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BoundaryMode { Periodic, OpenInflow };
enum class ScenarioKind { Uniform, GemHarris, Dipole };
enum class DensityProfile { Uniform, Harris };
enum class RegionGranularity { WholeDomain, PerCell };
enum class HistogramRange { Auto, Fixed };

struct SpeciesParams {
  double charge_over_mass = 1.0;  // q_s/m_s; its sign is the species charge sign
  Vec3 thermal_velocity{};
  Vec3 drift_velocity{};
  int particles_per_cell = 1;
  double reference_density = 1.0;  // charge density |rho_s| = reference_density / 4pi
  DensityProfile profile = DensityProfile::Uniform;

  double charge_sign() const { return charge_over_mass < 0.0 ? -1.0 : 1.0; }
};

struct SolverParams {
  double tolerance = 1e-8;
  int restart = 20;
  int max_iterations = 200;
  int inner_iterations = 5;
  bool abort_on_failure = false;
  bool smooth_moments = false;
};

struct MoverParams {
  double tolerance = 1e-10;
  int max_iterations = 3;
};

struct ControlParams {
  bool enabled = false;
  double theta = 0.05;
  long target = 0;  // 0: use the initial particle count
  int velocity_bins = 4;
  RegionGranularity trigger_region = RegionGranularity::WholeDomain;
};

struct CompressParams {
  int bins = 32;
  int components = 8;
  int every = 0;  // 0 disables in-run compression
  HistogramRange range = HistogramRange::Auto;
  double v_max = 1.0;
};

struct ScenarioParams {
  ScenarioKind kind = ScenarioKind::Uniform;
  Vec3 background_b{};
  bool mirror_loading = false;

  // Harris sheet
  double sheet_b0 = 0.1;
  double sheet_half_width = 0.5;
  double perturbation = 0.1;

  // Dipole obstacle
  Vec3 dipole_moment{};
  Vec3 dipole_center{-1.0, -1.0, -1.0};  // negative: domain center
  double core_radius = 0.0;
};

struct SimConfig {
  std::array<int, 3> grid_dims{16, 16, 16};
  Vec3 domain_lengths{1.0, 1.0, 1.0};
  double dt = 0.1;
  double c = 1.0;
  int n_cycles = 10;
  std::vector<SpeciesParams> species;
  BoundaryMode boundary_mode = BoundaryMode::Periodic;
  SolverParams solver_params;
  MoverParams mover_params;
  ControlParams control_params;
  CompressParams compress_params;
  ScenarioParams scenario;
  std::uint64_t rng_seed = 1;
  int workers = 1;
};

/// Parses the INI-style configuration document and validates it.
SimConfig load_config(std::string_view text);
SimConfig load_config_file(const std::string& path);

/// Throws ConfigValidationError naming the first violated invariant.
void validate(const SimConfig& config);

}  // namespace ipic
