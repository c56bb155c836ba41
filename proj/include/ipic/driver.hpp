#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipic/config.hpp"
#include "ipic/control.hpp"
#include "ipic/gmm.hpp"
#include "ipic/krylov.hpp"
#include "ipic/scenarios.hpp"
#include "ipic/state.hpp"

namespace ipic {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Simulation {
 public:
  explicit Simulation(SimConfig config);
  /// Resumes from a restored state; the grid must match the config.
  Simulation(SimConfig config, SimState state);

  /// One cycle: control, push, boundaries, injection; gather, susceptibility,
  /// hat moments; rhs, solve, B advance, compression on cadence; diagnostics.
  const DiagnosticsRow& run_cycle();
  void run(int cycles);

  const SimConfig& config() const { return config_; }
  const SimState& state() const { return state_; }
  SimState& state() { return state_; }
  const std::vector<GmmRecord>& archive() const { return archive_; }
  const std::vector<ControlReport>& control_log() const { return control_log_; }
  const KrylovReport& last_solve() const { return last_solve_; }
  int solver_failures() const { return solver_failures_; }

  /// Reads a checkpoint into a temporary and swaps it in only on success.
  void restore(std::istream& in);

 private:
  void compress(std::vector<GmmRecord>& out) const;

  SimConfig config_;
  GridGeometry geometry_;
  SimState state_;
  VectorField external_b_;
  ControlPolicy policy_;
  InflowFace inflow_;
  std::vector<GmmRecord> archive_;
  std::vector<ControlReport> control_log_;
  KrylovReport last_solve_;
  int solver_failures_ = 0;
};

/// Field, kinetic and momentum diagnostics of a state, without solver entries.
DiagnosticsRow measure(const SimState& state, const SimConfig& config);

void write_diagnostics_csv(const std::vector<DiagnosticsRow>& rows, std::ostream& out);

struct CheckpointHeader {
  std::array<std::uint32_t, 3> dims{};
  std::uint32_t ghost_width = 1;
  std::uint32_t species = 0;
  std::uint64_t cycle = 0;
  std::array<std::uint64_t, 4> rng{};
  double dt = 0.0;
  double c = 0.0;
};

void write_checkpoint(const SimState& state, double dt, double c, std::ostream& out);

CheckpointHeader read_checkpoint_header(std::istream& in);

/// Restores cycle, fields, particles and RNG state. With `expected` the grid
/// dimensions must match and the geometry is taken from it; otherwise a unit
/// periodic geometry of the stored dimensions is used.
SimState read_checkpoint(std::istream& in, const GridGeometry* expected = nullptr);

}  // namespace ipic
