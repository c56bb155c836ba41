#pragma once

#include <cstdint>
#include <vector>

#include "ipic/config.hpp"
#include "ipic/grid.hpp"
#include "ipic/rng.hpp"
#include "ipic/state.hpp"

namespace ipic {

enum class ControlAction { None, Split, Coalesce };

struct ControlPolicy {
  double theta = 0.05;
  std::vector<long> targets;  // N_p per region, per species
  int velocity_bins = 4;
  RegionGranularity region = RegionGranularity::WholeDomain;
  double c = 1.0;
};

/// Targets default to ppc * cells (WholeDomain) or ppc (PerCell) unless the
/// config sets an explicit target.
ControlPolicy make_policy(const SimConfig& config);

struct ControlReport {
  std::size_t species = 0;
  long region = 0;
  ControlAction action = ControlAction::None;
  std::size_t before = 0;
  std::size_t after = 0;
  double charge_delta = 0.0;    // relative
  double momentum_delta = 0.0;  // relative to sum w gamma |v|
  double energy_delta = 0.0;    // absolute change of sum w (gamma - 1) c^2
  bool partial = false;         // target not reached
};

/// Axis-aligned box of a region.
struct RegionBox {
  Vec3 lo;
  Vec3 hi;
};

long region_count(const GridGeometry& g, RegionGranularity r);
long region_of(const GridGeometry& g, RegionGranularity r, const Vec3& x);
RegionBox region_box(const GridGeometry& g, RegionGranularity r, long region);

/// Particle count per region, indexed [species][region].
std::vector<std::vector<std::size_t>> census(const std::vector<ParticleList>& species, const GridGeometry& g,
                                             RegionGranularity r);

/// Splits the heaviest particles until `deficit` particles have been added.
/// Daughters carry half the weight and sit at +-0.25 cell along a random axis,
/// clamped inside the box. Throws std::invalid_argument for an empty list with a
/// positive deficit.
void split_particles(ParticleList& particles, long deficit, const GridGeometry& g, const RegionBox& box, Rng& rng);

/// Pairwise merges of nearest-velocity particles sharing a cell and a velocity
/// bin, densest groups first, until `excess` particles are gone. A merged pair
/// takes the weighted mean position and proper velocity. Returns the number
/// actually removed.
long coalesce_particles(ParticleList& particles, long excess, const GridGeometry& g, int velocity_bins, double c);

/// Restores every region to its target when the count leaves N_p (1 +- theta).
std::vector<ControlReport> control_pass(SimState& state, const GridGeometry& g, const ControlPolicy& policy);

}  // namespace ipic
