#pragma once

#include <stdexcept>
#include <vector>

#include "ipic/config.hpp"
#include "ipic/grid.hpp"
#include "ipic/rng.hpp"
#include "ipic/scenarios.hpp"
#include "ipic/state.hpp"

namespace ipic {

class MoverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FieldSample {
  Vec3 E;
  Vec3 B;
};

/// Intermediate quantities of the last predictor-corrector iterate.
struct MoverScratch {
  Vec3 v_tilde;
  Vec3 v_bar;
  double gamma_n = 1.0;
  double gamma_np1 = 1.0;
  double gamma_tilde = 1.0;
  double D = 1.0;
  Vec3 Omega;
  int iterations = 0;
  std::vector<double> residuals;  // |v_bar change| per iterate after the first
};

enum class BoundaryAction { Kept, Wrapped, Removed, Reinjected };

struct BoundaryVerdict {
  BoundaryAction action = BoundaryAction::Kept;
  Particle particle;
};

/// Trilinear interpolation of E and B; ghost nodes must be synced.
FieldSample sample_fields_at(const FieldGrid& grid, const Vec3& position);

/// Relativistic implicit predictor-corrector push of one particle by dt.
Particle push_particle(const Particle& p, const FieldGrid& grid, const SpeciesParams& species, double dt,
                       double c, const MoverParams& params, MoverScratch* scratch = nullptr);

/// Pushes every particle of a species; work is split over `workers` threads.
void push_species(ParticleList& particles, const FieldGrid& grid, const SpeciesParams& species, double dt,
                  double c, const MoverParams& params, int workers = 1);

/// Periodic wrap, or outflow removal / inflow-face reflection in OpenInflow mode.
BoundaryVerdict apply_particle_bc(const Particle& p, const GridGeometry& geometry, const InflowFace& inflow);

/// Applies boundary conditions to a species in place, dropping removed particles.
/// Returns the number removed.
std::size_t apply_species_bc(ParticleList& particles, const GridGeometry& geometry, const InflowFace& inflow);

}  // namespace ipic
