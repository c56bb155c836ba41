#pragma once

#include <cstdint>
#include <vector>

#include "ipic/config.hpp"
#include "ipic/grid.hpp"
#include "ipic/rng.hpp"
#include "ipic/vec3.hpp"

namespace ipic {

/// Computational macro-particle. Charge is charge_sign * weight, mass is weight / |q/m|.
struct Particle {
  Vec3 position;
  Vec3 velocity;
  double weight = 1.0;

  bool operator==(const Particle&) const = default;
};

using ParticleList = std::vector<Particle>;

struct DiagnosticsRow {
  std::uint64_t cycle = 0;
  double field_energy = 0.0;
  std::vector<double> kinetic_energy;  // per species
  Vec3 momentum;
  std::vector<std::uint64_t> particle_counts;  // per species
  double gauss_residual = 0.0;
  int krylov_iterations = 0;
  double krylov_residual = 0.0;
  double wall_time = 0.0;

  double total_energy() const {
    double e = field_energy;
    for (double k : kinetic_energy) e += k;
    return e;
  }
};

struct SimState {
  std::uint64_t cycle = 0;
  FieldGrid fields;
  std::vector<ParticleList> species;
  Rng rng;
  std::vector<DiagnosticsRow> diagnostics;
};

/// Relativistic Lorentz factor of a velocity.
inline double lorentz_gamma(const Vec3& v, double c) { return 1.0 / std::sqrt(1.0 - norm2(v) / (c * c)); }

/// Particle mass in code units.
inline double particle_mass(const Particle& p, const SpeciesParams& sp) {
  return p.weight / std::abs(sp.charge_over_mass);
}

/// Total field energy sum (E^2 + B^2)/(8 pi) V over independent nodes.
double field_energy(const FieldGrid& fields);

/// Sum of m (gamma - 1) c^2 over the particles of one species.
double kinetic_energy(const ParticleList& particles, const SpeciesParams& sp, double c);

/// Sum of m gamma v over all species.
Vec3 total_momentum(const std::vector<ParticleList>& species, const std::vector<SpeciesParams>& params,
                    double c);

}  // namespace ipic
