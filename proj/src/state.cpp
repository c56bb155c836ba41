#include "ipic/state.hpp"

#include <numbers>

namespace ipic {

double field_energy(const FieldGrid& fields) {
  const auto& g = fields.geometry;
  double sum = 0.0;
  for_each_solver_node(g, [&](int i, int j, int k) {
    sum += (norm2(fields.E(i, j, k)) + norm2(fields.B(i, j, k))) * g.node_volume(i, j, k);
  });
  return sum / (8.0 * std::numbers::pi);
}

double kinetic_energy(const ParticleList& particles, const SpeciesParams& sp, double c) {
  double sum = 0.0;
  const double c2 = c * c;
  for (const auto& p : particles) {
    // gamma - 1 = gamma^2 v^2 / (c^2 (gamma + 1)), free of cancellation for small v.
    const double v2 = norm2(p.velocity);
    const double g = 1.0 / std::sqrt(1.0 - v2 / c2);
    const double gm1 = g * g * v2 / c2 / (g + 1.0);
    sum += particle_mass(p, sp) * gm1 * c2;
  }
  return sum;
}

Vec3 total_momentum(const std::vector<ParticleList>& species, const std::vector<SpeciesParams>& params,
                    double c) {
  Vec3 sum;
  for (std::size_t s = 0; s < species.size(); ++s)
    for (const auto& p : species[s]) sum += p.velocity * (particle_mass(p, params[s]) * lorentz_gamma(p.velocity, c));
  return sum;
}

}  // namespace ipic
