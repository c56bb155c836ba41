#pragma once

#include <stdexcept>
#include <vector>

#include "ipic/config.hpp"
#include "ipic/grid.hpp"
#include "ipic/state.hpp"
#include "ipic/stencil.hpp"

namespace ipic {

/// Gathered charge density, current density and pressure tensor.
struct SpeciesMoments {
  ScalarField rho;
  VectorField J;
  TensorField Pi;

  SpeciesMoments() = default;
  explicit SpeciesMoments(const GridGeometry& g) : rho(g), J(g), Pi(g) {}
};

struct Moments {
  std::vector<SpeciesMoments> species;
  SpeciesMoments total;
};

struct HatMoments {
  ScalarField rho_hat;
  VectorField J_hat;
};

/// Per-node implicit susceptibility, summed over species.
struct SusceptibilityField {
  NodeArray<Mat3> chi;
};

class MomentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trilinear deposit stencil; the position must lie inside the domain.
InterpolationStencil deposit_stencil(const Vec3& position, const GridGeometry& grid);

/// Accumulates q w {1, v, v v} W / V_node for one species. Periodic duplicate
/// nodes are folded and ghosts synced.
SpeciesMoments gather_species(const ParticleList& particles, const SpeciesParams& sp, const GridGeometry& grid,
                              int workers = 1);

Moments gather_moments(const std::vector<ParticleList>& particles, const std::vector<SpeciesParams>& params,
                       const GridGeometry& grid, int workers = 1);

/// One pass of 1-2-1 binomial smoothing per axis on every gathered quantity.
void smooth_moments(Moments& m);

/// Normalised rotation tensor
///   R = (I - (dt/2)[Omega]x + (dt/2)^2 Omega Omega^T) / (1 + (dt/2)^2 |Omega|^2)
/// so that R v equals the magnetic part of the mover's average-velocity update.
Mat3 rotation_tensor(const Vec3& omega, double dt);

/// Plasma frequency squared 4 pi rho_s q_s/m_s at a node; throws if negative.
double plasma_frequency_squared(double rho_s, double charge_over_mass);

SusceptibilityField build_susceptibility(const Moments& m, const VectorField& B, double dt, double c,
                                         const std::vector<SpeciesParams>& params);

HatMoments build_hat_moments(const Moments& m, const VectorField& B, double dt, double c,
                             const std::vector<SpeciesParams>& params);

}  // namespace ipic
