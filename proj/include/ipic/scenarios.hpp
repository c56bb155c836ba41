#pragma once

#include <stdexcept>

#include "ipic/config.hpp"
#include "ipic/state.hpp"

namespace ipic {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Charge density magnitude carried by a species of the given reference density.
/// With q/m = 1 and density 1 this makes the ion plasma frequency equal to one.
double species_charge_density(const SpeciesParams& sp);

SimState init_uniform_plasma(const SimConfig& config);
SimState init_gem_harris(const SimConfig& config);
SimState init_dipole_scenario(const SimConfig& config);

/// Dispatches on config.scenario.kind.
SimState init_scenario(const SimConfig& config);

/// Single Harris sheet profile B0 tanh(y / lambda), y measured from the sheet centre.
double harris_bx(double y, double b0, double lambda);

/// Centres of the two periodic current sheets used by the GEM setup.
std::pair<double, double> harris_sheet_centres(const SimConfig& config);

/// Point-dipole field (3 (m.r^) r^ - m) / r^3 of moment m at offset r from the centre.
Vec3 dipole_field(const Vec3& moment, const Vec3& r);

Vec3 dipole_centre(const SimConfig& config);

/// External magnetic field of the scenario at a point (uniform background, Harris
/// profile without perturbation, or background plus dipole).
Vec3 external_b(const SimConfig& config, const Vec3& x);

/// B values used to hold ghost layers in OpenInflow mode.
VectorField external_b_field(const SimConfig& config);

struct InflowFace {
  int axis = 0;
  int side = 0;  // 0: low face (x_a = 0), 1: high face (x_a = L_a)
};

/// Face opposite to the first species' dominant drift component.
InflowFace inflow_face(const SimConfig& config);

/// Injects drifting Maxwellian particles across the inflow face for one time step.
/// Returns the number of particles injected per species.
std::vector<std::size_t> inject_inflow(SimState& state, const SimConfig& config);

}  // namespace ipic
