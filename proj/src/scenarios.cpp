#include "ipic/scenarios.hpp"

#include <cmath>
#include <numbers>

namespace ipic {
namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

// Species s follows species s-1 (shares positions and weights) when the pair is a
// charge-neutral couple: opposite sign, same density, same loading.
std::vector<int> colocation_leaders(const SimConfig& cfg) {
  std::vector<int> leader(cfg.species.size(), -1);
  for (std::size_t s = 1; s < cfg.species.size(); ++s) {
    if (leader[s - 1] != -1) continue;
    const auto& a = cfg.species[s - 1];
    const auto& b = cfg.species[s];
    if (a.charge_sign() != b.charge_sign() && a.particles_per_cell == b.particles_per_cell &&
        a.reference_density == b.reference_density && a.profile == b.profile)
      leader[s] = int(s - 1);
  }
  return leader;
}

Vec3 sample_velocity(Rng& rng, const SpeciesParams& sp, double c, double drift_sign = 1.0) {
  for (;;) {
    Vec3 v = sp.drift_velocity * drift_sign;
    for (int a = 0; a < 3; ++a)
      if (sp.thermal_velocity[a] > 0.0) v[a] += sp.thermal_velocity[a] * rng.normal();
    if (norm2(v) < c * c) return v;
  }
}

double wrap(double x, double l) {
  double r = x - l * std::floor(x / l);
  return r >= l ? 0.0 : r;
}

// Fills positions and weights of one leader species.
ParticleList load_positions(const SimConfig& cfg, const SpeciesParams& sp, Rng& rng) {
  const GridGeometry geo(cfg);
  const Vec3 h = geo.spacing();
  const double rho = species_charge_density(sp);
  ParticleList out;

  if (sp.profile == DensityProfile::Uniform) {
    const bool mirror = cfg.scenario.mirror_loading && cfg.boundary_mode == BoundaryMode::Periodic;
    const int per_cell = mirror ? (sp.particles_per_cell + 1) / 2 : sp.particles_per_cell;
    const int loaded = mirror ? 2 * per_cell : per_cell;
    const double w = rho * geo.cell_volume() / loaded;
    out.reserve(geo.cell_count() * loaded);
    for (int k = 0; k < geo.cells(2); ++k)
      for (int j = 0; j < geo.cells(1); ++j)
        for (int i = 0; i < geo.cells(0); ++i)
          for (int p = 0; p < per_cell; ++p) {
            Particle q;
            q.position = {(i + rng.uniform()) * h.x, (j + rng.uniform()) * h.y, (k + rng.uniform()) * h.z};
            q.weight = w;
            out.push_back(q);
            if (mirror) {
              Particle m = q;
              for (int a = 0; a < 3; ++a) m.position[a] = wrap(geo.length[a] - q.position[a], geo.length[a]);
              out.push_back(m);
            }
          }
    return out;
  }

  // Harris population: half the particles per sheet, y drawn from sech^2 by inverse transform.
  const auto [y1, y2] = harris_sheet_centres(cfg);
  const double lambda = cfg.scenario.sheet_half_width;
  const Vec3 len = cfg.domain_lengths;
  const double t = std::tanh(0.5 * len.y / lambda);
  const std::size_t total = geo.cell_count() * std::size_t(sp.particles_per_cell);
  const std::size_t per_sheet = total / 2;
  const double sheet_charge = rho * len.x * len.z * 2.0 * lambda * t;
  const double w = sheet_charge / double(per_sheet);
  out.reserve(2 * per_sheet);
  for (std::size_t n = 0; n < 2 * per_sheet; ++n) {
    const double centre = (n % 2 == 0) ? y1 : y2;
    Particle q;
    q.position.x = rng.uniform() * len.x;
    q.position.z = rng.uniform() * len.z;
    const double u = (2.0 * rng.uniform() - 1.0) * t;
    q.position.y = wrap(centre + lambda * std::atanh(u), len.y);
    q.weight = w;
    out.push_back(q);
  }
  return out;
}

void load_species(SimState& state, const SimConfig& cfg) {
  const auto leader = colocation_leaders(cfg);
  state.species.resize(cfg.species.size());
  for (std::size_t s = 0; s < cfg.species.size(); ++s) {
    const auto& sp = cfg.species[s];
    auto& list = state.species[s];
    if (leader[s] >= 0) {
      list = state.species[leader[s]];
    } else {
      list = load_positions(cfg, sp, state.rng);
    }
    const bool mirror = cfg.scenario.mirror_loading && cfg.boundary_mode == BoundaryMode::Periodic &&
                        sp.profile == DensityProfile::Uniform;
    for (std::size_t n = 0; n < list.size(); ++n) {
      auto& p = list[n];
      if (mirror && n % 2 == 1) {
        p.velocity = -list[n - 1].velocity;
        continue;
      }
      double drift_sign = 1.0;
      if (sp.profile == DensityProfile::Harris) {
        // Second sheet carries the opposite current.
        drift_sign = (n % 2 == 0) ? 1.0 : -1.0;
      }
      p.velocity = sample_velocity(state.rng, sp, cfg.c, drift_sign);
    }
  }
}

SimState make_empty_state(const SimConfig& cfg) {
  validate(cfg);
  SimState st;
  st.cycle = 0;
  st.fields = FieldGrid(GridGeometry(cfg));
  st.rng = Rng(cfg.rng_seed);
  return st;
}

}  // namespace

double species_charge_density(const SpeciesParams& sp) { return sp.reference_density / kFourPi; }

SimState init_uniform_plasma(const SimConfig& config) {
  if (config.boundary_mode != BoundaryMode::Periodic)
    throw ScenarioError("uniform plasma requires periodic boundaries");
  SimState st = make_empty_state(config);
  st.fields.B.fill(config.scenario.background_b);
  load_species(st, config);
  return st;
}

double harris_bx(double y, double b0, double lambda) { return b0 * std::tanh(y / lambda); }

std::pair<double, double> harris_sheet_centres(const SimConfig& config) {
  const double ly = config.domain_lengths.y;
  return {0.25 * ly, 0.75 * ly};
}

SimState init_gem_harris(const SimConfig& config) {
  if (config.boundary_mode != BoundaryMode::Periodic)
    throw ScenarioError("GEM Harris setup requires periodic boundaries");
  const double lambda = config.scenario.sheet_half_width;
  if (!(lambda > 0.0)) throw ScenarioError("sheet_half_width must be positive");
  // Each of the two periodic sheets owns half of the y extent.
  if (0.5 * config.domain_lengths.y < 4.0 * lambda)
    throw ScenarioError("domain too small: each current sheet needs at least 4 lambda in y");

  SimState st = make_empty_state(config);
  const GridGeometry& geo = st.fields.geometry;
  const double b0 = config.scenario.sheet_b0;
  const Vec3 len = config.domain_lengths;
  const auto [y1, y2] = harris_sheet_centres(config);

  // Flux-function perturbation; differentiated discretely so that the central
  // divergence of the perturbed field is exactly zero.
  ScalarField psi(geo);
  const double amp = config.scenario.perturbation * b0 * len.x / (2.0 * std::numbers::pi);
  for (int k = 0; k < geo.nodes[2]; ++k)
    for (int j = 0; j < geo.nodes[1]; ++j)
      for (int i = 0; i < geo.nodes[0]; ++i) {
        const Vec3 x = geo.node_position(i, j, k);
        psi(i, j, k) = amp * std::cos(2.0 * std::numbers::pi * (x.x - 0.5 * len.x) / len.x) *
                       std::cos(2.0 * std::numbers::pi * (x.y - y1) / len.y);
      }
  sync_periodic(psi);
  for (int k = 0; k < geo.nodes[2]; ++k)
    for (int j = 0; j < geo.nodes[1]; ++j)
      for (int i = 0; i < geo.nodes[0]; ++i) {
        const Vec3 x = geo.node_position(i, j, k);
        const Vec3 grad = gradient_at(psi, i, j, k);
        Vec3 b = config.scenario.background_b;
        b.x += -harris_bx(x.y - y1, b0, lambda) + harris_bx(x.y - y2, b0, lambda) + b0;
        b.x += -grad.y;
        b.y += grad.x;
        st.fields.B(i, j, k) = b;
      }
  sync_periodic(st.fields.B);
  load_species(st, config);
  return st;
}

Vec3 dipole_field(const Vec3& moment, const Vec3& r) {
  const double rn = norm(r);
  if (rn == 0.0) return {};
  const Vec3 rhat = r / rn;
  return (rhat * (3.0 * dot(moment, rhat)) - moment) / (rn * rn * rn);
}

Vec3 dipole_centre(const SimConfig& config) {
  Vec3 c = config.scenario.dipole_center;
  for (int a = 0; a < 3; ++a)
    if (c[a] < 0.0) c[a] = 0.5 * config.domain_lengths[a];
  return c;
}

Vec3 external_b(const SimConfig& config, const Vec3& x) {
  Vec3 b = config.scenario.background_b;
  switch (config.scenario.kind) {
    case ScenarioKind::Uniform:
      break;
    case ScenarioKind::GemHarris: {
      const auto [y1, y2] = harris_sheet_centres(config);
      const double b0 = config.scenario.sheet_b0;
      const double l = config.scenario.sheet_half_width;
      b.x += -harris_bx(x.y - y1, b0, l) + harris_bx(x.y - y2, b0, l) + b0;
      break;
    }
    case ScenarioKind::Dipole: {
      Vec3 r = x - dipole_centre(config);
      const GridGeometry geo(config);
      const double floor_r = std::max(config.scenario.core_radius,
                                      0.5 * std::min({geo.spacing(0), geo.spacing(1), geo.spacing(2)}));
      const double rn = norm(r);
      if (rn < floor_r) r = rn > 0.0 ? r * (floor_r / rn) : Vec3{floor_r, 0.0, 0.0};
      b += dipole_field(config.scenario.dipole_moment, r);
      break;
    }
  }
  return b;
}

VectorField external_b_field(const SimConfig& config) {
  const GridGeometry geo(config);
  VectorField b(geo);
  for (int k = -1; k <= geo.nodes[2]; ++k)
    for (int j = -1; j <= geo.nodes[1]; ++j)
      for (int i = -1; i <= geo.nodes[0]; ++i) b(i, j, k) = external_b(config, geo.node_position(i, j, k));
  return b;
}

SimState init_dipole_scenario(const SimConfig& config) {
  if (config.boundary_mode != BoundaryMode::OpenInflow)
    throw ScenarioError("dipole scenario requires open inflow boundaries");
  const Vec3 centre = dipole_centre(config);
  for (int a = 0; a < 3; ++a)
    if (!(centre[a] > 0.0 && centre[a] < config.domain_lengths[a]))
      throw ScenarioError("dipole centre lies outside the domain");

  SimState st = make_empty_state(config);
  st.fields.B = external_b_field(config);
  if (!config.species.empty()) {
    // Convection field of the wind: E = -v_d x B_bg / c.
    const Vec3 e = -cross(config.species.front().drift_velocity, config.scenario.background_b) / config.c;
    st.fields.E.fill(e);
  }
  load_species(st, config);
  return st;
}

SimState init_scenario(const SimConfig& config) {
  switch (config.scenario.kind) {
    case ScenarioKind::Uniform:
      return init_uniform_plasma(config);
    case ScenarioKind::GemHarris:
      return init_gem_harris(config);
    case ScenarioKind::Dipole:
      return init_dipole_scenario(config);
  }
  throw ScenarioError("unknown scenario");
}

InflowFace inflow_face(const SimConfig& config) {
  InflowFace f;
  if (config.species.empty()) return f;
  const Vec3 d = config.species.front().drift_velocity;
  int axis = 0;
  for (int a = 1; a < 3; ++a)
    if (std::abs(d[a]) > std::abs(d[axis])) axis = a;
  f.axis = axis;
  f.side = d[axis] < 0.0 ? 1 : 0;
  return f;
}

std::vector<std::size_t> inject_inflow(SimState& state, const SimConfig& config) {
  const GridGeometry geo(config);
  const InflowFace face = inflow_face(config);
  const int a = face.axis;
  const int b = (a + 1) % 3, c = (a + 2) % 3;
  const double h = geo.spacing(a);
  const double la = geo.length[a];
  std::vector<std::size_t> injected(config.species.size(), 0);

  for (std::size_t s = 0; s < config.species.size(); ++s) {
    const auto& sp = config.species[s];
    const double rho = species_charge_density(sp);
    const int ppc = sp.particles_per_cell;
    const double w = rho * geo.cell_volume() / ppc;
    auto& list = state.species[s];
    // Fill one ghost cell slab outside the face and free-stream it for dt.
    for (int jc = 0; jc < geo.cells(c); ++jc)
      for (int jb = 0; jb < geo.cells(b); ++jb)
        for (int p = 0; p < ppc; ++p) {
          Particle q;
          const double depth = state.rng.uniform() * h;
          q.position[a] = face.side == 0 ? -depth : la + depth;
          q.position[b] = (jb + state.rng.uniform()) * geo.spacing(b);
          q.position[c] = (jc + state.rng.uniform()) * geo.spacing(c);
          q.velocity = sample_velocity(state.rng, sp, config.c);
          q.weight = w;
          q.position += q.velocity * config.dt;
          bool inside = true;
          for (int ax = 0; ax < 3; ++ax)
            if (!(q.position[ax] >= 0.0 && q.position[ax] <= geo.length[ax])) inside = false;
          if (inside) {
            list.push_back(q);
            ++injected[s];
          }
        }
  }
  return injected;
}

}  // namespace ipic
