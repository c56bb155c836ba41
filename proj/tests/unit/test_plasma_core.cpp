#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ipic/config.hpp"
#include "ipic/maxwell.hpp"
#include "ipic/moments.hpp"
#include "ipic/scenarios.hpp"

using namespace ipic;

namespace {

SimConfig two_species(int n, int ppc) {
  SimConfig cfg;
  cfg.grid_dims = {n, n, n};
  cfg.domain_lengths = {1.0, 1.0, 1.0};
  SpeciesParams ion, ele;
  ion.charge_over_mass = 1.0;
  ion.particles_per_cell = ppc;
  ele.charge_over_mass = -25.0;
  ele.particles_per_cell = ppc;
  ele.thermal_velocity = {0.05, 0.05, 0.05};
  ion.thermal_velocity = {0.01, 0.01, 0.01};
  cfg.species = {ion, ele};
  return cfg;
}

bool inside(const SimState& s, const GridGeometry& g) {
  for (const auto& sp : s.species)
    for (const auto& p : sp)
      for (int a = 0; a < 3; ++a)
        if (!(p.position[a] >= 0.0 && p.position[a] < g.length[a])) return false;
  return true;
}

}  // namespace

TEST_CASE("config: minimal document gets defaults") {
  const auto cfg = load_config("[grid]\nnx = 16\nny = 16\nnz = 16\n[time]\ndt = 0.1\n");
  CHECK(cfg.grid_dims == std::array<int, 3>{16, 16, 16});
  CHECK(cfg.dt == 0.1);
  CHECK(cfg.c == 1.0);
  CHECK(cfg.solver_params.restart == 20);
  CHECK(cfg.solver_params.tolerance == 1e-8);
  CHECK(cfg.solver_params.inner_iterations == 5);
  CHECK(cfg.mover_params.max_iterations == 3);
  CHECK(cfg.boundary_mode == BoundaryMode::Periodic);
}

TEST_CASE("config: validation and parse errors") {
  try {
    load_config("[time]\ndt = -1\n");
    FAIL("expected validation error");
  } catch (const ConfigValidationError& e) {
    CHECK(std::string(e.what()) == "dt must be positive");
  }
  CHECK_THROWS_AS(load_config("[control]\ntheta = 1.5\n"), ConfigValidationError);
  CHECK_THROWS_AS(load_config("[grid]\nnx = 3\n"), ConfigValidationError);
  try {
    load_config("[time]\n\ndt = abc\n");
    FAIL("expected parse error");
  } catch (const ConfigParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(load_config("[time]\nbogus = 1\n"), ConfigParseError);
  CHECK_THROWS_AS(load_config("[nonsense]\n"), ConfigParseError);
}

TEST_CASE("config: theta, species and scenario keys") {
  const auto cfg = load_config(R"(
# comment line
[control]
theta = 0.05   # trailing comment
[species.0]
qom = 1
vth = 0.01
ppc = 8
[species.1]
qom = -25
vth = 0.05, 0.04, 0.03
drift = 0 0 0.01
[scenario]
type = gem
sheet_half_width = 0.5
)");
  CHECK(cfg.control_params.theta == 0.05);
  REQUIRE(cfg.species.size() == 2);
  CHECK(cfg.species[0].particles_per_cell == 8);
  CHECK(cfg.species[1].thermal_velocity == Vec3{0.05, 0.04, 0.03});
  CHECK(cfg.species[1].drift_velocity == Vec3{0, 0, 0.01});
  CHECK(cfg.scenario.kind == ScenarioKind::GemHarris);
}

TEST_CASE("uniform plasma: counts, zero velocity, inside domain") {
  auto cfg = two_species(8, 8);
  cfg.species[0].thermal_velocity = {};
  cfg.species[1].thermal_velocity = {};
  const auto s = init_uniform_plasma(cfg);
  REQUIRE(s.species.size() == 2);
  CHECK(s.species[0].size() == 8u * 7 * 7 * 7);
  CHECK(s.species[1].size() == 8u * 7 * 7 * 7);
  for (const auto& sp : s.species)
    for (const auto& p : sp) CHECK(p.velocity == Vec3{});
  CHECK(inside(s, GridGeometry(cfg)));
}

TEST_CASE("uniform plasma: ion plasma frequency is one") {
  auto cfg = two_species(8, 4);
  const auto s = init_uniform_plasma(cfg);
  const GridGeometry g(cfg);
  const auto m = gather_species(s.species[0], cfg.species[0], g);
  double sum = 0.0;
  for_each_solver_node(g, [&](int i, int j, int k) { sum += m.rho(i, j, k); });
  const double mean = sum / double(g.solver_node_count());
  CHECK(4.0 * std::numbers::pi * mean * cfg.species[0].charge_over_mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("uniform plasma: velocity variance matches thermal speed") {
  auto cfg = two_species(16, 30);  // 30 * 15^3 ~ 1e5 particles
  cfg.species.resize(1);
  cfg.species[0].thermal_velocity = {0.02, 0.03, 0.04};
  const auto s = init_uniform_plasma(cfg);
  const auto& ps = s.species[0];
  const double n = double(ps.size());
  for (int a = 0; a < 3; ++a) {
    double m1 = 0, m2 = 0;
    for (const auto& p : ps) m1 += p.velocity[a];
    m1 /= n;
    for (const auto& p : ps) m2 += (p.velocity[a] - m1) * (p.velocity[a] - m1);
    const double var = m2 / (n - 1);
    const double target = cfg.species[0].thermal_velocity[a] * cfg.species[0].thermal_velocity[a];
    // Standard error of the sample variance of a Gaussian is sigma^2 sqrt(2/(n-1)).
    CHECK(std::abs(var - target) < 3.0 * target * std::sqrt(2.0 / (n - 1)));
  }
}

TEST_CASE("uniform plasma: deterministic under seed") {
  const auto cfg = two_species(6, 4);
  const auto a = init_uniform_plasma(cfg);
  const auto b = init_uniform_plasma(cfg);
  CHECK(a.species == b.species);
  CHECK(a.rng == b.rng);
  auto other = cfg;
  other.rng_seed = 2;
  CHECK_FALSE(init_uniform_plasma(other).species == a.species);
}

TEST_CASE("uniform plasma: co-located loading has negligible Gauss residual") {
  const auto cfg = two_species(8, 8);
  const auto s = init_uniform_plasma(cfg);
  const GridGeometry g(cfg);
  const auto m = gather_moments(s.species, cfg.species, g);
  double num = 0, den = 0;
  for_each_solver_node(g, [&](int i, int j, int k) {
    num += m.total.rho(i, j, k) * m.total.rho(i, j, k);
    den += m.species[0].rho(i, j, k) * m.species[0].rho(i, j, k);
  });
  CHECK(std::sqrt(num / den) < 1e-10);
  // E = 0 satisfies Gauss's law for the neutral load; the relative measure is
  // bounded by the neutrality error.
  const double r = gauss_residual(s.fields.E, m.total.rho);
  CHECK((r < 1e-10 || std::sqrt(num) < 1e-12));
}

TEST_CASE("harris profile") {
  CHECK(harris_bx(0.0, 0.1, 0.5) == 0.0);
  CHECK(harris_bx(20.0, 0.1, 0.5) == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(harris_bx(-20.0, 0.1, 0.5) == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("gem: neutral, inside, rejects narrow domain") {
  SimConfig cfg;
  cfg.grid_dims = {17, 17, 4};
  cfg.domain_lengths = {6.4, 6.4, 1.0};
  cfg.scenario.kind = ScenarioKind::GemHarris;
  cfg.scenario.sheet_b0 = 0.1;
  cfg.scenario.sheet_half_width = 0.5;
  SpeciesParams ion, ele;
  ion.charge_over_mass = 1.0;
  ion.particles_per_cell = 4;
  ion.thermal_velocity = {0.06, 0.06, 0.06};
  ele.charge_over_mass = -25.0;
  ele.particles_per_cell = 4;
  ele.thermal_velocity = {0.14, 0.14, 0.14};
  auto sheet_i = ion, sheet_e = ele;
  sheet_i.profile = sheet_e.profile = DensityProfile::Harris;
  sheet_i.drift_velocity = {0, 0, 0.1};
  sheet_e.drift_velocity = {0, 0, -0.02};
  cfg.species = {ion, ele, sheet_i, sheet_e};
  const auto s = init_gem_harris(cfg);
  double q = 0.0, qabs = 0.0;
  for (std::size_t n = 0; n < s.species.size(); ++n)
    for (const auto& p : s.species[n]) {
      q += cfg.species[n].charge_sign() * p.weight;
      qabs += p.weight;
    }
  CHECK(std::abs(q) <= 1e-12 * qabs);
  CHECK(inside(s, GridGeometry(cfg)));

  auto narrow = cfg;
  narrow.domain_lengths.y = 3.0;  // half-height 1.5 < 4 lambda
  CHECK_THROWS_AS(init_gem_harris(narrow), ScenarioError);
}

namespace {

SimConfig dipole_config(Vec3 moment) {
  SimConfig cfg;
  cfg.grid_dims = {17, 17, 17};
  cfg.domain_lengths = {8.0, 8.0, 8.0};
  cfg.boundary_mode = BoundaryMode::OpenInflow;
  cfg.scenario.kind = ScenarioKind::Dipole;
  cfg.scenario.background_b = {0, 0, 0.05};
  cfg.scenario.dipole_moment = moment;
  SpeciesParams ion, ele;
  ion.charge_over_mass = 1.0;
  ion.particles_per_cell = 4;
  ion.drift_velocity = {0.1, 0, 0};
  ion.thermal_velocity = {0.01, 0.01, 0.01};
  ele.charge_over_mass = -25.0;
  ele.particles_per_cell = 4;
  ele.drift_velocity = {0.1, 0, 0};
  ele.thermal_velocity = {0.02, 0.02, 0.02};
  cfg.species = {ion, ele};
  cfg.dt = 0.5;
  return cfg;
}

}  // namespace

TEST_CASE("dipole: zero moment gives the background field") {
  const auto cfg = dipole_config({});
  const auto s = init_dipole_scenario(cfg);
  const auto& g = s.fields.geometry;
  for (int k = 0; k < g.nodes[2]; ++k)
    for (int j = 0; j < g.nodes[1]; ++j)
      for (int i = 0; i < g.nodes[0]; ++i) CHECK(s.fields.B(i, j, k) == cfg.scenario.background_b);
}

TEST_CASE("dipole: on-axis field falls as r^-3") {
  const Vec3 m{0, 0, 10.0};
  for (double r : {1.0, 2.0, 3.0}) {
    const Vec3 b = dipole_field(m, {0, 0, r});
    CHECK(b.z == doctest::Approx(2.0 * 10.0 / (r * r * r)).epsilon(1e-14));
  }
  auto cfg = dipole_config(m);
  const auto s = init_dipole_scenario(cfg);
  const auto c = dipole_centre(cfg);
  const auto& g = s.fields.geometry;
  const int ic = int(std::lround(c.x / g.spacing(0)));
  const int jc = int(std::lround(c.y / g.spacing(1)));
  const int kc = int(std::lround(c.z / g.spacing(2)));
  for (int d = 2; d <= 6; ++d) {
    const double r = d * g.spacing(2);
    const double bz = s.fields.B(ic, jc, kc + d).z - cfg.scenario.background_b.z;
    CHECK(bz == doctest::Approx(2.0 * m.z / (r * r * r)).epsilon(1e-12));
  }
  auto outside = cfg;
  outside.scenario.dipole_center = {20.0, 4.0, 4.0};
  CHECK_THROWS_AS(init_dipole_scenario(outside), ScenarioError);
}

TEST_CASE("dipole: injection flux matches n v A dt") {
  auto cfg = dipole_config({});
  auto s = init_dipole_scenario(cfg);
  const auto face = inflow_face(cfg);
  CHECK(face.axis == 0);
  CHECK(face.side == 0);
  const GridGeometry g(cfg);
  // Expected particle count per cycle from the loaded density of species 0.
  const double n_particles = double(cfg.species[0].particles_per_cell) / g.cell_volume();
  const double area = cfg.domain_lengths.y * cfg.domain_lengths.z;
  const double expected = n_particles * cfg.species[0].drift_velocity.x * area * cfg.dt;
  double total = 0;
  const int cycles = 20;
  for (int n = 0; n < cycles; ++n) total += double(inject_inflow(s, cfg)[0]);
  CHECK(std::abs(total / cycles - expected) < 0.1 * expected);
}
