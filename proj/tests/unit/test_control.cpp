#include <cmath>

#include "doctest.h"
#include "ipic/control.hpp"
#include "ipic/moments.hpp"

using namespace ipic;

namespace {

const GridGeometry kGrid({5, 5, 5}, {4.0, 4.0, 4.0}, BoundaryMode::Periodic);

ParticleList maxwellian(int n, std::uint64_t seed, double vth = 0.1, bool one_cell = false) {
  Rng rng(seed);
  ParticleList ps;
  const double span = one_cell ? 1.0 : 4.0;
  for (int i = 0; i < n; ++i)
    ps.push_back({{span * rng.uniform(), span * rng.uniform(), span * rng.uniform()},
                  {vth * rng.normal(), vth * rng.normal(), vth * rng.normal()},
                  0.5 + rng.uniform()});
  return ps;
}

struct Sums {
  double q = 0, e = 0;
  Vec3 p;
  double pscale = 0;
};

// Relativistic totals per unit |q/m| with c = 1.
Sums sums(const ParticleList& ps) {
  Sums s;
  for (const auto& x : ps) {
    const double gamma = 1.0 / std::sqrt(1.0 - norm2(x.velocity));
    s.q += x.weight;
    s.p += x.velocity * (x.weight * gamma);
    s.pscale += x.weight * gamma * norm(x.velocity);
    s.e += x.weight * (gamma - 1.0);
  }
  return s;
}

}  // namespace

TEST_CASE("census") {
  std::vector<ParticleList> sp(1);
  CHECK(census(sp, kGrid, RegionGranularity::WholeDomain)[0][0] == 0);
  for (long c = 0; c < long(kGrid.cell_count()); ++c) {
    const auto box = region_box(kGrid, RegionGranularity::PerCell, c);
    for (int n = 0; n < 6; ++n) sp[0].push_back({box.lo + kGrid.spacing() * (0.1 + 0.13 * n), {}, 1.0});
  }
  auto counts = census(sp, kGrid, RegionGranularity::PerCell);
  REQUIRE(counts[0].size() == 64);
  for (auto c : counts[0]) CHECK(c == 6);
  CHECK(census(sp, kGrid, RegionGranularity::WholeDomain)[0][0] == 6 * 64);
  // Delete half the particles of cell 5.
  ParticleList kept;
  int dropped = 0;
  for (const auto& p : sp[0])
    if (region_of(kGrid, RegionGranularity::PerCell, p.position) == 5 && dropped < 3)
      ++dropped;
    else
      kept.push_back(p);
  sp[0] = kept;
  CHECK(census(sp, kGrid, RegionGranularity::PerCell)[0][5] == 3);
}

TEST_CASE("split: single particle and identity") {
  Rng rng(1);
  ParticleList ps{{{2.0, 2.0, 2.0}, {0.1, 0.2, 0.3}, 2.0}};
  split_particles(ps, 0, kGrid, {{}, kGrid.length}, rng);
  CHECK(ps.size() == 1);
  split_particles(ps, 1, kGrid, {{}, kGrid.length}, rng);
  REQUIRE(ps.size() == 2);
  CHECK(ps[0].weight == 1.0);
  CHECK(ps[1].weight == 1.0);
  CHECK(ps[0].velocity == ps[1].velocity);
  const Vec3 mid = (ps[0].position + ps[1].position) * 0.5;
  CHECK(mid == Vec3{2.0, 2.0, 2.0});
  CHECK(norm(ps[0].position - ps[1].position) == doctest::Approx(0.5));

  ParticleList empty;
  CHECK_THROWS_AS(split_particles(empty, 1, kGrid, {{}, kGrid.length}, rng), std::invalid_argument);
}

TEST_CASE("split: heaviest first with stable ties, clamped in box") {
  Rng rng(2);
  ParticleList ps{{{0.0, 0.0, 0.0}, {}, 1.0}, {{1.0, 1.0, 1.0}, {}, 3.0}, {{3.0, 3.0, 3.0}, {}, 3.0}};
  split_particles(ps, 1, kGrid, {{}, kGrid.length}, rng);
  CHECK(ps[1].weight == 1.5);
  CHECK(ps[2].weight == 3.0);
  for (int n = 0; n < 40; ++n) split_particles(ps, 1, kGrid, {{}, kGrid.length}, rng);
  for (const auto& p : ps)
    for (int a = 0; a < 3; ++a) {
      CHECK(p.position[a] >= 0.0);
      CHECK(p.position[a] < 4.0);
    }
}

TEST_CASE("split: conservation on random particles") {
  Rng rng(3);
  auto ps = maxwellian(1000, 4);
  const auto before = sums(ps);
  split_particles(ps, 100, kGrid, {{}, kGrid.length}, rng);
  CHECK(ps.size() == 1100);
  const auto after = sums(ps);
  CHECK(std::abs(after.q - before.q) <= 1e-12 * before.q);
  CHECK(norm(after.p - before.p) <= 1e-12 * before.pscale);
  CHECK(std::abs(after.e - before.e) <= 1e-12 * before.e);
}

TEST_CASE("split with zero offset changes no moment") {
  const GridGeometry g({5, 5, 5}, {4.0, 4.0, 4.0}, BoundaryMode::Periodic);
  auto ps = maxwellian(200, 9);
  SpeciesParams sp;
  const auto m0 = gather_species(ps, sp, g);
  Rng rng(5);
  // A degenerate box pins both daughters to the parent position on every axis.
  for (int n = 0; n < 50; ++n) {
    const auto& p = ps[0];
    ParticleList one{p};
    split_particles(one, 1, g, {p.position, std::nextafter(p.position.x, 1e9) * Vec3{1, 1, 1}}, rng);
  }
  ParticleList doubled;
  for (const auto& p : ps) {
    ParticleList one{p};
    const Vec3 hi{std::nextafter(p.position.x, 1e9), std::nextafter(p.position.y, 1e9), std::nextafter(p.position.z, 1e9)};
    split_particles(one, 1, g, {p.position, hi}, rng);
    doubled.insert(doubled.end(), one.begin(), one.end());
  }
  const auto m1 = gather_species(doubled, sp, g);
  double scale = 0;
  for (double v : m0.rho.raw()) scale = std::max(scale, std::abs(v));
  for (std::size_t n = 0; n < m0.rho.size(); ++n) {
    CHECK(std::abs(m1.rho.raw()[n] - m0.rho.raw()[n]) <= 1e-13 * scale);
    for (int c = 0; c < 6; ++c) CHECK(std::abs(m1.Pi.raw()[n].c[c] - m0.Pi.raw()[n].c[c]) <= 1e-13 * scale);
  }
}

TEST_CASE("coalesce: identical and opposite pairs") {
  ParticleList same{{{1.2, 1.3, 1.4}, {0.1, 0.2, 0.3}, 1.0}, {{1.2, 1.3, 1.4}, {0.1, 0.2, 0.3}, 1.0}};
  CHECK(coalesce_particles(same, 1, kGrid, 4, 1.0) == 1);
  REQUIRE(same.size() == 1);
  CHECK(same[0].weight == 2.0);
  CHECK(same[0].position == Vec3{1.2, 1.3, 1.4});
  CHECK(norm(same[0].velocity - Vec3{0.1, 0.2, 0.3}) <= 1e-16);

  ParticleList opposite{{{1.5, 1.5, 1.5}, {0.6, 0, 0}, 1.0}, {{1.5, 1.5, 1.5}, {-0.6, 0, 0}, 1.0}};
  CHECK(sums(opposite).e == doctest::Approx(0.5));
  CHECK(coalesce_particles(opposite, 1, kGrid, 1, 1.0) == 1);
  CHECK(opposite[0].velocity == Vec3{});
  CHECK(sums(opposite).e == 0.0);
}

TEST_CASE("coalesce: 10 percent reduction of a Maxwellian") {
  for (bool one_cell : {false, true}) {
    auto ps = maxwellian(1000, 7, 0.1, one_cell);
    const auto before = sums(ps);
    CHECK(coalesce_particles(ps, 100, kGrid, 4, 1.0) == 100);
    CHECK(ps.size() == 900);
    const auto after = sums(ps);
    CHECK(std::abs(after.q - before.q) <= 1e-12 * before.q);
    CHECK(norm(after.p - before.p) <= 1e-12 * before.pscale);
    CHECK(after.e <= before.e);
    // The 1% bound applies to a single-cell region, where every pair is a candidate.
    if (one_cell) CHECK(before.e - after.e < 0.01 * before.e);
  }
}

TEST_CASE("coalesce: relativistic pair conserves momentum") {
  ParticleList ps{{{1.2, 1.2, 1.2}, {0.9, 0, 0}, 1.0}, {{1.3, 1.2, 1.2}, {0.2, 0.3, 0}, 3.0}};
  const auto before = sums(ps);
  CHECK(coalesce_particles(ps, 1, kGrid, 1, 1.0) == 1);
  const auto after = sums(ps);
  CHECK(norm(after.p - before.p) <= 1e-14 * before.pscale);
  CHECK(after.e < before.e);
  CHECK(norm(ps[0].velocity) < 1.0);
}

TEST_CASE("coalesce: pairs stay within a cell") {
  ParticleList ps{{{0.5, 0.5, 0.5}, {0.1, 0, 0}, 1.0}, {{1.5, 0.5, 0.5}, {0.1, 0, 0}, 1.0}};
  CHECK(coalesce_particles(ps, 1, kGrid, 4, 1.0) == 0);
  CHECK(ps.size() == 2);
}

TEST_CASE("control pass: band, coalesce and split branches") {
  SimState st;
  st.rng = Rng(11);
  ControlPolicy pol;
  pol.theta = 0.05;
  pol.targets = {1000};
  st.species = {maxwellian(1000, 1)};
  CHECK(control_pass(st, kGrid, pol).empty());
  CHECK(st.species[0].size() == 1000);

  st.species = {maxwellian(2000, 2)};
  const auto reps = control_pass(st, kGrid, pol);
  REQUIRE(reps.size() == 1);
  CHECK(reps[0].action == ControlAction::Coalesce);
  CHECK(std::abs(long(st.species[0].size()) - 1000) <= 1);
  CHECK(reps[0].charge_delta <= 1e-12);
  CHECK(reps[0].momentum_delta <= 1e-12);
  CHECK(reps[0].energy_delta <= 0.0);
  CHECK_FALSE(reps[0].partial);
  // Idempotent once inside the band.
  const auto copy = st.species;
  CHECK(control_pass(st, kGrid, pol).empty());
  CHECK(st.species == copy);

  st.species = {maxwellian(500, 3)};
  const auto rs = control_pass(st, kGrid, pol);
  REQUIRE(rs.size() == 1);
  CHECK(rs[0].action == ControlAction::Split);
  CHECK(std::abs(long(st.species[0].size()) - 1000) <= 1);
  CHECK(rs[0].charge_delta <= 1e-12);
  CHECK(rs[0].momentum_delta <= 1e-12);
  CHECK(std::abs(rs[0].energy_delta) <= 1e-12 * sums(st.species[0]).e);
}

TEST_CASE("control pass: per-cell regions") {
  SimState st;
  ControlPolicy pol;
  pol.targets = {8};
  pol.region = RegionGranularity::PerCell;
  st.species = {maxwellian(64 * 16, 4)};  // about twice the target per cell
  const auto before = sums(st.species[0]);
  control_pass(st, kGrid, pol);
  const auto counts = census(st.species, kGrid, RegionGranularity::PerCell);
  for (auto c : counts[0]) CHECK(std::abs(double(c) - 8.0) <= 8.0 * 0.05 + 1.0);
  const auto after = sums(st.species[0]);
  CHECK(std::abs(after.q - before.q) <= 1e-12 * before.q);
  CHECK(norm(after.p - before.p) <= 1e-12 * before.pscale);
}

TEST_CASE("policy targets") {
  SimConfig cfg;
  cfg.grid_dims = {5, 5, 5};
  SpeciesParams s;
  s.particles_per_cell = 8;
  cfg.species = {s};
  CHECK(make_policy(cfg).targets[0] == 8 * 64);
  cfg.control_params.trigger_region = RegionGranularity::PerCell;
  CHECK(make_policy(cfg).targets[0] == 8);
  cfg.control_params.target = 77;
  CHECK(make_policy(cfg).targets[0] == 77);
}
