#include "ipic/mover.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "ipic/stencil.hpp"

namespace ipic {
namespace {

double wrap_coordinate(double x, double l) {
  double r = x - l * std::floor(x / l);
  return r >= l ? 0.0 : r;
}

Vec3 sampling_point(const GridGeometry& g, Vec3 x) {
  for (int a = 0; a < 3; ++a) {
    if (g.mode == BoundaryMode::Periodic) {
      x[a] = wrap_coordinate(x[a], g.length[a]);
    } else {
      const double h = g.spacing(a);
      x[a] = std::clamp(x[a], -h, g.length[a] + h);
    }
  }
  return x;
}

}  // namespace

FieldSample sample_fields_at(const FieldGrid& grid, const Vec3& position) {
  const auto s = make_stencil(grid.geometry, position, /*allow_ghosts=*/true);
  FieldSample out;
  for (int c = 0; c < 8; ++c) {
    const int i = s.node(c, 0), j = s.node(c, 1), k = s.node(c, 2);
    out.E += grid.E(i, j, k) * s.weights[c];
    out.B += grid.B(i, j, k) * s.weights[c];
  }
  return out;
}

Particle push_particle(const Particle& p, const FieldGrid& grid, const SpeciesParams& species, double dt,
                       double c, const MoverParams& params, MoverScratch* scratch) {
  const double qom = species.charge_over_mass;
  const double c2 = c * c;
  const double gamma_n = lorentz_gamma(p.velocity, c);
  const Vec3 u_n = p.velocity * gamma_n;

  Vec3 v_bar = p.velocity;
  double gamma_np1 = gamma_n;
  Vec3 v_tilde, omega;
  double gamma_tilde = gamma_n, D = gamma_n;
  Vec3 u_np1 = u_n;
  int it = 0;
  if (scratch) scratch->residuals.clear();

  for (it = 1; it <= params.max_iterations; ++it) {
    const Vec3 x_bar = sampling_point(grid.geometry, p.position + v_bar * (0.5 * dt));
    const FieldSample f = sample_fields_at(grid, x_bar);
    if (!is_finite(f.E) || !is_finite(f.B)) throw MoverError("non-finite field sampled by the mover");

    gamma_tilde = 0.5 * (gamma_n + gamma_np1);
    v_tilde = u_n + f.E * (qom * 0.5 * dt);
    omega = f.B * (qom / c);
    const double a = dt / (2.0 * gamma_tilde);
    D = gamma_tilde * (1.0 + a * a * norm2(omega));
    // E kick, gyro-rotation and guiding-centre terms. The parallel term carries
    // a^2 = (dt / 2 gamma~)^2 so that the magnetic update is an exact rotation of u.
    const Vec3 v_new = (v_tilde + cross(v_tilde, omega) * a + omega * (a * a * dot(v_tilde, omega))) / D;

    u_np1 = v_new * (2.0 * gamma_tilde) - u_n;
    const double gamma_new = std::sqrt(1.0 + norm2(u_np1) / c2);

    const double dv = norm(v_new - v_bar);
    const double dg = std::abs(gamma_new - gamma_np1);
    v_bar = v_new;
    gamma_np1 = gamma_new;
    if (it > 1 && scratch) scratch->residuals.push_back(dv);
    if (it > 1 && dv < params.tolerance && dg < params.tolerance) break;
  }
  it = std::min(it, params.max_iterations);

  Particle out = p;
  out.position = p.position + v_bar * dt;
  out.velocity = u_np1 / gamma_np1;
  if (!is_finite(out.velocity) || !is_finite(out.position) || !(norm2(out.velocity) < c2))
    throw MoverError("particle speed reached c; reduce dt");

  if (scratch) {
    scratch->v_tilde = v_tilde;
    scratch->v_bar = v_bar;
    scratch->gamma_n = gamma_n;
    scratch->gamma_np1 = gamma_np1;
    scratch->gamma_tilde = gamma_tilde;
    scratch->D = D;
    scratch->Omega = omega;
    scratch->iterations = it;
  }
  return out;
}

void push_species(ParticleList& particles, const FieldGrid& grid, const SpeciesParams& species, double dt,
                  double c, const MoverParams& params, int workers) {
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) particles[n] = push_particle(particles[n], grid, species, dt, c, params);
  };
  const std::size_t count = particles.size();
  if (workers <= 1 || count < 1024) {
    run(0, count);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::size_t b = std::min(count, w * chunk), e = std::min(count, b + chunk);
    pool.emplace_back([&, w, b, e] {
      try {
        run(b, e);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

BoundaryVerdict apply_particle_bc(const Particle& p, const GridGeometry& g, const InflowFace& inflow) {
  BoundaryVerdict v{BoundaryAction::Kept, p};
  if (g.mode == BoundaryMode::Periodic) {
    for (int a = 0; a < 3; ++a) {
      const double l = g.length[a];
      if (p.position[a] < 0.0 || p.position[a] >= l) {
        v.particle.position[a] = wrap_coordinate(p.position[a], l);
        v.action = BoundaryAction::Wrapped;
      }
    }
    return v;
  }
  for (int a = 0; a < 3; ++a) {
    const double l = g.length[a];
    const double x = p.position[a];
    if (x >= 0.0 && x <= l) continue;
    const bool through_inflow = a == inflow.axis && ((inflow.side == 0 && x < 0.0) || (inflow.side == 1 && x > l));
    if (!through_inflow) return {BoundaryAction::Removed, p};
    // Specular reflection back through the inflow face.
    v.particle.position[a] = inflow.side == 0 ? -x : 2.0 * l - x;
    v.particle.velocity[a] = -v.particle.velocity[a];
    if (!(v.particle.position[a] >= 0.0 && v.particle.position[a] <= l)) return {BoundaryAction::Removed, p};
    v.action = BoundaryAction::Reinjected;
  }
  return v;
}

std::size_t apply_species_bc(ParticleList& particles, const GridGeometry& g, const InflowFace& inflow) {
  std::size_t kept = 0;
  for (std::size_t n = 0; n < particles.size(); ++n) {
    const auto v = apply_particle_bc(particles[n], g, inflow);
    if (v.action == BoundaryAction::Removed) continue;
    particles[kept++] = v.particle;
  }
  const std::size_t removed = particles.size() - kept;
  particles.resize(kept);
  return removed;
}

}  // namespace ipic
