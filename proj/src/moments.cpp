#include "ipic/moments.hpp"

#include <numbers>
#include <thread>

namespace ipic {
namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

template <class T>
void finish_boundaries(NodeArray<T>& f) {
  if (f.geometry().mode == BoundaryMode::Periodic) fold_periodic(f);
  sync_ghosts(f);
}

void accumulate(const ParticleList& particles, std::size_t begin, std::size_t end, double q,
                SpeciesMoments& out) {
  const auto& g = out.rho.geometry();
  for (std::size_t n = begin; n < end; ++n) {
    const auto& p = particles[n];
    const auto s = make_stencil(g, p.position, /*allow_ghosts=*/false);
    const double qw = q * p.weight;
    const Sym3 vv = Sym3::outer(p.velocity);
    for (int c = 0; c < 8; ++c) {
      const double w = qw * s.weights[c];
      if (w == 0.0) continue;
      const int i = s.node(c, 0), j = s.node(c, 1), k = s.node(c, 2);
      out.rho(i, j, k) += w;
      out.J(i, j, k) += p.velocity * w;
      out.Pi(i, j, k) += vv * w;
    }
  }
}

template <class T>
void add_into(NodeArray<T>& dst, const NodeArray<T>& src) {
  auto& d = dst.raw();
  const auto& s = src.raw();
  for (std::size_t n = 0; n < d.size(); ++n) d[n] += s[n];
}

template <class T>
void smooth_121(NodeArray<T>& f) {
  const auto& g = f.geometry();
  for (int a = 0; a < 3; ++a) {
    sync_ghosts(f);
    NodeArray<T> src = f;
    for_each_solver_node(g, [&](int i, int j, int k) {
      int lo[3] = {i, j, k}, hi[3] = {i, j, k};
      lo[a] -= 1;
      hi[a] += 1;
      f(i, j, k) = (src(lo[0], lo[1], lo[2]) + src(i, j, k) * 2.0 + src(hi[0], hi[1], hi[2])) * 0.25;
    });
  }
  sync_ghosts(f);
}

}  // namespace

InterpolationStencil deposit_stencil(const Vec3& position, const GridGeometry& grid) {
  return make_stencil(grid, position, /*allow_ghosts=*/false);
}

SpeciesMoments gather_species(const ParticleList& particles, const SpeciesParams& sp, const GridGeometry& g,
                              int workers) {
  SpeciesMoments m(g);
  const double q = sp.charge_sign();
  const std::size_t count = particles.size();
  if (workers <= 1 || count < 4096) {
    accumulate(particles, 0, count, q, m);
  } else {
    // Per-worker buffers merged in worker order keep the result independent of scheduling.
    std::vector<SpeciesMoments> partial(workers, SpeciesMoments(g));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::size_t b = std::min(count, w * chunk), e = std::min(count, b + chunk);
      pool.emplace_back([&, w, b, e] {
        try {
          accumulate(particles, b, e, q, partial[w]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (const auto& p : partial) {
      add_into(m.rho, p.rho);
      add_into(m.J, p.J);
      add_into(m.Pi, p.Pi);
    }
  }
  for (int k = 0; k < g.nodes[2]; ++k)
    for (int j = 0; j < g.nodes[1]; ++j)
      for (int i = 0; i < g.nodes[0]; ++i) {
        // Periodic boundary nodes are folded below, so they take the full volume.
        const double inv_v = 1.0 / g.node_volume(i, j, k);
        m.rho(i, j, k) *= inv_v;
        m.J(i, j, k) *= inv_v;
        m.Pi(i, j, k) *= inv_v;
      }
  finish_boundaries(m.rho);
  finish_boundaries(m.J);
  finish_boundaries(m.Pi);
  return m;
}

Moments gather_moments(const std::vector<ParticleList>& particles, const std::vector<SpeciesParams>& params,
                       const GridGeometry& g, int workers) {
  Moments m;
  m.total = SpeciesMoments(g);
  for (std::size_t s = 0; s < particles.size(); ++s) {
    m.species.push_back(gather_species(particles[s], params[s], g, workers));
    add_into(m.total.rho, m.species.back().rho);
    add_into(m.total.J, m.species.back().J);
    add_into(m.total.Pi, m.species.back().Pi);
  }
  return m;
}

void smooth_moments(Moments& m) {
  auto smooth_all = [](SpeciesMoments& s) {
    smooth_121(s.rho);
    smooth_121(s.J);
    smooth_121(s.Pi);
  };
  for (auto& s : m.species) smooth_all(s);
  smooth_all(m.total);
}

Mat3 rotation_tensor(const Vec3& omega, double dt) {
  const double h = 0.5 * dt;
  Mat3 r = Mat3::identity();
  // -(dt/2)[Omega]x, where [Omega]x v = Omega x v
  r(0, 1) += h * omega.z;
  r(0, 2) -= h * omega.y;
  r(1, 0) -= h * omega.z;
  r(1, 2) += h * omega.x;
  r(2, 0) += h * omega.y;
  r(2, 1) -= h * omega.x;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) r(a, b) += h * h * omega[a] * omega[b];
  return r * (1.0 / (1.0 + h * h * norm2(omega)));
}

double plasma_frequency_squared(double rho_s, double charge_over_mass) {
  const double w2 = kFourPi * rho_s * charge_over_mass;
  if (w2 < 0.0) throw MomentError("negative plasma frequency squared: charge density has the wrong sign");
  return w2;
}

SusceptibilityField build_susceptibility(const Moments& m, const VectorField& B, double dt, double c,
                                         const std::vector<SpeciesParams>& params) {
  const auto& g = B.geometry();
  SusceptibilityField out{NodeArray<Mat3>(g)};
  for (int k = -1; k <= g.nodes[2]; ++k)
    for (int j = -1; j <= g.nodes[1]; ++j)
      for (int i = -1; i <= g.nodes[0]; ++i) {
        Mat3 chi;
        for (std::size_t s = 0; s < params.size(); ++s) {
          const double qom = params[s].charge_over_mass;
          const double w2 = plasma_frequency_squared(m.species[s].rho(i, j, k), qom);
          if (w2 == 0.0) continue;
          chi += rotation_tensor(B(i, j, k) * (qom / c), dt) * (0.5 * w2 * dt * dt);
        }
        out.chi(i, j, k) = chi;
      }
  return out;
}

HatMoments build_hat_moments(const Moments& m, const VectorField& B, double dt, double c,
                             const std::vector<SpeciesParams>& params) {
  const auto& g = B.geometry();
  HatMoments h{ScalarField(g), VectorField(g)};
  for (std::size_t s = 0; s < params.size(); ++s) {
    const double qom = params[s].charge_over_mass;
    const auto& sm = m.species[s];
    for_each_solver_node(g, [&](int i, int j, int k) {
      const Vec3 src = sm.J(i, j, k) - tensor_divergence_at(sm.Pi, i, j, k) * (0.5 * dt);
      h.J_hat(i, j, k) += rotation_tensor(B(i, j, k) * (qom / c), dt) * src;
    });
  }
  sync_ghosts(h.J_hat);
  for_each_solver_node(g, [&](int i, int j, int k) {
    h.rho_hat(i, j, k) = m.total.rho(i, j, k) - dt * divergence_at(h.J_hat, i, j, k);
  });
  sync_ghosts(h.rho_hat);
  return h;
}

}  // namespace ipic
