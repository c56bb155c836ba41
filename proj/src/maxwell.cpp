#include "ipic/maxwell.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ipic {
namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

}  // namespace

FieldVector pack_field(const VectorField& f) {
  const auto& g = f.geometry();
  FieldVector v;
  v.reserve(3 * g.solver_node_count());
  for_each_solver_node(g, [&](int i, int j, int k) {
    const Vec3& e = f(i, j, k);
    v.push_back(e.x);
    v.push_back(e.y);
    v.push_back(e.z);
  });
  return v;
}

void unpack_field(std::span<const double> v, VectorField& f) {
  std::size_t n = 0;
  for_each_solver_node(f.geometry(), [&](int i, int j, int k) {
    f(i, j, k) = {v[n], v[n + 1], v[n + 2]};
    n += 3;
  });
  sync_ghosts(f);
}

MaxwellOperator::MaxwellOperator(const SusceptibilityField& chi, double dt, double c)
    : chi_(&chi), geo_(chi.chi.geometry()), dt_(dt), c_(c), E_(geo_), P_(geo_), div_(geo_) {}

void MaxwellOperator::apply(std::span<const double> x, std::span<double> y) const {
  unpack_field(x, E_);
  const auto& chi = chi_->chi;
  for_each_solver_node(geo_, [&](int i, int j, int k) { P_(i, j, k) = chi(i, j, k) * E_(i, j, k); });
  sync_ghosts(P_);
  for_each_solver_node(geo_, [&](int i, int j, int k) { div_(i, j, k) = divergence_at(P_, i, j, k); });
  sync_ghosts(div_);
  const double s = (c_ * dt_) * (c_ * dt_);
  std::size_t n = 0;
  for_each_solver_node(geo_, [&](int i, int j, int k) {
    const Vec3 out = E_(i, j, k) + P_(i, j, k) - (laplacian_at(E_, i, j, k) + gradient_at(div_, i, j, k)) * s;
    y[n] = out.x;
    y[n + 1] = out.y;
    y[n + 2] = out.z;
    n += 3;
  });
}

FieldVector MaxwellOperator::apply(std::span<const double> x) const {
  FieldVector y(size());
  apply(x, y);
  return y;
}

LinearOperator MaxwellOperator::as_linear_operator() const {
  return [this](std::span<const double> x, std::span<double> y) { apply(x, y); };
}

FieldVector apply_maxwell_operator(std::span<const double> E_candidate, const SusceptibilityField& chi, double dt,
                                   double c) {
  return MaxwellOperator(chi, dt, c).apply(E_candidate);
}

FieldVector build_rhs(const VectorField& E_n, const VectorField& B_n, const HatMoments& hat, double dt, double c) {
  const auto& g = E_n.geometry();
  ScalarField phi_src(g);
  for_each_solver_node(g, [&](int i, int j, int k) { phi_src(i, j, k) = kFourPi * hat.rho_hat(i, j, k); });
  sync_ghosts(phi_src);
  const double cdt = c * dt;
  FieldVector v;
  v.reserve(3 * g.solver_node_count());
  for_each_solver_node(g, [&](int i, int j, int k) {
    const Vec3 r = E_n(i, j, k) + curl_at(B_n, i, j, k) * cdt - hat.J_hat(i, j, k) * (kFourPi * dt) -
                   gradient_at(phi_src, i, j, k) * (cdt * cdt);
    v.push_back(r.x);
    v.push_back(r.y);
    v.push_back(r.z);
  });
  return v;
}

std::pair<FieldVector, KrylovReport> solve_fields(const MaxwellOperator& op, std::span<const double> rhs,
                                                  const SolverParams& params, std::span<const double> initial) {
  FieldVector x(op.size(), 0.0);
  if (initial.size() == x.size()) std::copy(initial.begin(), initial.end(), x.begin());
  const KrylovParams kp{params.tolerance, params.restart, params.max_iterations, params.inner_iterations};
  const auto report = fgmres(op.as_linear_operator(), rhs, x, kp);
  return {std::move(x), report};
}

VectorField advance_B(const VectorField& B_n, const VectorField& E_np1, double dt, double c,
                      const VectorField* external) {
  const auto& g = B_n.geometry();
  VectorField B = B_n;
  const double cdt = c * dt;
  for_each_solver_node(g, [&](int i, int j, int k) { B(i, j, k) = B_n(i, j, k) - curl_at(E_np1, i, j, k) * cdt; });
  if (g.mode == BoundaryMode::Periodic)
    sync_periodic(B);
  else if (external)
    sync_fixed(B, *external);
  return B;
}

double gauss_residual(const VectorField& E, const ScalarField& rho) {
  const auto& g = E.geometry();
  const bool open = g.mode == BoundaryMode::OpenInflow;
  double num = 0.0, den = 0.0;
  for_each_solver_node(g, [&](int i, int j, int k) {
    if (open) {
      const int idx[3] = {i, j, k};
      for (int a = 0; a < 3; ++a)
        if (g.nodes[a] > 2 && (idx[a] == 0 || idx[a] == g.nodes[a] - 1)) return;
    }
    const double src = kFourPi * rho(i, j, k);
    const double r = divergence_at(E, i, j, k) - src;
    num += r * r;
    den += src * src;
  });
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace ipic
