#include "ipic/krylov.hpp"

#include <cmath>

namespace ipic {
namespace {

struct Givens {
  double c = 1.0;
  double s = 0.0;
};

void apply_givens(const Givens& g, double& a, double& b) {
  const double t = g.c * a + g.s * b;
  b = -g.s * a + g.c * b;
  a = t;
}

Givens make_givens(double a, double b) {
  if (b == 0.0) return {1.0, 0.0};
  const double r = std::hypot(a, b);
  return {a / r, b / r};
}

// Arnoldi process with Givens-rotated least squares. When `precondition` is set,
// the search directions Z are stored (flexible variant); otherwise Z = V.
struct ArnoldiCycle {
  int steps = 0;
  double residual_estimate = 0.0;
};

ArnoldiCycle arnoldi_cycle(const LinearOperator& op, std::span<const double> r0, double beta, int m,
                           double abs_tol, int max_steps, const std::function<void(std::span<const double>, std::span<double>)>* precondition,
                           std::span<double> update) {
  const std::size_t n = r0.size();
  std::vector<std::vector<double>> V(m + 1, std::vector<double>(n));
  std::vector<std::vector<double>> Z;
  if (precondition) Z.assign(m, std::vector<double>(n));
  std::vector<std::vector<double>> H(m + 1, std::vector<double>(m, 0.0));
  std::vector<Givens> rot(m);
  std::vector<double> g(m + 1, 0.0);
  std::vector<double> w(n);

  for (std::size_t i = 0; i < n; ++i) V[0][i] = r0[i] / beta;
  g[0] = beta;
  int steps = 0;
  for (int j = 0; j < m && j < max_steps; ++j) {
    std::span<const double> dir = V[j];
    if (precondition) {
      (*precondition)(V[j], Z[j]);
      dir = Z[j];
    }
    op(dir, w);
    for (int i = 0; i <= j; ++i) {
      H[i][j] = dot(w, V[i]);
      for (std::size_t t = 0; t < n; ++t) w[t] -= H[i][j] * V[i][t];
    }
    H[j + 1][j] = norm2(w);
    for (int i = 0; i < j; ++i) apply_givens(rot[i], H[i][j], H[i + 1][j]);
    rot[j] = make_givens(H[j][j], H[j + 1][j]);
    const double sub = H[j + 1][j];
    apply_givens(rot[j], H[j][j], H[j + 1][j]);
    apply_givens(rot[j], g[j], g[j + 1]);
    steps = j + 1;
    if (std::abs(g[j + 1]) <= abs_tol || sub <= 1e-300) break;
    for (std::size_t t = 0; t < n; ++t) V[j + 1][t] = w[t] / sub;
  }

  // Back substitution for the rotated upper-triangular system.
  std::vector<double> y(steps, 0.0);
  for (int i = steps - 1; i >= 0; --i) {
    double acc = g[i];
    for (int k = i + 1; k < steps; ++k) acc -= H[i][k] * y[k];
    y[i] = H[i][i] != 0.0 ? acc / H[i][i] : 0.0;
  }
  for (int i = 0; i < steps; ++i) {
    const auto& dir = precondition ? Z[i] : V[i];
    for (std::size_t t = 0; t < n; ++t) update[t] += y[i] * dir[t];
  }
  return {steps, std::abs(g[steps])};
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void inner_gmres(const LinearOperator& op, std::span<const double> v, std::span<double> z, int k) {
  std::fill(z.begin(), z.end(), 0.0);
  const double beta = norm2(v);
  if (beta == 0.0) return;
  if (k <= 0) {
    std::copy(v.begin(), v.end(), z.begin());
    return;
  }
  arnoldi_cycle(op, v, beta, k, 0.0, k, nullptr, z);
}

KrylovReport fgmres(const LinearOperator& op, std::span<const double> b, std::span<double> x,
                    const KrylovParams& params) {
  KrylovReport report;
  const std::size_t n = b.size();
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    report.converged = true;
    return report;
  }

  std::vector<double> r(n), ax(n);
  auto true_residual = [&] {
    op(std::span<const double>(x.data(), n), ax);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ax[i];
    return norm2(r);
  };

  std::function<void(std::span<const double>, std::span<double>)> precondition =
      [&](std::span<const double> v, std::span<double> z) { inner_gmres(op, v, z, params.inner_iterations); };

  double beta = true_residual();
  report.residual = beta / bnorm;
  while (report.residual > params.tolerance && report.iterations < params.max_iterations) {
    const int budget = params.max_iterations - report.iterations;
    const auto cycle = arnoldi_cycle(op, r, beta, params.restart, params.tolerance * bnorm, budget,
                                     params.inner_iterations > 0 ? &precondition : nullptr, x);
    report.iterations += cycle.steps;
    beta = true_residual();
    report.residual = beta / bnorm;
    if (report.residual > params.tolerance && report.iterations < params.max_iterations) ++report.restarts;
    if (cycle.steps == 0) break;
  }
  report.converged = report.residual <= params.tolerance;
  return report;
}

}  // namespace ipic
