#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ipic/config.hpp"
#include "ipic/grid.hpp"
#include "ipic/krylov.hpp"
#include "ipic/moments.hpp"

namespace ipic {

/// E triples over the solver nodes, x fastest, component innermost.
using FieldVector = std::vector<double>;

FieldVector pack_field(const VectorField& f);
/// Writes the vector into the solver nodes of f and syncs ghosts (periodic or zero-gradient).
void unpack_field(std::span<const double> v, VectorField& f);

/// Matrix-free implicit field operator
///   (I + chi) E - (c dt)^2 (lap E + grad div (chi E))
/// with the compact Laplacian and wide central differences for grad div.
class MaxwellOperator {
 public:
  MaxwellOperator(const SusceptibilityField& chi, double dt, double c);

  void apply(std::span<const double> x, std::span<double> y) const;
  FieldVector apply(std::span<const double> x) const;
  std::size_t size() const { return 3 * geo_.solver_node_count(); }
  LinearOperator as_linear_operator() const;

 private:
  const SusceptibilityField* chi_;
  GridGeometry geo_;
  double dt_, c_;
  mutable VectorField E_, P_;
  mutable ScalarField div_;
};

FieldVector apply_maxwell_operator(std::span<const double> E_candidate, const SusceptibilityField& chi, double dt,
                                   double c);

/// E^n + c dt curl B^n - 4 pi dt J^ - (c dt)^2 grad(4 pi rho^). Inputs must be ghost-synced.
FieldVector build_rhs(const VectorField& E_n, const VectorField& B_n, const HatMoments& hat, double dt, double c);

/// Flexible GMRES with the inner GMRES preconditioner, warm-started from `initial` if given.
std::pair<FieldVector, KrylovReport> solve_fields(const MaxwellOperator& op, std::span<const double> rhs,
                                                  const SolverParams& params,
                                                  std::span<const double> initial = {});

/// B^{n+1} = B^n - c dt curl E^{n+1}. Ghosts are re-synced periodically, or copied
/// from `external` in open mode (left untouched when external is null).
VectorField advance_B(const VectorField& B_n, const VectorField& E_np1, double dt, double c,
                      const VectorField* external = nullptr);

/// ||div E - 4 pi rho||_2 / max(||4 pi rho||_2, eps) over interior nodes. Uses the
/// ghosts as stored.
double gauss_residual(const VectorField& E, const ScalarField& rho);

}  // namespace ipic
