#pragma once

#include <functional>
#include <span>
#include <vector>

namespace ipic {

/// y = A x for a matrix-free operator.
using LinearOperator = std::function<void(std::span<const double> x, std::span<double> y)>;

struct KrylovParams {
  double tolerance = 1e-8;  // on ||b - A x|| / ||b||
  int restart = 20;
  int max_iterations = 200;
  int inner_iterations = 5;  // 0 disables the inner GMRES preconditioner
};

struct KrylovReport {
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  int restarts = 0;
};

/// Restarted flexible GMRES with a variable right preconditioner given by a fixed
/// number of unpreconditioned GMRES iterations on the same operator. x holds the
/// initial guess on entry and the best iterate on exit.
KrylovReport fgmres(const LinearOperator& op, std::span<const double> b, std::span<double> x,
                    const KrylovParams& params);

/// Plain GMRES(k) from a zero initial guess, no restarts: z ~ A^{-1} v.
void inner_gmres(const LinearOperator& op, std::span<const double> v, std::span<double> z, int k);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

}  // namespace ipic
