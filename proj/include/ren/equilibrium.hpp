#pragma once

#include "ren/activation.hpp"
#include "ren/linalg.hpp"

#include <optional>

namespace ren::equilibrium {

// w = sigma(D11 w + b_w).
struct EquilibriumProblem {
  Matrix D11;
  Vector b_w;
  Activation activation = Activation::kRelu;
  double tolerance = 1e-10;
  int max_iters = 500;
  // Peaceman-Rachford step size.
  double step = 1.0;
  // Diagonal metric Lambda with 2 Lambda - Lambda D - D^T Lambda > 0; identity if empty.
  std::optional<Vector> metric;
};

struct SolveStats {
  int iterations = 0;
  double residual = 0.0;
};

// Infinity-norm residual |w - sigma(D w + b)|.
double residual(const Matrix& D11, const Vector& b_w, Activation a, const Vector& w);

bool is_strictly_lower(const Matrix& D11);

// One forward sweep; D11 must be strictly lower triangular.
Vector solve_acyclic(const EquilibriumProblem& prob);

// Peaceman-Rachford splitting on the monotone inclusion
//   0 in Lambda (I - D) w - Lambda b + Lambda df(w),  sigma = prox_f.
// Throws ConvergenceError when max_iters is exceeded.
Vector solve_pr(const EquilibriumProblem& prob, SolveStats* stats = nullptr,
                const Vector* warm_start = nullptr);

// Acyclic sweep when D11 is strictly lower, splitting otherwise.
Vector solve(const EquilibriumProblem& prob, SolveStats* stats = nullptr);

// Slopes J = diag(sigma'(D11 w* + b_w)).
Vector jacobian_diag(const EquilibriumProblem& prob, const Vector& w_star);

// (I - J D11)^{-1} J rhs: tangent of w* for a tangent `rhs` of D11 w + b_w.
Vector equilibrium_jvp(const EquilibriumProblem& prob, const Vector& w_star,
                       const Vector& rhs_tangent);

// Transposed map J (I - D11^T J)^{-1} wbar: cotangent of the pre-activation
// D11 w + b_w given a cotangent of w*.
Vector equilibrium_vjp(const EquilibriumProblem& prob, const Vector& w_star,
                       const Vector& w_cotangent);

// Batched variants over columns of `Bw` (q x B) sharing one D11.
Matrix solve_batch(const Matrix& D11, const Matrix& Bw, Activation a, bool acyclic,
                   double tolerance, int max_iters, const std::optional<Vector>& metric,
                   double step = 1.0);

// Given pre-activations V (q x B) at the solution and cotangents Wbar
// (q x B), returns pre-activation cotangents.
Matrix vjp_batch(const Matrix& D11, const Matrix& V, const Matrix& Wbar, Activation a,
                 bool acyclic);

}  // namespace ren::equilibrium
