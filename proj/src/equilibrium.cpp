#include "ren/equilibrium.hpp"

#include "ren/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ren::equilibrium {

namespace {

constexpr double kLinearizationRcond = 1e-12;

Matrix apply_activation(Activation a, const Matrix& v) {
  return v.unaryExpr([a](double x) { return activate(a, x); });
}

Matrix apply_slope(Activation a, const Matrix& v) {
  return v.unaryExpr([a](double x) { return activation_slope(a, x); });
}

Matrix acyclic_sweep(const Matrix& D11, const Matrix& Bw, Activation a) {
  const Eigen::Index q = D11.rows();
  Matrix W(q, Bw.cols());
  for (Eigen::Index i = 0; i < q; ++i) {
    if (i == 0) {
      W.row(0) = Bw.row(0).unaryExpr([a](double x) { return activate(a, x); });
    } else {
      const Eigen::RowVectorXd pre = D11.row(i).head(i) * W.topRows(i) + Bw.row(i);
      W.row(i) = pre.unaryExpr([a](double x) { return activate(a, x); });
    }
  }
  return W;
}

Eigen::RowVectorXd column_residuals(const Matrix& D11, const Matrix& Bw, Activation a,
                                    const Matrix& W) {
  const Matrix r = W - apply_activation(a, D11 * W + Bw);
  return r.cwiseAbs().colwise().maxCoeff();
}

}  // namespace

double residual(const Matrix& D11, const Vector& b_w, Activation a, const Vector& w) {
  if (w.size() == 0) return 0.0;
  return column_residuals(D11, b_w, a, w).maxCoeff();
}

bool is_strictly_lower(const Matrix& D11) {
  for (Eigen::Index i = 0; i < D11.rows(); ++i)
    for (Eigen::Index j = i; j < D11.cols(); ++j)
      if (D11(i, j) != 0.0) return false;
  return true;
}

Vector solve_acyclic(const EquilibriumProblem& prob) {
  if (prob.D11.rows() != prob.D11.cols() || prob.D11.rows() != prob.b_w.size())
    throw DimensionError("equilibrium problem shapes are inconsistent");
  if (!is_strictly_lower(prob.D11))
    throw DimensionError("solve_acyclic requires a strictly lower-triangular D11");
  return acyclic_sweep(prob.D11, prob.b_w, prob.activation);
}

Matrix solve_batch(const Matrix& D11, const Matrix& Bw, Activation a, bool acyclic,
                   double tolerance, int max_iters, const std::optional<Vector>& metric,
                   double step) {
  const Eigen::Index q = D11.rows();
  if (q == 0) return Matrix(0, Bw.cols());
  if (acyclic) return acyclic_sweep(D11, Bw, a);

  // First candidate: one Picard step from zero, exact when D11 = 0.
  Matrix W = apply_activation(a, Bw);
  if (column_residuals(D11, Bw, a, W).maxCoeff() <= tolerance) return W;

  const Vector lam = metric ? *metric : Vector::Ones(q);
  const Matrix ImD = Matrix::Identity(q, q) - D11;
  const Matrix G = Matrix::Identity(q, q) + step * (lam.asDiagonal() * ImD);
  Eigen::PartialPivLU<Matrix> lu(G);
  const Matrix LB = step * (lam.asDiagonal() * Bw);
  Vector scale = step * lam;

  Matrix Z = G * W - LB;
  double res = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    const Matrix Xa = lu.solve(Z + LB);
    const Matrix Y = 2.0 * Xa - Z;
    for (Eigen::Index j = 0; j < Y.cols(); ++j)
      for (Eigen::Index i = 0; i < q; ++i) W(i, j) = scaled_prox(a, Y(i, j), scale(i));
    Z += 2.0 * (W - Xa);
    res = column_residuals(D11, Bw, a, W).maxCoeff();
    if (!std::isfinite(res)) break;
    if (res <= tolerance) return W;
  }
  throw ConvergenceError("equilibrium solver did not converge (residual " +
                             std::to_string(res) + ")",
                         res);
}

Vector solve_pr(const EquilibriumProblem& prob, SolveStats* stats, const Vector* warm_start) {
  const Eigen::Index q = prob.D11.rows();
  if (prob.D11.cols() != q || prob.b_w.size() != q)
    throw DimensionError("equilibrium problem shapes are inconsistent");
  if (q == 0) return Vector(0);
  const Activation a = prob.activation;
  Vector w = warm_start ? *warm_start : Vector(apply_activation(a, prob.b_w));
  double res = residual(prob.D11, prob.b_w, a, w);
  if (res <= prob.tolerance) {
    if (stats) *stats = {1, res};
    return w;
  }
  const Vector lam = prob.metric ? *prob.metric : Vector::Ones(q);
  if (lam.size() != q || !(lam.minCoeff() > 0.0))
    throw DimensionError("equilibrium metric must be a positive q-vector");
  const double alpha = prob.step;
  const Matrix G = Matrix::Identity(q, q) +
                   alpha * (lam.asDiagonal() * (Matrix::Identity(q, q) - prob.D11));
  Eigen::PartialPivLU<Matrix> lu(G);
  const Vector lb = alpha * lam.cwiseProduct(prob.b_w);
  Vector z = G * w - lb;
  for (int it = 1; it <= prob.max_iters; ++it) {
    const Vector x = lu.solve(z + lb);
    const Vector y = 2.0 * x - z;
    for (Eigen::Index i = 0; i < q; ++i) w(i) = scaled_prox(a, y(i), alpha * lam(i));
    z += 2.0 * (w - x);
    res = residual(prob.D11, prob.b_w, a, w);
    if (!std::isfinite(res)) break;
    if (res <= prob.tolerance) {
      if (stats) *stats = {it, res};
      return w;
    }
  }
  if (stats) *stats = {prob.max_iters, res};
  throw ConvergenceError("Peaceman-Rachford exceeded max_iters (residual " +
                             std::to_string(res) + ")",
                         res);
}

Vector solve(const EquilibriumProblem& prob, SolveStats* stats) {
  if (is_strictly_lower(prob.D11)) {
    Vector w = solve_acyclic(prob);
    if (stats) *stats = {1, residual(prob.D11, prob.b_w, prob.activation, w)};
    return w;
  }
  return solve_pr(prob, stats);
}

Vector jacobian_diag(const EquilibriumProblem& prob, const Vector& w_star) {
  return apply_slope(prob.activation, prob.D11 * w_star + prob.b_w);
}

Vector equilibrium_jvp(const EquilibriumProblem& prob, const Vector& w_star,
                       const Vector& rhs_tangent) {
  const Eigen::Index q = prob.D11.rows();
  const Vector J = jacobian_diag(prob, w_star);
  const Matrix M = Matrix::Identity(q, q) - J.asDiagonal() * prob.D11;
  const Vector rhs = J.cwiseProduct(rhs_tangent);
  try {
    return solve_checked(M, rhs, "ill-posed linearization", kLinearizationRcond);
  } catch (const NumericalError&) {
    throw NumericalError("ill-posed linearization: I - J D11 is singular");
  }
}

Vector equilibrium_vjp(const EquilibriumProblem& prob, const Vector& w_star,
                       const Vector& w_cotangent) {
  const Eigen::Index q = prob.D11.rows();
  const Vector J = jacobian_diag(prob, w_star);
  const Matrix M = Matrix::Identity(q, q) - prob.D11.transpose() * J.asDiagonal();
  Vector lam;
  try {
    lam = solve_checked(M, w_cotangent, "ill-posed linearization", kLinearizationRcond);
  } catch (const NumericalError&) {
    throw NumericalError("ill-posed linearization: I - D11^T J is singular");
  }
  return J.cwiseProduct(lam);
}

Matrix vjp_batch(const Matrix& D11, const Matrix& V, const Matrix& Wbar, Activation a,
                 bool acyclic) {
  const Eigen::Index q = D11.rows();
  const Eigen::Index B = V.cols();
  if (q == 0) return Matrix(0, B);
  const Matrix J = apply_slope(a, V);
  Matrix lam(q, B);
  if (acyclic) {
    // lam = wbar + D^T (J .* lam), D^T strictly upper: back substitution.
    for (Eigen::Index i = q - 1; i >= 0; --i) {
      const Eigen::Index rest = q - 1 - i;
      if (rest == 0) {
        lam.row(i) = Wbar.row(i);
      } else {
        const Matrix JL = J.bottomRows(rest).cwiseProduct(lam.bottomRows(rest));
        lam.row(i) = Wbar.row(i) + D11.col(i).tail(rest).transpose() * JL;
      }
    }
  } else {
    const Matrix Dt = D11.transpose();
    for (Eigen::Index b = 0; b < B; ++b) {
      const Matrix M = Matrix::Identity(q, q) - Dt * J.col(b).asDiagonal();
      Eigen::PartialPivLU<Matrix> lu(M);
      if (!(lu.rcond() > kLinearizationRcond))
        throw NumericalError("ill-posed linearization: I - D11^T J is singular");
      lam.col(b) = lu.solve(Wbar.col(b));
    }
  }
  return J.cwiseProduct(lam);
}

}  // namespace ren::equilibrium
