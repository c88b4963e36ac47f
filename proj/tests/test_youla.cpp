#include "oracles.hpp"
#include "ren/errors.hpp"
#include "ren/youla.hpp"

#include <doctest.h>

#include <complex>

using namespace ren;

namespace {

const double kPi = 3.14159265358979323846;

Matrix impulse(int T) {
  Matrix w = Matrix::Zero(T, 1);
  w(0, 0) = 1.0;
  return w;
}

}  // namespace

TEST_CASE("youla: plant poles") {
  const double rho = 0.8, phi = 0.2 * kPi;
  const auto p = youla::plant_from_tf(rho, phi);
  const double a1 = 2 * rho * std::cos(phi), a0 = phi * phi;
  const std::complex<double> disc = std::sqrt(std::complex<double>(a1 * a1 - 4 * a0));
  const double r = std::max(std::abs((-a1 + disc) / 2.0), std::abs((-a1 - disc) / 2.0));
  CHECK(r < 1.0);
  CHECK(spectral_radius(p.A) == doctest::Approx(r).epsilon(1e-12));
  CHECK_NOTHROW(p.validate());
  // (z - 1)^2: a double pole on the unit circle.
  CHECK_THROWS_AS(youla::plant_from_tf(-1.0 / std::cos(1.0), 1.0), Error);
  CHECK_THROWS_AS(youla::plant_from_tf(0.0, 0.0, 1.5), Error);
}

TEST_CASE("youla: impulse response matches long division") {
  const double rho = 0.8, phi = 0.2 * kPi;
  const double a1 = 2 * rho * std::cos(phi), a0 = phi * phi;
  const auto p = youla::plant_from_tf(rho, phi);
  const int T = 40;
  const youla::ClosedLoop cl = youla::linear_response(p, impulse(T), Matrix::Zero(T, 1));
  std::vector<double> h(T, 0.0);
  h[2] = 1.0;
  for (int t = 3; t < T; ++t) h[t] = -a1 * h[t - 1] - a0 * h[t - 2];
  for (int t = 0; t < T; ++t) CHECK(cl.zeta(t, 0) == doctest::Approx(h[t]).epsilon(1e-12).scale(1.0));
  // The controller channel has the same transfer function.
  const youla::ClosedLoop cv = youla::linear_response(p, Matrix::Zero(T, 1), impulse(T));
  CHECK((cv.zeta - cl.zeta).norm() == 0.0);
  CHECK((cv.u - impulse(T)).norm() == 0.0);
}

TEST_CASE("youla: zero Q leaves the open loop") {
  const auto p = youla::plant_from_tf(0.8, 0.2 * kPi);
  std::mt19937_64 rng(1);
  const Matrix w = youla::piecewise_constant(200, 50, 10.0, rng);
  const ExplicitModel Q = ExplicitModel::zeros(ModelKind::kCAren, {4, 1, 1, 6});
  const youla::ClosedLoop a = youla::closed_loop_rollout(p, Q, w);
  const youla::ClosedLoop b = youla::linear_response(p, w, Matrix::Zero(200, 1));
  CHECK((a.zeta - b.zeta).norm() == 0.0);
  CHECK(a.u.norm() == 0.0);
  // With L = 0 the innovation is minus the open-loop output.
  CHECK((a.ytilde + b.zeta).norm() == 0.0);
}

TEST_CASE("youla: disturbance generator") {
  std::mt19937_64 rng(2);
  const Matrix w = youla::piecewise_constant(230, 50, 10.0, rng);
  CHECK(w.rows() == 230);
  CHECK(w.cwiseAbs().maxCoeff() <= 10.0);
  for (int t = 0; t < 230; ++t)
    if (t % 50 != 0) CHECK(w(t, 0) == w(t - 1, 0));
}

TEST_CASE("youla: sampled bases are reproducible and contracting") {
  const auto a = youla::sample_q_echo(6, 12, 3);
  const auto b = youla::sample_q_echo(6, 12, 3);
  CHECK(bit_equal(a.dynamics, b.dynamics));
  CHECK(a.size() == 6 + 12 + 1 + 1);
  const auto l = youla::sample_q_linear(6, 0.05, 4);
  CHECK(spectral_radius(l.dynamics.A) == doctest::Approx(0.95).epsilon(1e-9));
  CHECK(l.size() == 6 + 1);
  CHECK(bit_equal(l.dynamics, youla::sample_q_linear(6, 0.05, 4).dynamics));
}

TEST_CASE("youla: closed-loop responses are affine in the readout") {
  const auto p = youla::plant_from_tf(0.8, 0.2 * kPi);
  std::mt19937_64 rng(5);
  std::vector<Matrix> ws{youla::piecewise_constant(120, 30, 10.0, rng),
                         youla::piecewise_constant(120, 30, 10.0, rng)};
  for (const auto& basis : {youla::sample_q_echo(5, 10, 6), youla::sample_q_linear(5, 0.05, 7)}) {
    const youla::AffineResponse aff = youla::build_affine(p, basis, ws);
    for (int k = 0; k < 3; ++k) {
      const Matrix theta = 0.05 * oracle::randn(basis.size(), 1, rng);
      const ExplicitModel Q = basis.with_readout(theta);
      Vector z(240), u(240);
      for (int j = 0; j < 2; ++j) {
        const auto cl = youla::closed_loop_rollout(p, Q, ws[j]);
        z.segment(120 * j, 120) = cl.zeta.col(0);
        u.segment(120 * j, 120) = cl.u.col(0);
      }
      CHECK((aff.Z0 + aff.GZ * theta - z).norm() <= 1e-9 * (1.0 + z.norm()));
      CHECK((aff.U0 + aff.GU * theta - u).norm() <= 1e-9 * (1.0 + u.norm()));
    }
  }
}

TEST_CASE("youla: policy optimization edge cases") {
  youla::AffineResponse aff;
  aff.Z0 = (Vector(4) << 1.0, -2.0, 0.5, 3.0).finished();
  aff.GZ = -aff.Z0;
  aff.U0 = Vector::Zero(4);
  aff.GU = Matrix::Ones(4, 1);
  youla::PolicyOptions po;
  po.umax = std::numeric_limits<double>::infinity();
  po.reg = 0.0;
  const youla::PolicyResult exact = youla::optimize_policy(aff, po);
  CHECK(exact.objective < 1e-7);
  CHECK(exact.theta(0) == doctest::Approx(1.0).epsilon(1e-6));

  // The bound |u| <= 0.5 forces theta <= 0.5.
  po.umax = 0.5;
  po.reg = 1e-6;
  const youla::PolicyResult bounded = youla::optimize_policy(aff, po);
  CHECK(bounded.max_abs_u <= 0.5);
  CHECK(bounded.objective <= aff.Z0.lpNorm<1>());
  CHECK(bounded.l1_cost == doctest::Approx(0.5 * aff.Z0.lpNorm<1>()).epsilon(1e-6));

  aff.U0 = Vector::Constant(4, 1.0);
  CHECK_THROWS_AS(youla::optimize_policy(aff, po), InfeasibleError);
}

TEST_CASE("youla: optimized policies respect the bound and beat the open loop") {
  youla::YoulaConfig cfg;
  cfg.n = 6;
  cfg.q = 15;
  cfg.sequences = 3;
  cfg.length = 200;
  const youla::YoulaRun run = youla::run_experiment(cfg);
  for (const auto* pol : {&run.nonlinear_policy, &run.linear_policy}) {
    CHECK(pol->max_abs_u <= cfg.policy.umax + 1e-9);
    CHECK(pol->objective <= run.open_loop_cost);
  }
  const ExplicitModel Q = run.nonlinear.with_readout(run.nonlinear_policy.theta);
  double cost = 0.0;
  for (const auto& w : run.disturbances) {
    const auto cl = youla::closed_loop_rollout(run.plant, Q, w);
    cost += cl.zeta.cwiseAbs().sum();
    CHECK(cl.u.cwiseAbs().maxCoeff() <= cfg.policy.umax + 1e-9);
  }
  CHECK(cost == doctest::Approx(run.nonlinear_policy.l1_cost).epsilon(1e-8));
}

TEST_CASE("youla: contracting Q keeps the loop bounded and forgets its initial state") {
  const auto p = youla::plant_from_tf(0.8, 0.2 * kPi);
  std::mt19937_64 rng(9);
  const auto basis = youla::sample_q_echo(8, 16, 10);
  const ExplicitModel Q = basis.with_readout(oracle::randn(basis.size(), 1, rng));
  const Matrix w = youla::piecewise_constant(10000, 50, 10.0, rng);
  const auto cl = youla::closed_loop_rollout(p, Q, w);
  CHECK(cl.zeta.allFinite());
  CHECK(cl.u.allFinite());
  // Bounded and not growing: the second half is no larger than a multiple of the first.
  CHECK(cl.u.bottomRows(5000).cwiseAbs().maxCoeff() <= 10.0 * cl.u.topRows(5000).cwiseAbs().maxCoeff());
  CHECK(youla::pair_convergence_gap(p, Q, w.topRows(500), 1) < 1e-6);
}

TEST_CASE("youla: traces CSV") {
  const auto p = youla::plant_from_tf(0.8, 0.2 * kPi);
  const youla::ClosedLoop cl = youla::linear_response(p, impulse(5), Matrix::Zero(5, 1));
  CHECK_THROWS_AS(youla::write_traces_csv("/nonexistent/dir/t.csv", impulse(5), {{"open", cl}}), IoError);
}
