#include "oracles.hpp"
#include "ren/errors.hpp"
#include "ren/observer.hpp"
#include "ren/verify.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace ren;

TEST_CASE("observer: PDE equilibria are preserved") {
  observer::PdeConfig cfg;
  for (double c : {1.0, 0.0, 0.5}) {
    const Vector xi = Vector::Constant(cfg.N, c);
    CHECK((observer::pde_step(xi, c, cfg) - xi).norm() == 0.0);
  }
  CHECK(observer::reaction(1.0) == 0.0);
  CHECK(observer::reaction(0.5) == 0.0);
}

TEST_CASE("observer: one explicit step against a direct stencil") {
  observer::PdeConfig cfg;
  cfg.N = 7;
  std::mt19937_64 rng(1);
  const Vector xi = oracle::randn(7, 1, rng);
  const double b = 0.3, dz = 1.0 / 6.0, dt = dz * dz / 4.0;
  const Vector next = observer::pde_step(xi, b, cfg);
  CHECK(next(0) == b);
  CHECK(next(6) == b);
  for (int i = 1; i < 6; ++i) {
    const double lap = (xi(i - 1) - 2 * xi(i) + xi(i + 1)) / (dz * dz);
    const double r = 0.5 * xi(i) * (1 - xi(i)) * (xi(i) - 0.5);
    CHECK(next(i) == doctest::Approx(xi(i) + dt * (lap + r)).epsilon(1e-13));
  }
  cfg.dt = dz * dz;  // beyond dz^2 / 2
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.dt = 0.0;
  cfg.N = 2;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("observer: snapshots") {
  observer::PdeConfig cfg;
  cfg.steps = 200;
  cfg.boundary_noise_std = 0.0;
  const observer::Snapshots still = observer::generate_snapshots(cfg);
  CHECK((still.xi.array() - 1.0).abs().maxCoeff() == 0.0);
  CHECK((still.b.array() - 1.0).abs().maxCoeff() == 0.0);

  cfg.boundary_noise_std = 0.05;
  cfg.seed = 3;
  const observer::Snapshots a = observer::generate_snapshots(cfg);
  const observer::Snapshots b = observer::generate_snapshots(cfg);
  CHECK(bit_equal(a.xi, b.xi));
  CHECK(bit_equal(Matrix(a.b), Matrix(b.b)));
  for (Eigen::Index t = 0; t < a.size(); ++t) {
    CHECK(bit_equal(Matrix(a.xi_next.col(t)), Matrix(observer::pde_step(a.xi.col(t), a.b(t), cfg))));
    CHECK(a.y(t) == a.xi(cfg.centre(), t));
    if (t + 1 < a.size()) CHECK(bit_equal(Matrix(a.xi.col(t + 1)), Matrix(a.xi_next.col(t))));
  }
}

TEST_CASE("observer: zero-epoch training keeps the initial observer") {
  observer::PdeConfig cfg;
  cfg.steps = 400;
  const observer::Snapshots data = observer::generate_snapshots(cfg);
  observer::ObserverConfig oc;
  oc.q = 6;
  oc.train.epochs = 0;
  const observer::TrainedObserver tr = observer::train_observer(data, oc);
  CHECK(bit_equal(tr.state.theta, observer::initial_observer(cfg.N, oc)));
  CHECK(tr.state.log.empty());
  CHECK(std::isfinite(tr.rho_hat));
  CHECK(tr.rho_hat == observer::correctness_residual(tr.model, data, oc.holdout_fraction));
  CHECK(verify::all_pass(verify::check_contraction_lmi(tr.model)));
}

TEST_CASE("observer: a linear heat equation is learned to a small one-step error") {
  // Heat equation without reaction, simulated here.
  const int N = 5;
  const double dz = 0.25, dt = dz * dz / 4.0;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd(0.0, 0.1);
  const int T = 3000;
  observer::Snapshots s;
  s.xi.resize(N, T);
  s.xi_next.resize(N, T);
  s.b.resize(T);
  s.y.resize(T);
  Vector xi = Vector::Constant(N, 0.5);
  double b = 0.5;
  for (int t = 0; t < T; ++t) {
    s.xi.col(t) = xi;
    s.b(t) = b;
    s.y(t) = xi(2);
    Vector next = xi;
    for (int i = 1; i < N - 1; ++i) next(i) = xi(i) + dt * (xi(i - 1) - 2 * xi(i) + xi(i + 1)) / (dz * dz);
    next(0) = next(N - 1) = b;
    s.xi_next.col(t) = next;
    xi = next;
    b += nd(rng);
  }
  observer::ObserverConfig oc;
  oc.q = 10;
  oc.train.epochs = 40;
  oc.train.learning_rate = 1e-2;
  oc.train.batch_size = 50;
  const observer::TrainedObserver tr = observer::train_observer(s, oc);
  const double variance = (s.xi_next.colwise() - s.xi_next.rowwise().mean()).squaredNorm() / T;
  const double mse = tr.state.epoch_loss.back() / (T * (1.0 - oc.holdout_fraction));
  CHECK(mse < 1e-2 * variance);
}

TEST_CASE("observer: an exact observer started at the truth has zero error") {
  // xhat+ = b 1 reproduces the constant solution xi = b = 1.
  observer::PdeConfig cfg;
  cfg.boundary_noise_std = 0.0;
  ExplicitModel f = ExplicitModel::zeros(ModelKind::kCAren, {cfg.N, 2, cfg.N, 0});
  f.B2.col(0).setOnes();
  f.C2.setIdentity();
  Certificate c;
  c.P = Matrix::Identity(cfg.N, cfg.N);
  c.Lambda = Vector(0);
  f.certificate = c;
  const Vector one = Vector::Ones(cfg.N);
  const observer::Evaluation ev = observer::evaluate_observer(f, cfg, one, one, 100, 0.0);
  CHECK(ev.error.norm() == 0.0);
  CHECK(ev.bound == 0.0);
  CHECK(ev.tail_max_error <= ev.bound);
}

TEST_CASE("observer: heatmap has one row per time step and node") {
  observer::PdeConfig cfg;
  cfg.steps = 300;
  const observer::Snapshots data = observer::generate_snapshots(cfg);
  observer::ObserverConfig oc;
  oc.q = 4;
  oc.train.epochs = 1;
  const observer::TrainedObserver tr = observer::train_observer(data, oc);
  const observer::Evaluation ev = observer::evaluate_observer(
      tr.model, cfg, Vector::Ones(cfg.N), Vector::Zero(cfg.N), 50, tr.rho_hat);
  const std::string path = (std::filesystem::temp_directory_path() / "ren_test_heatmap.csv").string();
  observer::write_heatmap_csv(path, ev);
  std::ifstream in(path);
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 1 + 50 * cfg.N);
  std::filesystem::remove(path);
}
