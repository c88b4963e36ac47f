#include "oracles.hpp"
#include "ren/errors.hpp"
#include "ren/model.hpp"
#include "ren/param.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace ren;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("ren_test_" + name)).string();
}

ExplicitModel random_model(ModelKind kind, Dims d, std::uint64_t seed,
                           Activation a = Activation::kRelu) {
  std::mt19937_64 rng(seed);
  param::InitOptions io;
  io.activation = a;
  io.scale = 2.0;
  return param::construct(param::sample_params(kind, d, rng, io));
}

}  // namespace

TEST_CASE("simulate: zero model gives zero outputs and states") {
  const ExplicitModel m = ExplicitModel::zeros(ModelKind::kCRen, {3, 2, 2, 4});
  std::mt19937_64 rng(0);
  const Trajectory tr = simulate(m, oracle::randn(10, 2, rng));
  CHECK(tr.y.norm() == 0.0);
  CHECK(tr.x.norm() == 0.0);
  CHECK(tr.x.rows() == 11);
}

TEST_CASE("simulate: without neurons the model is a linear recursion") {
  std::mt19937_64 rng(1);
  ExplicitModel m = ExplicitModel::zeros(ModelKind::kCRen, {3, 2, 1, 0});
  m.A = 0.5 * oracle::randn(3, 3, rng);
  m.B2 = oracle::randn(3, 2, rng);
  m.C2 = oracle::randn(1, 3, rng);
  m.D22 = oracle::randn(1, 2, rng);
  const Matrix u = oracle::randn(40, 2, rng);
  const Vector x0 = oracle::randn(3, 1, rng);
  const Matrix y = simulate(m, u, x0).y;
  const Matrix ref = oracle::lti_outputs(m.A, m.B2, m.C2, m.D22, u, x0);
  CHECK((y - ref).norm() <= 1e-12 * (1.0 + ref.norm()));
}

TEST_CASE("simulate: acyclic steps agree with a direct evaluation of the equations") {
  for (Activation a : {Activation::kRelu, Activation::kTanh, Activation::kSigmoid}) {
    ExplicitModel m = random_model(ModelKind::kCAren, {3, 2, 2, 6}, 4, a);
    std::mt19937_64 rng(5);
    m.bx = oracle::randn(3, 1, rng);
    m.bv = oracle::randn(6, 1, rng);
    m.by = oracle::randn(2, 1, rng);
    const Matrix u = oracle::randn(15, 2, rng);
    Vector x = oracle::randn(3, 1, rng);
    const Trajectory tr = simulate(m, u, x);
    for (int t = 0; t < 15; ++t) {
      const auto s = oracle::acyclic_step(m, x, u.row(t).transpose());
      CHECK((tr.y.row(t).transpose() - s.y).norm() < 1e-12);
      CHECK((tr.w.row(t).transpose() - s.w).norm() < 1e-12);
      x = s.x_next;
      CHECK((tr.x.row(t + 1).transpose() - x).norm() < 1e-12);
    }
  }
}

TEST_CASE("simulate: full D11 model satisfies the equilibrium at every step") {
  const ExplicitModel m = random_model(ModelKind::kCRen, {3, 1, 1, 6}, 7, Activation::kTanh);
  std::mt19937_64 rng(8);
  const Matrix u = oracle::randn(20, 1, rng);
  const Trajectory tr = simulate(m, u, Vector::Zero(3));
  for (int t = 0; t < 20; ++t) {
    const Vector x = tr.x.row(t).transpose();
    const Vector w = tr.w.row(t).transpose();
    const Vector v = m.C1 * x + m.D11 * w + m.D12 * u.row(t).transpose() + m.bv;
    CHECK((w - oracle::act(m.activation, v)).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("simulate: deterministic and batch rollout matches single rollouts") {
  const ExplicitModel m = random_model(ModelKind::kCRen, {2, 2, 1, 5}, 3);
  std::mt19937_64 rng(2);
  const int T = 12, B = 3;
  std::vector<Matrix> u(T, Matrix::Zero(2, B));
  for (auto& ut : u) ut = oracle::randn(2, B, rng);
  const Matrix x0 = oracle::randn(2, B, rng);
  const BatchRollout roll = simulate_batch(m, u, x0);
  for (int b = 0; b < B; ++b) {
    Matrix ub(T, 2);
    for (int t = 0; t < T; ++t) ub.row(t) = u[t].col(b).transpose();
    const Trajectory t1 = simulate(m, ub, x0.col(b));
    const Trajectory t2 = simulate(m, ub, x0.col(b));
    CHECK(bit_equal(t1.y, t2.y));
    for (int t = 0; t < T; ++t) CHECK((roll.y[t].col(b) - t1.y.row(t).transpose()).norm() < 1e-9);
  }
}

TEST_CASE("trajectory pair gap") {
  const ExplicitModel m = random_model(ModelKind::kCAren, {4, 1, 1, 8}, 1);
  std::mt19937_64 rng(3);
  const Matrix u = oracle::randn(60, 1, rng);
  const Vector a = oracle::randn(4, 1, rng);
  CHECK(trajectory_pair_gap(m, u, a, a).norm() == 0.0);

  ExplicitModel forget = m;
  forget.A.setZero();
  forget.B1.setZero();
  const Vector g = trajectory_pair_gap(forget, u, a, oracle::randn(4, 1, rng));
  CHECK(g(0) > 0.0);
  CHECK(g.tail(60).norm() == 0.0);

  // gap_t <= K alpha^t with K the condition-number factor of the certificate.
  const Matrix& P = m.certificate->P;
  Eigen::SelfAdjointEigenSolver<Matrix> es(P);
  const double K = std::sqrt(es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff());
  const Vector gap = trajectory_pair_gap(m, u, a, oracle::randn(4, 1, rng));
  for (int t = 0; t <= 60; ++t) CHECK(gap(t) <= K * gap(0) * std::pow(std::sqrt(m.alpha_bar), t) * (1 + 1e-9));
}

TEST_CASE("simulate rejects mismatched shapes") {
  const ExplicitModel m = random_model(ModelKind::kCAren, {2, 2, 1, 3}, 0);
  CHECK_THROWS_AS(simulate(m, Matrix::Zero(5, 3)), DimensionError);
  CHECK_THROWS_AS(simulate(m, Matrix::Zero(5, 2), Vector::Zero(3)), DimensionError);
}

TEST_CASE("sequence CSV round trip and diagnostics") {
  std::mt19937_64 rng(1);
  SequenceBatch b;
  b.inputs = {oracle::randn(5, 2, rng), oracle::randn(3, 2, rng)};
  b.outputs = {oracle::randn(5, 1, rng), oracle::randn(3, 1, rng)};
  const std::string path = temp_path("seq.csv");
  write_sequences_csv(path, b);
  const SequenceBatch r = read_sequences_csv(path);
  REQUIRE(r.size() == 2);
  CHECK(r.input_dim() == 2);
  CHECK(r.output_dim() == 1);
  CHECK(r.min_length() == 3);
  CHECK(r.total_length() == 8);
  for (int i = 0; i < 2; ++i) {
    CHECK(bit_equal(r.inputs[i], b.inputs[i]));
    CHECK(bit_equal(r.outputs[i], b.outputs[i]));
  }

  {
    std::ofstream f(path);
    f << "t,u1,y1\n0,1.0,2.0\n1,oops,3.0\n";
  }
  try {
    read_sequences_csv(path);
    FAIL("expected an IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_sequences_csv(path), IoError);
}
