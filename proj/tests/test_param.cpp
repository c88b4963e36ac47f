#include "oracles.hpp"
#include "ren/errors.hpp"
#include "ren/lmi.hpp"
#include "ren/param.hpp"
#include "ren/verify.hpp"

#include <doctest.h>

using namespace ren;

using oracle::sym_min_eig;

TEST_CASE("contracting construction: assembled LMI is positive definite") {
  std::mt19937_64 rng(0);
  for (ModelKind kind : {ModelKind::kCAren, ModelKind::kCRen}) {
    const DirectParams t = param::sample_params(kind, {2, 1, 1, 4}, rng);
    const ExplicitModel m = param::construct(t);
    REQUIRE(m.certificate);
    const auto& c = *m.certificate;
    CHECK(sym_min_eig(contraction_lmi_matrix(m, c.P, c.Lambda, c.alpha)) > 0.0);
    CHECK(sym_min_eig(wellposedness_matrix(m.D11, c.Lambda)) > 0.0);
  }
}

TEST_CASE("robust construction satisfies the IQC matrix inequality") {
  std::mt19937_64 rng(3);
  const Dims d{3, 2, 2, 5};
  for (const IqcSpec& iqc : {IqcSpec::lipschitz(2.0, 2, 2), IqcSpec::input_passive(0.1, 2),
                             IqcSpec::output_passive(0.5, 2)}) {
    const DirectParams t = param::sample_params(ModelKind::kRAren, d, rng);
    const ExplicitModel m = param::construct(t, iqc);
    const auto& c = *m.certificate;
    CHECK(sym_min_eig(iqc_lmi_matrix(m, iqc, c.P, c.Lambda)) > 0.0);
    CHECK(sym_min_eig(feedthrough_matrix(m.D22, iqc)) > 0.0);
  }
}

TEST_CASE("zero free parameters give a zero model with Lambda = eps / 2") {
  DirectParams t = DirectParams::zeros(ModelKind::kCAren, {1, 1, 1, 1});
  t.epsilon = 1e-3;
  const ExplicitModel m = param::construct(t);
  CHECK(m.A(0, 0) == 0.0);
  CHECK(m.B1(0, 0) == 0.0);
  CHECK(m.C1(0, 0) == 0.0);
  CHECK(m.D11(0, 0) == 0.0);
  CHECK(m.certificate->Lambda(0) == doctest::Approx(0.5e-3).epsilon(1e-12));
}

TEST_CASE("acyclic kinds give a strictly lower D11, full kinds generally do not") {
  std::mt19937_64 rng(9);
  const ExplicitModel a = param::construct(param::sample_params(ModelKind::kCAren, {3, 2, 2, 6}, rng));
  CHECK(Matrix(a.D11.triangularView<Eigen::Upper>()).norm() == 0.0);
  const ExplicitModel f = param::construct(param::sample_params(ModelKind::kCRen, {3, 2, 2, 6}, rng));
  CHECK(Matrix(f.D11.triangularView<Eigen::StrictlyUpper>()).norm() > 0.0);
}

TEST_CASE("contraction at rate alpha_bar: per-step distance ratio in the P metric") {
  std::mt19937_64 rng(0);
  param::InitOptions io;
  io.alpha_bar = 0.5;
  for (ModelKind kind : {ModelKind::kCAren, ModelKind::kCRen}) {
    const DirectParams t = param::sample_params(kind, {2, 1, 1, 4}, rng, io);
    const ExplicitModel m = param::construct(t);
    const Matrix& P = m.certificate->P;
    const Matrix u = oracle::randn(50, 1, rng);
    const auto ta = simulate(m, u, oracle::randn(2, 1, rng));
    const auto tb = simulate(m, u, oracle::randn(2, 1, rng));
    for (int s = 0; s < 50; ++s) {
      const Vector d0 = (ta.x.row(s) - tb.x.row(s)).transpose();
      const Vector d1 = (ta.x.row(s + 1) - tb.x.row(s + 1)).transpose();
      const double r0 = std::sqrt(d0.dot(P * d0));
      if (r0 < 1e-12) break;
      CHECK(std::sqrt(d1.dot(P * d1)) <= std::sqrt(0.5) * r0 * (1 + 1e-9) + 1e-14);
    }
  }
}

TEST_CASE("biases do not enter the weights or the certificate") {
  std::mt19937_64 rng(2);
  DirectParams t = param::sample_params(ModelKind::kCRen, {3, 2, 1, 5}, rng);
  const ExplicitModel a = param::construct(t);
  t.bx.setRandom();
  t.bv.setRandom();
  t.by.setRandom();
  const ExplicitModel b = param::construct(t);
  CHECK(bit_equal(a.A, b.A));
  CHECK(bit_equal(a.B1, b.B1));
  CHECK(bit_equal(a.D11, b.D11));
  CHECK(bit_equal(a.certificate->P, b.certificate->P));
  CHECK(bit_equal(Matrix(a.certificate->Lambda), Matrix(b.certificate->Lambda)));
}

TEST_CASE("feedthrough: Cayley of the identity is zero") {
  DirectParams t = DirectParams::zeros(ModelKind::kRAren, {2, 2, 2, 3});
  t.X3 = std::sqrt(1.0 - t.epsilon) * Matrix::Identity(2, 2);
  CHECK(param::construct_d22(t, IqcSpec::lipschitz(3.0, 2, 2)).norm() < 1e-15);
}

TEST_CASE("feedthrough: input passivity with zero free parameters") {
  DirectParams t = DirectParams::zeros(ModelKind::kRAren, {2, 2, 2, 3});
  const Matrix D22 = param::construct_d22(t, IqcSpec::input_passive(0.1, 2));
  CHECK((D22 - 0.101 * Matrix::Identity(2, 2)).norm() < 1e-15);
  CHECK(((D22 + D22.transpose() - 0.2 * Matrix::Identity(2, 2)) - 2e-3 * Matrix::Identity(2, 2)).norm() < 1e-15);
}

TEST_CASE("feedthrough: Lipschitz bound on the largest singular value") {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 20; ++k) {
    const DirectParams t = param::sample_params(ModelKind::kRAren, {2, 3, 2, 3}, rng, {3.0});
    const Matrix D22 = param::construct_d22(t, IqcSpec::lipschitz(10.0, 2, 3));
    CHECK(Eigen::JacobiSVD<Matrix>(D22).singularValues()(0) < 10.0);
  }
}

TEST_CASE("robust construction reduces to the contracting one without I/O coupling") {
  std::mt19937_64 rng(6);
  DirectParams r = param::sample_params(ModelKind::kRAren, {3, 1, 1, 4}, rng);
  r.B2til.setZero();
  r.D12til.setZero();
  r.C2.setZero();
  r.D21.setZero();
  r.X3 = std::sqrt(1.0 - r.epsilon) * Matrix::Identity(1, 1);
  const ExplicitModel mr = param::construct(r, IqcSpec::lipschitz(2.0, 1, 1));
  DirectParams c = param::sample_params(ModelKind::kCAren, {3, 1, 1, 4}, rng);
  c.X = r.X;
  c.Y1 = r.Y1;
  c.B2til.setZero();
  c.D12til.setZero();
  c.C2.setZero();
  c.D21.setZero();
  const ExplicitModel mc = param::construct(c);
  CHECK((mr.A - mc.A).norm() < 1e-12);
  CHECK((mr.B1 - mc.B1).norm() < 1e-12);
  CHECK((mr.C1 - mc.C1).norm() < 1e-12);
  CHECK((mr.D11 - mc.D11).norm() < 1e-12);
  CHECK(mr.D22.norm() < 1e-15);
}

TEST_CASE("robust models satisfy the incremental dissipation inequality on trajectories") {
  std::mt19937_64 rng(14);
  for (const IqcSpec& iqc : {IqcSpec::output_passive(1.0, 2), IqcSpec::lipschitz(2.0, 2, 2),
                             IqcSpec::input_passive(0.1, 2)}) {
    for (ModelKind kind : {ModelKind::kRAren, ModelKind::kRRen}) {
      const ExplicitModel m = param::construct(param::sample_params(kind, {3, 2, 2, 5}, rng), iqc);
      for (int pair = 0; pair < 5; ++pair) {
        const double ex = oracle::dissipation_excess(
            m, m.certificate->P, iqc.Q, iqc.S, iqc.R, oracle::randn(30, 2, rng),
            oracle::randn(30, 2, rng), oracle::randn(3, 1, rng), oracle::randn(3, 1, rng));
        CHECK(ex <= 1e-8);
      }
    }
  }
}

TEST_CASE("IQC special cases expand to the listed (Q, S, R)") {
  const IqcSpec l = IqcSpec::lipschitz(4.0, 2, 3);
  CHECK((l.Q + 0.25 * Matrix::Identity(2, 2)).norm() == 0.0);
  CHECK(l.S.norm() == 0.0);
  CHECK(l.S.rows() == 3);
  CHECK((l.R - 4.0 * Matrix::Identity(3, 3)).norm() == 0.0);
  const IqcSpec ip = IqcSpec::input_passive(0.1, 2);
  CHECK(ip.Q.norm() == 0.0);
  CHECK((ip.S - Matrix::Identity(2, 2)).norm() == 0.0);
  CHECK((ip.R + 0.2 * Matrix::Identity(2, 2)).norm() == 0.0);
  const IqcSpec op = IqcSpec::output_passive(0.5, 2);
  CHECK((op.Q + Matrix::Identity(2, 2)).norm() == 0.0);
  CHECK((op.S - Matrix::Identity(2, 2)).norm() == 0.0);
  CHECK(op.R.norm() == 0.0);
  CHECK_THROWS(IqcSpec::general(Matrix::Identity(1, 1), Matrix::Zero(1, 1), Matrix::Zero(1, 1)).validate());
}

TEST_CASE("direct parameter validation") {
  std::mt19937_64 rng(1);
  DirectParams t = param::sample_params(ModelKind::kCRen, {2, 1, 1, 3}, rng);
  t.epsilon = 0.0;
  CHECK_THROWS_AS(t.validate(), Error);
  t.epsilon = 1e-3;
  t.alpha_bar = 1.5;
  CHECK_THROWS_AS(t.validate(), Error);
  t.alpha_bar = 1.0;
  t.X(0, 0) = std::nan("");
  CHECK_THROWS_AS(t.validate(), Error);
  t = param::sample_params(ModelKind::kCRen, {2, 1, 1, 3}, rng);
  t.Y1.resize(3, 3);
  CHECK_THROWS_AS(t.validate(), DimensionError);
  DirectParams u = param::sample_params(ModelKind::kCAren, {2, 1, 1, 3}, rng);
  DirectParams v = u.zeros_like();
  v.unflatten(u.flatten());
  CHECK(bit_equal(u, v));
}

TEST_CASE("feedforward embedding evaluates the network") {
  // y = relu(u)
  const std::vector<param::Layer> one{{Matrix::Ones(1, 1), Vector::Zero(1)},
                                      {Matrix::Ones(1, 1), Vector::Zero(1)}};
  const ExplicitModel r = param::embed_feedforward(one);
  const Matrix u = (Matrix(4, 1) << -2.0, -0.5, 0.0, 3.0).finished();
  const Matrix y = simulate(r, u).y;
  for (int t = 0; t < 4; ++t) CHECK(y(t, 0) == std::max(0.0, u(t, 0)));

  // Affine map only.
  const std::vector<param::Layer> affine{{(Matrix(1, 2) << 2.0, -1.0).finished(), Vector::Constant(1, 0.5)}};
  const Matrix ua = (Matrix(2, 2) << 1.0, 1.0, 0.0, 3.0).finished();
  const Matrix ya = simulate(param::embed_feedforward(affine), ua).y;
  CHECK(ya(0, 0) == 1.5);
  CHECK(ya(1, 0) == -2.5);

  // Random two hidden layers against direct evaluation.
  std::mt19937_64 rng(3);
  std::vector<param::Layer> net;
  net.push_back({oracle::randn(5, 3, rng), oracle::randn(5, 1, rng)});
  net.push_back({oracle::randn(4, 5, rng), oracle::randn(4, 1, rng)});
  net.push_back({oracle::randn(2, 4, rng), oracle::randn(2, 1, rng)});
  for (Activation a : {Activation::kRelu, Activation::kTanh}) {
    const ExplicitModel m = param::embed_feedforward(net, a);
    CHECK(m.dims.n == 0);
    const Matrix U = oracle::randn(100, 3, rng);
    const Matrix Y = simulate(m, U).y;
    for (int t = 0; t < 100; ++t) {
      Vector z = U.row(t).transpose();
      z = oracle::act(a, net[0].weight * z + net[0].bias);
      z = oracle::act(a, net[1].weight * z + net[1].bias);
      z = net[2].weight * z + net[2].bias;
      CHECK((Y.row(t).transpose() - z).norm() <= 1e-12 * (1.0 + z.norm()));
    }
  }
}

TEST_CASE("FIR embedding with identity readout is a delay line") {
  const std::vector<param::Layer> id{{Matrix::Identity(2, 2), Vector::Zero(2)}};
  const ExplicitModel m = param::embed_fir(2, 1, id);
  std::mt19937_64 rng(4);
  const Matrix u = oracle::randn(20, 1, rng);
  const Matrix y = simulate(m, u).y;
  CHECK(y(0, 0) == 0.0);
  for (int t = 1; t < 20; ++t) CHECK(y(t, 0) == u(t - 1, 0));
  for (int t = 2; t < 20; ++t) CHECK(y(t, 1) == u(t - 2, 0));
  CHECK_THROWS_AS(param::embed_fir(3, 1, id), DimensionError);
}

TEST_CASE("FIR embedding forgets its initial state after the memory length") {
  std::mt19937_64 rng(5);
  std::vector<param::Layer> net{{oracle::randn(4, 3, rng), oracle::randn(4, 1, rng)},
                                {oracle::randn(1, 4, rng), oracle::randn(1, 1, rng)}};
  const ExplicitModel m = param::embed_fir(3, 1, net);
  const Matrix u = oracle::randn(10, 1, rng);
  const Vector gap = trajectory_pair_gap(m, u, oracle::randn(3, 1, rng), oracle::randn(3, 1, rng));
  CHECK(gap(3) == 0.0);
}
