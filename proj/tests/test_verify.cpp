#include "oracles.hpp"
#include "ren/errors.hpp"
#include "ren/lmi.hpp"
#include "ren/param.hpp"
#include "ren/verify.hpp"

#include <doctest.h>

using namespace ren;

namespace {

ExplicitModel lti(const Matrix& A, const Matrix& B, const Matrix& C, const Matrix& D) {
  ExplicitModel m = ExplicitModel::zeros(ModelKind::kCRen,
                                         {int(A.rows()), int(B.cols()), int(C.rows()), 0});
  m.A = A;
  m.B2 = B;
  m.C2 = C;
  m.D22 = D;
  return m;
}

bool passes_lipschitz(const ExplicitModel& m, double gamma) {
  const auto cert = verify::lti_lipschitz_certificate(m, gamma);
  return cert && verify::all_pass(verify::check_iqc_lmi(m, IqcSpec::lipschitz(gamma, m.dims.p, m.dims.m), cert));
}

}  // namespace

TEST_CASE("verify: constructed models pass, a scaled A fails") {
  std::mt19937_64 rng(0);
  for (ModelKind kind : {ModelKind::kCAren, ModelKind::kCRen}) {
    ExplicitModel m = param::construct(param::sample_params(kind, {3, 1, 1, 5}, rng));
    const auto ok = verify::check_contraction_lmi(m);
    CHECK(verify::all_pass(ok));
    for (const auto& c : ok) CHECK(c.margin > verify::kLmiTolerance);
    m.A *= 10.0;
    const auto bad = verify::check_contraction_lmi(m);
    CHECK_FALSE(verify::all_pass(bad));
    const auto& c = *m.certificate;
    CHECK(oracle::sym_min_eig(contraction_lmi_matrix(m, c.P, c.Lambda, c.alpha)) < 0.0);
    for (const auto& r : bad)
      if (r.name == "contraction_lmi") CHECK(r.margin < 0.0);
  }
}

TEST_CASE("verify: zero model margin") {
  ExplicitModel m = ExplicitModel::zeros(ModelKind::kCRen, {2, 1, 1, 3});
  Certificate c;
  c.P = (Matrix(2, 2) << 2.0, 0.5, 0.5, 1.0).finished();
  c.Lambda = (Vector(3) << 0.3, 1.0, 2.0).finished();
  const auto r = verify::check_contraction_lmi(m, c);
  CHECK(verify::all_pass(r));
  Eigen::SelfAdjointEigenSolver<Matrix> es(c.P);
  const double expected = std::min(es.eigenvalues().minCoeff(), 2 * c.Lambda.minCoeff());
  for (const auto& x : r)
    if (x.name == "contraction_lmi") CHECK(x.margin == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("verify: missing certificate is an error") {
  const ExplicitModel m = ExplicitModel::zeros(ModelKind::kCRen, {2, 1, 1, 3});
  CHECK_THROWS_AS(verify::check_contraction_lmi(m), Error);
}

TEST_CASE("verify: robust model passes its own IQC and fails a hundredfold tighter bound") {
  std::mt19937_64 rng(4);
  for (double gamma : {1.0, 10.0}) {
    const ExplicitModel m =
        param::construct(param::sample_params(ModelKind::kRAren, {3, 2, 2, 5}, rng, {2.0}),
                         IqcSpec::lipschitz(gamma, 2, 2));
    CHECK(verify::all_pass(verify::check_contraction_lmi(m)));
    CHECK(verify::all_pass(verify::check_iqc_lmi(m, *m.iqc)));
    CHECK_FALSE(verify::all_pass(verify::check_iqc_lmi(m, IqcSpec::lipschitz(gamma / 100, 2, 2))));
  }
}

TEST_CASE("verify: robust models are also contracting") {
  std::mt19937_64 rng(5);
  for (const IqcSpec& iqc : {IqcSpec::input_passive(0.1, 2), IqcSpec::output_passive(0.5, 2)}) {
    const ExplicitModel m = param::construct(param::sample_params(ModelKind::kRRen, {2, 2, 2, 4}, rng), iqc);
    CHECK(verify::all_pass(verify::check_contraction_lmi(m)));
  }
}

TEST_CASE("verify: LTI Lipschitz certificate exists iff gamma exceeds the H-infinity norm") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix A = oracle::randn(2, 2, rng);
    A *= 0.8 / spectral_radius(A);
    const ExplicitModel m = lti(A, oracle::randn(2, 1, rng), oracle::randn(1, 2, rng), oracle::randn(1, 1, rng));
    const double g = oracle::hinf_grid(m.A, m.B2, m.C2, m.D22);
    CHECK(verify::lti_hinf_norm(m) == doctest::Approx(g).epsilon(1e-6));
    CHECK(passes_lipschitz(m, 1.01 * g));
    CHECK_FALSE(passes_lipschitz(m, 0.99 * g));
    CHECK(verify::lipschitz_upper_bound(m) == doctest::Approx(g).epsilon(1e-3));
  }
  // Unstable A has no certificate at any gamma.
  const ExplicitModel unstable = lti(2.0 * Matrix::Identity(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1));
  CHECK_FALSE(verify::lti_lipschitz_certificate(unstable, 1e6));
}

TEST_CASE("verify: static gain model has Lipschitz constant equal to the gain") {
  ExplicitModel m = ExplicitModel::zeros(ModelKind::kCRen, {0, 1, 1, 0});
  m.D22(0, 0) = 2.0;
  verify::LipschitzOptions lo;
  lo.restarts = 2;
  lo.steps = 5;
  CHECK(verify::estimate_lipschitz_lower(m, lo) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("verify: Lipschitz lower estimate stays below the certified bound") {
  std::mt19937_64 rng(7);
  verify::LipschitzOptions lo;
  lo.horizon = 30;
  lo.restarts = 3;
  lo.steps = 50;
  const ExplicitModel r = param::construct(param::sample_params(ModelKind::kRAren, {3, 1, 1, 6}, rng, {3.0}),
                                           IqcSpec::lipschitz(10.0, 1, 1));
  CHECK(verify::estimate_lipschitz_lower(r, lo) <= 10.0);
  const ExplicitModel c = param::construct(param::sample_params(ModelKind::kCAren, {3, 1, 1, 6}, rng, {2.0}));
  const double upper = verify::lipschitz_upper_bound(c);
  REQUIRE(std::isfinite(upper));
  CHECK(verify::estimate_lipschitz_lower(c, lo) <= upper);
}

TEST_CASE("verify: empirical contraction rate") {
  ExplicitModel forget = ExplicitModel::zeros(ModelKind::kCRen, {3, 1, 1, 2});
  CHECK(verify::empirical_contraction_rate(forget, 5, 20) < 1e-6);

  std::mt19937_64 rng(8);
  param::InitOptions io;
  io.alpha_bar = 0.9;
  for (int k = 0; k < 5; ++k) {
    const ExplicitModel m = param::construct(param::sample_params(ModelKind::kCAren, {4, 1, 1, 8}, rng, io));
    CHECK(verify::empirical_contraction_rate(m, 10, 100, k) <= 0.92);
  }

  ExplicitModel expand = ExplicitModel::zeros(ModelKind::kCRen, {2, 1, 1, 0});
  expand.A = 2.0 * Matrix::Identity(2, 2);
  CHECK(verify::empirical_contraction_rate(expand, 5, 20) > 1.0);
  Certificate c;
  c.P = Matrix::Identity(2, 2);
  c.Lambda = Vector::Zero(0);
  CHECK_FALSE(verify::all_pass(verify::check_contraction_lmi(expand, c)));
}

TEST_CASE("verify: report JSON") {
  verify::Report r;
  r.checks = {{"a", true, 0.5}, {"b", false, -1.0}};
  r.gamma_lower = 3.0;
  const auto j = verify::report_to_json(r);
  CHECK(j["checks"].size() == 2);
  CHECK(j["checks"][1]["pass"] == false);
  CHECK(j["gamma_lower"] == 3.0);
  CHECK(j["alpha_hat"].is_null());
  CHECK(j["pass"] == false);
}
