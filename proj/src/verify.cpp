#include "ren/verify.hpp"

#include "ren/errors.hpp"
#include "ren/lmi.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <random>

namespace ren::verify {

namespace {

CheckResult pd_check(const std::string& name, const Matrix& M, const LmiOptions& opts) {
  CheckResult r;
  r.name = name;
  if (M.size() == 0) {
    r.pass = true;
    r.margin = std::numeric_limits<double>::infinity();
    return r;
  }
  if (!M.allFinite()) {
    r.pass = false;
    r.margin = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  if (!opts.exact_margin && is_positive_definite(M, opts.tolerance)) {
    r.pass = true;
    r.margin = opts.tolerance;
    return r;
  }
  r.margin = min_eigenvalue(M);
  r.pass = r.margin > opts.tolerance;
  return r;
}

const Certificate& pick_certificate(const ExplicitModel& model,
                                    const std::optional<Certificate>& cert) {
  if (cert) return *cert;
  if (model.certificate) return *model.certificate;
  throw Error("no certificate; run construction or provide (P,Λ)");
}

void check_certificate_shape(const ExplicitModel& model, const Certificate& c) {
  if (c.P.rows() != model.dims.n || c.P.cols() != model.dims.n ||
      c.Lambda.size() != model.dims.q)
    throw DimensionError("certificate dimensions do not match the model");
}

}  // namespace

std::vector<CheckResult> check_contraction_lmi(const ExplicitModel& model,
                                               const std::optional<Certificate>& cert,
                                               const LmiOptions& opts) {
  const Certificate& c = pick_certificate(model, cert);
  check_certificate_shape(model, c);
  std::vector<CheckResult> out;
  CheckResult lam{"lambda_positive", true, std::numeric_limits<double>::infinity()};
  if (c.Lambda.size() > 0) {
    lam.margin = c.Lambda.minCoeff();
    lam.pass = lam.margin > 0.0;
  }
  out.push_back(lam);
  out.push_back(pd_check("certificate_positive", c.P, opts));
  out.push_back(pd_check("wellposedness", wellposedness_matrix(model.D11, c.Lambda), opts));
  out.push_back(pd_check("contraction_lmi", contraction_lmi_matrix(model, c.P, c.Lambda, c.alpha), opts));
  return out;
}

std::vector<CheckResult> check_iqc_lmi(const ExplicitModel& model, const IqcSpec& iqc,
                                       const std::optional<Certificate>& cert,
                                       const LmiOptions& opts) {
  const Certificate& c = pick_certificate(model, cert);
  check_certificate_shape(model, c);
  if (iqc.outputs() != model.dims.p || iqc.inputs() != model.dims.m)
    throw DimensionError("IQC dimensions do not match the model");
  std::vector<CheckResult> out;
  out.push_back(pd_check("feedthrough", feedthrough_matrix(model.D22, iqc), opts));
  out.push_back(pd_check("iqc_lmi", iqc_lmi_matrix(model, iqc, c.P, c.Lambda), opts));
  return out;
}

bool all_pass(const std::vector<CheckResult>& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

std::optional<Certificate> lti_lipschitz_certificate(const ExplicitModel& model, double gamma) {
  if (model.dims.q != 0) throw DimensionError("LTI certificate needs a model without neurons");
  const auto& A = model.A;
  const auto& B = model.B2;
  const auto& C = model.C2;
  const auto& D = model.D22;
  const Eigen::Index n = A.rows(), m = B.cols();
  if (n > 0 && spectral_radius(A) >= 1.0) return std::nullopt;
  // Strictness margin; after the 1/gamma scaling below it is 1e-6 in the LMI.
  const double delta = 1e-6 * gamma;
  const Matrix g2 = gamma * gamma * Matrix::Identity(m, m) - D.transpose() * D;
  Matrix P = Matrix::Zero(n, n);
  bool converged = n == 0;
  for (int it = 0; it < 200000 && !converged; ++it) {
    const Matrix G = g2 - B.transpose() * P * B;
    Eigen::LLT<Matrix> llt(symmetrize(G));
    if (llt.info() != Eigen::Success) return std::nullopt;
    const Matrix K = A.transpose() * P * B + C.transpose() * D;
    Matrix Pn = A.transpose() * P * A + C.transpose() * C + K * llt.solve(K.transpose());
    Pn.diagonal().array() += delta;
    Pn = symmetrize(Pn);
    if (!Pn.allFinite() || Pn.norm() > 1e14) return std::nullopt;
    converged = (Pn - P).norm() <= 1e-13 * (1.0 + Pn.norm());
    P = std::move(Pn);
  }
  if (!converged) return std::nullopt;
  if (n == 0 && !is_positive_definite(g2)) return std::nullopt;
  Certificate c;
  c.P = P / gamma;
  c.Lambda = Vector(0);
  c.alpha = 1.0;
  return c;
}

double lti_hinf_norm(const ExplicitModel& model, int grid) {
  if (model.dims.q != 0) throw DimensionError("H-infinity norm needs a model without neurons");
  const Eigen::Index n = model.A.rows();
  using CMat = Eigen::MatrixXcd;
  const CMat A = model.A.cast<std::complex<double>>();
  const CMat B = model.B2.cast<std::complex<double>>();
  const CMat C = model.C2.cast<std::complex<double>>();
  const CMat D = model.D22.cast<std::complex<double>>();
  auto gain = [&](double w) {
    const std::complex<double> z = std::polar(1.0, w);
    CMat G = D;
    if (n > 0) {
      const CMat zI = z * CMat::Identity(n, n) - A;
      G += C * zI.partialPivLu().solve(B);
    }
    if (G.size() == 0) return 0.0;
    Eigen::JacobiSVD<CMat> svd(G);
    return svd.singularValues()(0);
  };
  const double pi = std::acos(-1.0);
  double best = 0.0, best_w = 0.0;
  for (int k = 0; k <= grid; ++k) {
    const double w = pi * k / grid;
    const double g = gain(w);
    if (g > best) best = g, best_w = w;
  }
  // Golden-section refinement around the best grid point.
  double lo = std::max(0.0, best_w - pi / grid), hi = std::min(pi, best_w + pi / grid);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 80; ++it) {
    const double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
    if (gain(a) > gain(b)) hi = b; else lo = a;
  }
  return std::max(best, gain(0.5 * (lo + hi)));
}

double lipschitz_upper_bound(const ExplicitModel& model, double gamma_max, int bisection_steps) {
  const int p = model.dims.p, m = model.dims.m;
  const LmiOptions fast{kLmiTolerance, false};
  auto feasible = [&](double gamma) {
    const IqcSpec iqc = IqcSpec::lipschitz(gamma, p, m);
    if (model.dims.q == 0) {
      const auto c = lti_lipschitz_certificate(model, gamma);
      return c && all_pass(check_iqc_lmi(model, iqc, c, fast));
    }
    if (!model.certificate) throw Error("no certificate; run construction or provide (P,Λ)");
    for (int k = -24; k <= 24; ++k) {
      Certificate c = *model.certificate;
      const double s = std::pow(10.0, k / 4.0);
      c.P *= s;
      c.Lambda *= s;
      if (all_pass(check_iqc_lmi(model, iqc, c, fast))) return true;
    }
    return false;
  };
  if (!feasible(gamma_max)) return std::numeric_limits<double>::infinity();
  double lo = 1e-6, hi = gamma_max;
  if (feasible(lo)) return lo;
  for (int it = 0; it < bisection_steps && hi > lo * (1.0 + 1e-6); ++it) {
    const double mid = std::sqrt(lo * hi);
    if (feasible(mid)) hi = mid; else lo = mid;
  }
  return hi;
}

double estimate_lipschitz_lower(const ExplicitModel& model, const LipschitzOptions& opts) {
  const auto& d = model.dims;
  const int T = opts.horizon;
  if (T < 1 || opts.restarts < 1 || opts.steps < 0) throw Error("invalid Lipschitz search options");
  if (d.m == 0) return 0.0;
  const Eigen::Index nu = static_cast<Eigen::Index>(T) * d.m;
  const Eigen::Index nvar = 2 * nu + d.n;
  double best = 0.0;
  for (int r = 0; r < opts.restarts; ++r) {
    std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                      static_cast<std::uint32_t>(r)};
    std::mt19937_64 rng(seq);
    Vector z(nvar);
    z.head(nu) = gaussian(nu, 1, 1.0, rng);
    z.segment(nu, nu) = z.head(nu) + gaussian(nu, 1, opts.perturbation, rng);
    z.tail(d.n) = gaussian(d.n, 1, 1.0, rng);
    Vector m1 = Vector::Zero(nvar), m2 = Vector::Zero(nvar);
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int step = 0; step <= opts.steps; ++step) {
      Vector du = z.head(nu) - z.segment(nu, nu);
      if (du.squaredNorm() < 1e-24) {
        z.segment(nu, nu) = z.head(nu) + gaussian(nu, 1, opts.perturbation, rng);
        du = z.head(nu) - z.segment(nu, nu);
      }
      std::vector<Matrix> u(T, Matrix(d.m, 2));
      for (int t = 0; t < T; ++t) {
        u[t].col(0) = z.segment(static_cast<Eigen::Index>(t) * d.m, d.m);
        u[t].col(1) = z.segment(nu + static_cast<Eigen::Index>(t) * d.m, d.m);
      }
      Matrix x0(d.n, 2);
      x0.col(0) = z.tail(d.n);
      x0.col(1) = z.tail(d.n);
      BatchRollout roll;
      try {
        roll = simulate_batch(model, u, x0, opts.solver);
      } catch (const NumericalError&) {
        break;
      }
      const double den = du.squaredNorm();
      double num = 0.0;
      std::vector<Matrix> ybar(T, Matrix(d.p, 2));
      for (int t = 0; t < T; ++t) {
        const Vector dy = roll.y[t].col(0) - roll.y[t].col(1);
        num += dy.squaredNorm();
        ybar[t].col(0) = 2.0 * dy / den;
        ybar[t].col(1) = -2.0 * dy / den;
      }
      const double f = num / den;
      if (!std::isfinite(f)) break;
      best = std::max(best, std::sqrt(f));
      if (step == opts.steps) break;
      const BatchCotangent ct = backward_batch(model, u, roll, ybar);
      Vector grad(nvar);
      for (int t = 0; t < T; ++t) {
        grad.segment(static_cast<Eigen::Index>(t) * d.m, d.m) = ct.u[t].col(0);
        grad.segment(nu + static_cast<Eigen::Index>(t) * d.m, d.m) = ct.u[t].col(1);
      }
      grad.head(nu) -= 2.0 * f * du / den;
      grad.segment(nu, nu) += 2.0 * f * du / den;
      grad.tail(d.n) = ct.x0.col(0) + ct.x0.col(1);
      if (!grad.allFinite()) break;
      m1 = b1 * m1 + (1.0 - b1) * grad;
      m2 = b2 * m2 + (1.0 - b2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(b1, step + 1), c2 = 1.0 - std::pow(b2, step + 1);
      z.array() += opts.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
    }
  }
  return best;
}

double empirical_contraction_rate(const ExplicitModel& model, int trials, int horizon,
                                  std::uint64_t seed) {
  const auto& d = model.dims;
  if (d.n == 0) return 0.0;
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int k = 0; k < trials; ++k) {
    const Matrix u = gaussian(horizon, d.m, 1.0, rng);
    const Vector a = gaussian(d.n, 1, 1.0, rng);
    const Vector b = gaussian(d.n, 1, 1.0, rng);
    const Vector gap = trajectory_pair_gap(model, u, a, b);
    const double g0 = gap(0);
    if (!(g0 > 0.0)) continue;
    // Stop the fit before the gap reaches roundoff level.
    const double floor = 1e-10 * g0;
    int last = 0;
    while (last + 1 < gap.size() && gap(last + 1) > floor && gap(last + 1) > 1e-150) ++last;
    double rate;
    if (last == 0) {
      rate = gap.size() > 1 ? std::pow(gap(1) / g0, 2) : 0.0;
    } else {
      double st = 0, sy = 0, stt = 0, sty = 0;
      const int cnt = last + 1;
      for (int t = 0; t <= last; ++t) {
        const double y = 2.0 * std::log(gap(t));
        st += t;
        sy += y;
        stt += double(t) * t;
        sty += t * y;
      }
      const double slope = (cnt * sty - st * sy) / (cnt * stt - st * st);
      rate = std::exp(slope);
    }
    worst = std::max(worst, rate);
  }
  return worst;
}

nlohmann::json report_to_json(const Report& r) {
  using nlohmann::json;
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"margin", num(c.margin)}});
  json j;
  j["checks"] = checks;
  j["gamma_lower"] = r.gamma_lower ? num(*r.gamma_lower) : json(nullptr);
  j["alpha_hat"] = r.alpha_hat ? num(*r.alpha_hat) : json(nullptr);
  j["pass"] = r.pass();
  return j;
}

}  // namespace ren::verify
