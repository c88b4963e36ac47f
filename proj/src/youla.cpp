#include "ren/youla.hpp"

#include "ren/echo_state.hpp"
#include "ren/errors.hpp"
#include "ren/model.hpp"
#include "ren/param.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace ren::youla {

void LinearPlant::validate() const {
  const int n = states(), nw = disturbances(), nu = controls(), nz = performance(),
            ny = measurements();
  auto shape = [](const Matrix& a, int r, int c, const char* name) {
    if (a.rows() != r || a.cols() != c)
      throw DimensionError(std::string("plant matrix ") + name + " has the wrong shape");
  };
  shape(A, n, n, "A");
  shape(B1, n, nw, "B1");
  shape(B2, n, nu, "B2");
  shape(C1, nz, n, "C1");
  shape(D11, nz, nw, "D11");
  shape(D12, nz, nu, "D12");
  shape(C2, ny, n, "C2");
  shape(D21, ny, nw, "D21");
  shape(K, nu, n, "K");
  shape(L, n, ny, "L");
  if (spectral_radius(A - L * C2) >= 1.0 - kMarginalRadius) throw Error("A - L C2 is not Schur stable");
  if (spectral_radius(A - B2 * K) >= 1.0 - kMarginalRadius) throw Error("A - B2 K is not Schur stable");
}

LinearPlant plant_from_tf(double rho, double phi, std::optional<double> c0) {
  const double a1 = 2.0 * rho * std::cos(phi);
  const double a0 = c0 ? *c0 : phi * phi;
  LinearPlant p;
  p.A.resize(2, 2);
  p.A << -a1, -a0, 1.0, 0.0;
  const double r = spectral_radius(p.A);
  if (!(r < 1.0 - kMarginalRadius))
    throw Error("plant denominator has a pole on or outside the unit circle (radius " +
                std::to_string(r) + ")");
  p.B1 = Matrix::Zero(2, 1);
  p.B1(0, 0) = 1.0;
  p.B2 = p.B1;
  p.C1 = Matrix::Zero(1, 2);
  p.C1(0, 1) = 1.0;
  p.D11 = Matrix::Zero(1, 1);
  p.D12 = Matrix::Zero(1, 1);
  p.C2 = -p.C1;
  p.D21 = Matrix::Zero(1, 1);
  p.K = Matrix::Zero(1, 2);
  p.L = Matrix::Zero(2, 1);
  return p;
}

ClosedLoop linear_response(const LinearPlant& pl, const Matrix& w, const Matrix& v) {
  const Eigen::Index T = w.rows();
  if (w.cols() != pl.disturbances() || v.rows() != T || v.cols() != pl.controls())
    throw DimensionError("closed-loop signal shapes do not match the plant");
  ClosedLoop cl;
  cl.zeta.resize(T, pl.performance());
  cl.u.resize(T, pl.controls());
  cl.ytilde.resize(T, pl.measurements());
  cl.v = v;
  Vector x = Vector::Zero(pl.states()), xh = Vector::Zero(pl.states());
  for (Eigen::Index t = 0; t < T; ++t) {
    const Vector wt = w.row(t).transpose();
    const Vector yt = pl.C2 * x - pl.C2 * xh + pl.D21 * wt;
    const Vector ut = -pl.K * xh + v.row(t).transpose();
    cl.ytilde.row(t) = yt.transpose();
    cl.u.row(t) = ut.transpose();
    cl.zeta.row(t) = (pl.C1 * x + pl.D11 * wt + pl.D12 * ut).transpose();
    x = pl.A * x + pl.B1 * wt + pl.B2 * ut;
    xh = pl.A * xh + pl.B2 * ut + pl.L * yt;
  }
  return cl;
}

ClosedLoop closed_loop_rollout(const LinearPlant& pl, const ExplicitModel& Q, const Matrix& w,
                               const Vector& q0) {
  const Eigen::Index T = w.rows();
  if (w.cols() != pl.disturbances()) throw DimensionError("disturbance width mismatch");
  if (Q.dims.m != pl.measurements() || Q.dims.p != pl.controls())
    throw DimensionError("Q must map measurements to controls");
  ClosedLoop cl;
  cl.zeta.resize(T, pl.performance());
  cl.u.resize(T, pl.controls());
  cl.ytilde.resize(T, pl.measurements());
  cl.v.resize(T, pl.controls());
  Vector x = Vector::Zero(pl.states()), xh = Vector::Zero(pl.states());
  Matrix q = q0;
  for (Eigen::Index t = 0; t < T; ++t) {
    const Vector wt = w.row(t).transpose();
    const Vector yt = pl.C2 * x - pl.C2 * xh + pl.D21 * wt;
    const BatchRollout step = simulate_batch(Q, {Matrix(yt)}, q);
    const Vector vt = step.y[0].col(0);
    q = step.x[1];
    const Vector ut = -pl.K * xh + vt;
    cl.ytilde.row(t) = yt.transpose();
    cl.v.row(t) = vt.transpose();
    cl.u.row(t) = ut.transpose();
    cl.zeta.row(t) = (pl.C1 * x + pl.D11 * wt + pl.D12 * ut).transpose();
    x = pl.A * x + pl.B1 * wt + pl.B2 * ut;
    xh = pl.A * xh + pl.B2 * ut + pl.L * yt;
  }
  return cl;
}

ClosedLoop closed_loop_rollout(const LinearPlant& pl, const ExplicitModel& Q, const Matrix& w) {
  return closed_loop_rollout(pl, Q, w, Vector::Zero(Q.dims.n));
}

int QBasis::size() const {
  const auto& d = dynamics.dims;
  return d.n + d.q + d.m + (bias ? 1 : 0);
}

Matrix QBasis::features(const Matrix& ytilde, const Vector& q0) const {
  const Matrix F = echo_state::readout_features(dynamics, ytilde, q0);
  return bias ? F : Matrix(F.leftCols(F.cols() - 1));
}

Matrix QBasis::features(const Matrix& ytilde) const {
  return features(ytilde, Vector::Zero(dynamics.dims.n));
}

ExplicitModel QBasis::with_readout(const Matrix& theta) const {
  const auto& d = dynamics.dims;
  if (theta.rows() != size()) throw DimensionError("readout has the wrong number of rows");
  ExplicitModel m = dynamics;
  m.dims.p = static_cast<int>(theta.cols());
  m.C2 = theta.topRows(d.n).transpose();
  m.D21 = theta.middleRows(d.n, d.q).transpose();
  m.D22 = theta.middleRows(d.n + d.q, d.m).transpose();
  m.by = bias ? Vector(theta.bottomRows(1).transpose()) : Vector::Zero(theta.cols());
  m.params.reset();
  m.iqc.reset();
  return m;
}

QBasis sample_q_echo(int n, int q, std::uint64_t seed, int ny, Activation act) {
  std::mt19937_64 rng(seed);
  DirectParams t = DirectParams::zeros(ModelKind::kCAren, {n, ny, 1, q});
  t.activation = act;
  const int k = 2 * n + q;
  auto glorot = [&](Eigen::Index r, Eigen::Index c) {
    return gaussian(r, c, std::sqrt(2.0 / static_cast<double>(r + c)), rng);
  };
  t.X = gaussian(k, k, 2.0 / std::sqrt(static_cast<double>(k)), rng);
  t.Y1 = glorot(n, n);
  t.B2til = glorot(n, ny);
  t.D12til = glorot(q, ny);
  t.bx = glorot(n, 1);
  t.bv = glorot(q, 1);
  QBasis b;
  b.dynamics = param::construct(t);
  b.bias = true;
  return b;
}

QBasis sample_q_linear(int n, double lambda, std::uint64_t seed, int ny) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw Error("lambda must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  const Matrix Abar = gaussian(n, n, std::sqrt(1.0 / (2.0 * n)), rng);
  QBasis b;
  b.dynamics = ExplicitModel::zeros(ModelKind::kCAren, {n, ny, 1, 0});
  b.dynamics.A = (1.0 - lambda) * Abar / spectral_radius(Abar);
  b.dynamics.B2 = gaussian(n, ny, std::sqrt(2.0 / (n + ny)), rng);
  b.bias = false;
  return b;
}

AffineResponse build_affine(const LinearPlant& pl, const QBasis& basis,
                            const std::vector<Matrix>& disturbances) {
  if (pl.controls() != 1) throw DimensionError("policy optimization supports one control input");
  const int k = basis.size(), nz = pl.performance();
  Eigen::Index rows_z = 0, rows_u = 0;
  for (const auto& w : disturbances) rows_z += w.rows() * nz, rows_u += w.rows();
  AffineResponse a;
  a.Z0.resize(rows_z);
  a.U0.resize(rows_u);
  a.GZ.resize(rows_z, k);
  a.GU.resize(rows_u, k);
  Eigen::Index rz = 0, ru = 0;
  for (const auto& w : disturbances) {
    const Eigen::Index T = w.rows();
    const ClosedLoop base = linear_response(pl, w, Matrix::Zero(T, 1));
    const Matrix F = basis.features(base.ytilde);
    auto flat = [](const Matrix& m) {
      return Eigen::Map<const Eigen::VectorXd>(Matrix(m.transpose()).data(), m.size()).eval();
    };
    a.Z0.segment(rz, T * nz) = flat(base.zeta);
    a.U0.segment(ru, T) = base.u.col(0);
    const Matrix zero_w = Matrix::Zero(T, w.cols());
    for (int i = 0; i < k; ++i) {
      const ClosedLoop r = linear_response(pl, zero_w, F.col(i));
      a.GZ.col(i).segment(rz, T * nz) = flat(r.zeta);
      a.GU.col(i).segment(ru, T) = r.u.col(0);
    }
    rz += T * nz;
    ru += T;
  }
  return a;
}

namespace {

struct Barrier {
  const AffineResponse& a;
  const PolicyOptions& o;
  bool bounded;

  // Value of t*(sum s + reg|theta|^2) - sum log barriers with s minimized out;
  // +inf outside the control bound.
  double value(const Vector& theta, double t) const {
    const double c = 1.0 / t;
    const Vector z = a.Z0 + a.GZ * theta;
    double f = t * o.reg * theta.squaredNorm();
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double s = c + std::hypot(c, z(i));
      f += s / c - std::log(2.0 * c * s);
    }
    if (bounded) {
      const Vector u = a.U0 + a.GU * theta;
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double lo = o.umax + u(i), hi = o.umax - u(i);
        if (!(lo > 0.0 && hi > 0.0)) return std::numeric_limits<double>::infinity();
        f -= std::log(lo) + std::log(hi);
      }
    }
    return f;
  }

  void derivatives(const Vector& theta, double t, Vector& g, Matrix& H) const {
    const double c = 1.0 / t;
    const Vector z = a.Z0 + a.GZ * theta;
    Vector dz(z.size()), hz(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      const double r = std::hypot(c, z(i));
      const double s = c + r;
      dz(i) = z(i) / (c * s);
      hz(i) = 1.0 / (r * s);
    }
    g = a.GZ.transpose() * dz + 2.0 * t * o.reg * theta;
    H = a.GZ.transpose() * hz.asDiagonal() * a.GZ;
    if (bounded) {
      const Vector u = a.U0 + a.GU * theta;
      Vector du(u.size()), hu(u.size());
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double lo = o.umax + u(i), hi = o.umax - u(i);
        du(i) = 1.0 / hi - 1.0 / lo;
        hu(i) = 1.0 / (hi * hi) + 1.0 / (lo * lo);
      }
      g += a.GU.transpose() * du;
      H += a.GU.transpose() * hu.asDiagonal() * a.GU;
    }
    H.diagonal().array() += 2.0 * t * o.reg;
  }
};

}  // namespace

PolicyResult optimize_policy(const AffineResponse& a, const PolicyOptions& o) {
  const Eigen::Index k = a.GZ.cols();
  if (a.GZ.rows() != a.Z0.size() || a.GU.rows() != a.U0.size() || a.GU.cols() != k)
    throw DimensionError("affine response shapes are inconsistent");
  if (!(o.umax > 0.0)) throw Error("umax must be positive");
  const bool bounded = std::isfinite(o.umax) && a.U0.size() > 0;
  if (bounded && a.U0.cwiseAbs().maxCoeff() >= o.umax)
    throw InfeasibleError("the zero policy already violates the control bound; no strictly "
                          "feasible starting point");
  const Barrier bar{a, o, bounded};
  const double mc = 2.0 * a.Z0.size() + (bounded ? 2.0 * a.U0.size() : 0.0);
  Vector theta = Vector::Zero(k);
  PolicyResult res;
  double t = mc / std::max(a.Z0.cwiseAbs().sum(), 1.0);
  for (int stage = 0; stage < 60; ++stage) {
    for (int it = 0; it < o.max_newton; ++it) {
      Vector g;
      Matrix H;
      bar.derivatives(theta, t, g, H);
      Eigen::LDLT<Matrix> ldlt(H);
      Vector step = -ldlt.solve(g);
      if (!step.allFinite()) throw NumericalError("policy Newton system is singular");
      const double dec = -g.dot(step);
      ++res.newton_steps;
      if (dec / 2.0 <= 1e-10) break;
      const double f0 = bar.value(theta, t);
      double s = 1.0;
      Vector cand = theta + step;
      double f1 = bar.value(cand, t);
      while (!(f1 <= f0 - 0.25 * s * dec) && s > 1e-12) {
        s *= 0.5;
        cand = theta + s * step;
        f1 = bar.value(cand, t);
      }
      if (!(f1 <= f0)) break;
      theta = cand;
    }
    const double l1 = (a.Z0 + a.GZ * theta).cwiseAbs().sum();
    if (mc / t <= o.abs_tol + o.rel_tol * l1) break;
    t *= 10.0;
  }
  res.theta = theta;
  res.l1_cost = (a.Z0 + a.GZ * theta).cwiseAbs().sum();
  res.objective = res.l1_cost + o.reg * theta.squaredNorm();
  res.max_abs_u = a.U0.size() ? (a.U0 + a.GU * theta).cwiseAbs().maxCoeff() : 0.0;
  return res;
}

Matrix piecewise_constant(int length, int hold, double magnitude, std::mt19937_64& rng) {
  if (length < 1 || hold < 1) throw Error("length and hold must be positive");
  std::uniform_real_distribution<double> ud(-magnitude, magnitude);
  Matrix w(length, 1);
  double level = 0.0;
  for (int t = 0; t < length; ++t) {
    if (t % hold == 0) level = ud(rng);
    w(t, 0) = level;
  }
  return w;
}

YoulaRun run_experiment(const YoulaConfig& cfg) {
  YoulaRun run;
  run.plant = plant_from_tf(cfg.rho, cfg.phi, cfg.c0);
  std::mt19937_64 rng(cfg.seed);
  for (int j = 0; j < cfg.sequences; ++j)
    run.disturbances.push_back(piecewise_constant(cfg.length, cfg.hold, cfg.magnitude, rng));
  run.nonlinear = sample_q_echo(cfg.n, cfg.q, cfg.seed + 1, 1, cfg.activation);
  run.linear = sample_q_linear(cfg.n, cfg.lambda, cfg.seed + 2, 1);
  const AffineResponse an = build_affine(run.plant, run.nonlinear, run.disturbances);
  const AffineResponse al = build_affine(run.plant, run.linear, run.disturbances);
  run.open_loop_cost = an.Z0.cwiseAbs().sum();
  run.nonlinear_policy = optimize_policy(an, cfg.policy);
  run.linear_policy = optimize_policy(al, cfg.policy);
  return run;
}

double pair_convergence_gap(const LinearPlant& plant, const ExplicitModel& Q, const Matrix& w,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Vector qb = gaussian(Q.dims.n, 1, 1.0, rng);
  const ClosedLoop a = closed_loop_rollout(plant, Q, w);
  const ClosedLoop b = closed_loop_rollout(plant, Q, w, qb);
  const Eigen::Index tail = std::max<Eigen::Index>(1, w.rows() / 4);
  return (a.zeta - b.zeta).bottomRows(tail).cwiseAbs().maxCoeff();
}

void write_traces_csv(const std::string& path, const Matrix& w,
                      const std::vector<std::pair<std::string, ClosedLoop>>& runs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "t,w";
  for (const auto& [name, cl] : runs) out << ",zeta_" << name << ",u_" << name;
  out << '\n' << std::setprecision(12);
  for (Eigen::Index t = 0; t < w.rows(); ++t) {
    out << t << ',' << w(t, 0);
    for (const auto& [name, cl] : runs) out << ',' << cl.zeta(t, 0) << ',' << cl.u(t, 0);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace ren::youla
