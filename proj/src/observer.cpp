#include "ren/observer.hpp"

#include "ren/errors.hpp"
#include "ren/lmi.hpp"
#include "ren/param.hpp"
#include "ren/verify.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

namespace ren::observer {

void PdeConfig::validate() const {
  if (N < 3) throw Error("PDE grid needs N >= 3");
  if (N % 2 == 0) throw Error("PDE grid needs odd N so the centre is a node");
  if (dt < 0.0 || !std::isfinite(dt)) throw Error("dt must be positive");
  if (step_size() > 0.5 * dz() * dz()) throw Error("dt exceeds the explicit stability limit dz^2/2");
  if (steps < 1) throw Error("steps must be positive");
  if (!(boundary_noise_std >= 0.0)) throw Error("boundary_noise_std must be non-negative");
}

double reaction(double xi) { return 0.5 * xi * (1.0 - xi) * (xi - 0.5); }

Vector pde_step(const Vector& s, double b, const PdeConfig& cfg) {
  const Eigen::Index N = s.size();
  if (N != cfg.N) throw DimensionError("PDE state has the wrong length");
  const double dt = cfg.step_size();
  const double inv_dz2 = 1.0 / (cfg.dz() * cfg.dz());
  Vector next(N);
  for (Eigen::Index i = 1; i + 1 < N; ++i)
    next(i) = s(i) + dt * ((s(i + 1) + s(i - 1) - 2.0 * s(i)) * inv_dz2 + reaction(s(i)));
  next(0) = b;
  next(N - 1) = b;
  if (!next.allFinite() || next.cwiseAbs().maxCoeff() > 1e6)
    throw NumericalError("PDE simulation became unstable");
  return next;
}

Vector boundary_walk(int steps, double b0, double std_dev, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector b(steps);
  double cur = b0;
  for (int t = 0; t < steps; ++t) {
    b(t) = cur;
    cur += std_dev * nd(rng);
  }
  return b;
}

Snapshots generate_snapshots(const PdeConfig& cfg) {
  cfg.validate();
  Snapshots s;
  s.xi.resize(cfg.N, cfg.steps);
  s.xi_next.resize(cfg.N, cfg.steps);
  s.y.resize(cfg.steps);
  s.b = boundary_walk(cfg.steps, cfg.b0, cfg.boundary_noise_std, cfg.seed);
  Vector cur = Vector::Constant(cfg.N, cfg.xi0);
  for (int t = 0; t < cfg.steps; ++t) {
    s.xi.col(t) = cur;
    s.y(t) = cur(cfg.centre());
    try {
      cur = pde_step(cur, s.b(t), cfg);
    } catch (const NumericalError& e) {
      throw NumericalError("step " + std::to_string(t) + ": " + e.what());
    }
    s.xi_next.col(t) = cur;
  }
  return s;
}

DirectParams initial_observer(int N, const ObserverConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  param::InitOptions io;
  io.scale = cfg.init_scale;
  io.activation = cfg.activation;
  io.alpha_bar = cfg.alpha_bar;
  DirectParams t = param::sample_params(ModelKind::kCAren, {N, 2, N, cfg.q}, rng, io);
  t.C2 = Matrix::Identity(N, N);
  t.D21.setZero();
  t.by.setZero();
  return t;
}

Matrix observer_inputs(const Snapshots& data) {
  Matrix U(2, data.size());
  U.row(0) = data.b.transpose();
  U.row(1) = data.y.transpose();
  return U;
}

namespace {

Eigen::Index holdout_start(Eigen::Index T, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw Error("holdout_fraction must lie in [0, 1)");
  return T - static_cast<Eigen::Index>(std::floor(fraction * static_cast<double>(T)));
}

}  // namespace

double correctness_residual(const ExplicitModel& f_o, const Snapshots& data,
                            double holdout_fraction) {
  const Eigen::Index start = holdout_start(data.size(), holdout_fraction);
  const Eigen::Index cnt = data.size() - start;
  if (cnt == 0) return 0.0;
  const Matrix U = observer_inputs(data);
  Vector per;
  train::one_step_loss(f_o, data.xi.rightCols(cnt), U.rightCols(cnt), data.xi_next.rightCols(cnt),
                       nullptr, &per);
  return std::sqrt(per.maxCoeff());
}

TrainedObserver train_observer(const Snapshots& data, const ObserverConfig& cfg,
                               const train::EpochCallback& on_epoch) {
  const int N = static_cast<int>(data.xi.rows());
  const Eigen::Index ntrain = holdout_start(data.size(), cfg.holdout_fraction);
  if (ntrain < 1) throw Error("no training snapshots left after the hold-out split");
  const Matrix U = observer_inputs(data);
  TrainedObserver out;
  out.state.theta = initial_observer(N, cfg);
  train::fit_objective(
      out.state, static_cast<int>(ntrain),
      [&](const ExplicitModel& mdl, const std::vector<int>& items, ModelGradient* g,
          std::vector<double>* losses) {
        const Eigen::Index k = static_cast<Eigen::Index>(items.size());
        Matrix X(N, k), Xn(N, k), Ub(2, k);
        for (Eigen::Index c = 0; c < k; ++c) {
          X.col(c) = data.xi.col(items[c]);
          Xn.col(c) = data.xi_next.col(items[c]);
          Ub.col(c) = U.col(items[c]);
        }
        Vector per;
        const double v = train::one_step_loss(mdl, X, Ub, Xn, g, &per, cfg.train.solver);
        for (Eigen::Index c = 0; c < k; ++c) (*losses)[c] = per(c);
        return v;
      },
      cfg.train, std::nullopt, on_epoch);
  out.model = param::construct(out.state.theta);
  out.rho_hat = correctness_residual(out.model, data, cfg.holdout_fraction);
  return out;
}

double certified_rate(const ExplicitModel& f_o, int steps) {
  if (!f_o.certificate) throw Error("no certificate; run construction or provide (P,Λ)");
  auto holds = [&](double a) {
    Certificate c = *f_o.certificate;
    c.alpha = a;
    return verify::all_pass(verify::check_contraction_lmi(f_o, c, {verify::kLmiTolerance, false}));
  };
  if (!holds(1.0)) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (holds(mid)) hi = mid; else lo = mid;
  }
  return hi;
}

Evaluation evaluate_observer(const ExplicitModel& f_o, const PdeConfig& cfg, const Vector& x0_true,
                             const Vector& xhat0, int steps, double rho) {
  cfg.validate();
  const int N = cfg.N;
  if (x0_true.size() != N || xhat0.size() != N || f_o.dims.n != N || f_o.dims.m != 2)
    throw DimensionError("observer and PDE dimensions disagree");
  const Vector b = boundary_walk(steps, cfg.b0, cfg.boundary_noise_std, cfg.seed);
  Evaluation ev;
  ev.truth.resize(steps + 1, N);
  ev.free_run.resize(steps + 1, N);
  Matrix U(steps, 2);
  Vector x = x0_true, xf = xhat0;
  for (int t = 0; t < steps; ++t) {
    ev.truth.row(t) = x.transpose();
    ev.free_run.row(t) = xf.transpose();
    U(t, 0) = b(t);
    U(t, 1) = x(cfg.centre());
    x = pde_step(x, b(t), cfg);
    xf = pde_step(xf, b(t), cfg);
  }
  ev.truth.row(steps) = x.transpose();
  ev.free_run.row(steps) = xf.transpose();
  ev.estimate = simulate(f_o, U, xhat0).x;
  ev.error = (ev.estimate - ev.truth).rowwise().norm();
  ev.free_error = (ev.free_run - ev.truth).rowwise().norm();
  const Eigen::Index tail = std::max<Eigen::Index>(1, (steps + 1) / 4);
  ev.tail_error = ev.error.tail(tail).mean();
  ev.tail_max_error = ev.error.tail(tail).maxCoeff();
  ev.free_tail_error = ev.free_error.tail(tail).mean();
  ev.rho = rho;
  ev.alpha = std::sqrt(certified_rate(f_o));
  const Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(f_o.certificate->P));
  const double cond = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
  ev.bound = ev.alpha < 1.0 ? 2.0 * rho / (1.0 - ev.alpha) * std::sqrt(cond)
                            : std::numeric_limits<double>::infinity();
  return ev;
}

void write_heatmap_csv(const std::string& path, const Evaluation& ev) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  const Eigen::Index T = ev.truth.rows() - 1, N = ev.truth.cols();
  out << "t,z,xi,xi_hat\n" << std::setprecision(12);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index i = 0; i < N; ++i)
      out << t << ',' << static_cast<double>(i) / (N - 1) << ',' << ev.truth(t, i) << ','
          << ev.estimate(t, i) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace ren::observer
