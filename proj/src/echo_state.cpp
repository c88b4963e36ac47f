#include "ren/echo_state.hpp"

#include "ren/errors.hpp"

#include <cmath>

namespace ren::echo_state {

ExplicitModel sample_contracting(Dims dims, std::uint64_t seed, double scale,
                                 const SampleOptions& opts) {
  if (is_robust(opts.kind)) throw Error("echo-state sampling uses contracting kinds only");
  std::mt19937_64 rng(seed);
  param::InitOptions io;
  io.scale = scale;
  io.activation = opts.activation;
  io.alpha_bar = opts.alpha_bar;
  io.epsilon = opts.epsilon;
  DirectParams t = param::sample_params(opts.kind, dims, rng, io);
  t.C2.setZero();
  t.D21.setZero();
  t.by.setZero();
  return param::construct(t);
}

Matrix readout_features(const ExplicitModel& model, const Matrix& u, const Vector& x0) {
  const auto& d = model.dims;
  const Trajectory tr = simulate(model, u, x0);
  Matrix F(u.rows(), d.n + d.q + d.m + 1);
  F.leftCols(d.n) = tr.x.topRows(u.rows());
  F.middleCols(d.n, d.q) = tr.w;
  F.middleCols(d.n + d.q, d.m) = u;
  F.rightCols(1).setOnes();
  return F;
}

ExplicitModel fit_readout(const ExplicitModel& model, const SequenceBatch& data, double ridge) {
  data.validate();
  if (!data.has_outputs()) throw Error("readout fit needs output data");
  if (!(ridge >= 0.0)) throw Error("ridge must be non-negative");
  const auto& d = model.dims;
  const int p = data.output_dim();
  const Eigen::Index k = d.n + d.q + d.m + 1;
  const Eigen::Index rows = data.total_length();
  Matrix F(rows + (ridge > 0.0 ? k : 0), k);
  Matrix Y = Matrix::Zero(F.rows(), p);
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vector x0 = data.initial_states.empty() ? Vector::Zero(d.n) : data.initial_states[i];
    const Eigen::Index T = data.inputs[i].rows();
    F.middleRows(r, T) = readout_features(model, data.inputs[i], x0);
    Y.middleRows(r, T) = data.outputs[i];
    r += T;
  }
  if (ridge > 0.0) F.bottomRows(k) = std::sqrt(ridge) * Matrix::Identity(k, k);
  // Rank-revealing QR with a complete orthogonal step gives the minimal-norm solution.
  const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(F);
  const Matrix theta = cod.solve(Y);  // k x p
  if (!theta.allFinite()) throw NumericalError("readout least squares produced non-finite weights");

  ExplicitModel out = model;
  out.dims.p = p;
  out.C2 = theta.topRows(d.n).transpose();
  out.D21 = theta.middleRows(d.n, d.q).transpose();
  out.D22 = theta.middleRows(d.n + d.q, d.m).transpose();
  out.by = theta.bottomRows(1).transpose();
  // The stored parameters fix D22 = 0 and no longer describe this readout.
  out.params.reset();
  out.iqc.reset();
  return out;
}

}  // namespace ren::echo_state
