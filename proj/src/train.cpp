#include "ren/train.hpp"

#include "ren/equilibrium.hpp"
#include "ren/errors.hpp"
#include "ren/param.hpp"
#include "ren/serialize.hpp"
#include "ren/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ren::train {

double TrainConfig::rate_at(int epoch) const {
  if (decay_every <= 0) return learning_rate;
  return learning_rate * std::pow(lr_decay, epoch / decay_every);
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw Error("learning_rate must be finite and non-negative");
  if (!(lr_decay > 0.0)) throw Error("lr_decay must be positive");
  if (decay_every < 0) throw Error("decay_every must be non-negative");
  if (epochs < 0) throw Error("epochs must be non-negative");
  if (chunk_length < 0) throw Error("chunk_length must be non-negative");
  if (batch_size < 1) throw Error("batch_size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw Error("Adam betas must lie in [0, 1)");
  if (!(eps_opt > 0.0)) throw Error("eps_opt must be positive");
}

double loss_simulation_error(const ExplicitModel& model, const SequenceBatch& batch,
                             const SolverOptions& opts) {
  batch.validate();
  if (!batch.has_outputs()) throw Error("simulation error needs output data");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Vector x0 = batch.initial_states.empty() ? Vector::Zero(model.dims.n)
                                                   : batch.initial_states[i];
    const Trajectory tr = simulate(model, batch.inputs[i], x0, opts);
    if (tr.y.cols() != batch.outputs[i].cols()) throw DimensionError("output width mismatch");
    total += (batch.outputs[i] - tr.y).squaredNorm();
  }
  return total;
}

double nrmse(const Matrix& y, const Matrix& y_ref) {
  if (y.rows() != y_ref.rows() || y.cols() != y_ref.cols())
    throw DimensionError("nrmse: shapes differ");
  const double den = y_ref.norm();
  if (!(den > 0.0)) throw Error("nrmse: reference has zero norm");
  return (y_ref - y).norm() / den;
}

DirectParams gradient(const DirectParams& theta, const std::optional<IqcSpec>& iqc,
                      const ModelLoss& loss, double* value) {
  const ExplicitModel model = param::construct(theta, iqc);
  ModelGradient g = ModelGradient::zeros(theta.dims);
  const double v = loss(model, &g);
  if (!std::isfinite(v)) throw NumericalError("non-finite loss");
  auto finite = [](const ModelGradient& mg) {
    return mg.A.allFinite() && mg.B1.allFinite() && mg.B2.allFinite() && mg.C1.allFinite() &&
           mg.D11.allFinite() && mg.D12.allFinite() && mg.C2.allFinite() && mg.D21.allFinite() &&
           mg.D22.allFinite() && mg.bx.allFinite() && mg.bv.allFinite() && mg.by.allFinite();
  };
  if (!finite(g)) throw NumericalError("non-finite gradient in simulation backward pass");
  DirectParams out = param::construct_vjp(theta, iqc, g);
  if (!out.flatten().allFinite())
    throw NumericalError("non-finite gradient in construction backward pass");
  if (value) *value = v;
  return out;
}

ChunkSet make_chunks(const SequenceBatch& data, int length) {
  data.validate();
  if (!data.has_outputs()) throw Error("training data has no outputs");
  if (length < 1 || length > data.min_length())
    throw Error("chunk length must lie in [1, shortest sequence length]");
  ChunkSet cs;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Eigen::Index T = data.inputs[i].rows();
    Eigen::Index start = 0;
    for (; start + length <= T; start += length) {
      cs.inputs.push_back(data.inputs[i].middleRows(start, length));
      cs.outputs.push_back(data.outputs[i].middleRows(start, length));
    }
    if (start < T) {
      cs.inputs.push_back(data.inputs[i].bottomRows(length));
      cs.outputs.push_back(data.outputs[i].bottomRows(length));
    }
  }
  return cs;
}

double chunk_loss(const ExplicitModel& model, const ChunkSet& chunks, const std::vector<int>& items,
                  ModelGradient* grad, std::vector<double>* item_losses,
                  const SolverOptions& opts) {
  const auto& d = model.dims;
  const Eigen::Index B = static_cast<Eigen::Index>(items.size());
  if (B == 0) return 0.0;
  const Eigen::Index T = chunks.inputs[items[0]].rows();
  std::vector<Matrix> u(T, Matrix(d.m, B));
  for (Eigen::Index b = 0; b < B; ++b) {
    const Matrix& ui = chunks.inputs[items[b]];
    if (ui.rows() != T) throw DimensionError("chunks in a batch must have equal length");
    for (Eigen::Index t = 0; t < T; ++t) u[t].col(b) = ui.row(t).transpose();
  }
  const BatchRollout roll = simulate_batch(model, u, Matrix::Zero(d.n, B), opts);
  std::vector<Matrix> ybar(T, Matrix(d.p, B));
  Vector per = Vector::Zero(B);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index b = 0; b < B; ++b) {
      const Vector e = roll.y[t].col(b) - chunks.outputs[items[b]].row(t).transpose();
      per(b) += e.squaredNorm();
      ybar[t].col(b) = 2.0 * e;
    }
  }
  if (item_losses)
    for (Eigen::Index b = 0; b < B; ++b) (*item_losses)[b] = per(b);
  if (grad) *grad += backward_batch(model, u, roll, ybar).weights;
  return per.sum();
}

double one_step_loss(const ExplicitModel& model, const Matrix& X, const Matrix& U,
                     const Matrix& Xnext, ModelGradient* grad, Vector* item_losses,
                     const SolverOptions& opts) {
  const auto& d = model.dims;
  const Eigen::Index N = X.cols();
  if (X.rows() != d.n || Xnext.rows() != d.n || U.rows() != d.m || U.cols() != N ||
      Xnext.cols() != N)
    throw DimensionError("one-step data shapes do not match the model");
  const bool acyclic = is_acyclic(model.kind) && equilibrium::is_strictly_lower(model.D11);
  Matrix bw = model.C1 * X + model.D12 * U;
  bw.colwise() += model.bv;
  std::optional<Vector> metric;
  if (model.certificate) metric = model.certificate->Lambda;
  const Matrix W = equilibrium::solve_batch(model.D11, bw, model.activation, acyclic,
                                            opts.tolerance, opts.max_iters, metric, opts.step);
  Matrix pred = model.A * X + model.B1 * W + model.B2 * U;
  pred.colwise() += model.bx;
  const Matrix E = pred - Xnext;
  if (item_losses) *item_losses = E.colwise().squaredNorm().transpose();
  if (grad) {
    const Matrix xbar = 2.0 * E;
    grad->A.noalias() += xbar * X.transpose();
    grad->B1.noalias() += xbar * W.transpose();
    grad->B2.noalias() += xbar * U.transpose();
    grad->bx += xbar.rowwise().sum();
    const Matrix V = bw + model.D11 * W;
    const Matrix vbar = equilibrium::vjp_batch(model.D11, V, model.B1.transpose() * xbar,
                                               model.activation, acyclic);
    grad->D11.noalias() += vbar * W.transpose();
    grad->C1.noalias() += vbar * X.transpose();
    grad->D12.noalias() += vbar * U.transpose();
    grad->bv += vbar.rowwise().sum();
  }
  return E.squaredNorm();
}

void Adam::reset(Eigen::Index size) {
  m = Vector::Zero(size);
  v = Vector::Zero(size);
  t = 0;
}

void Adam::step(Vector& theta, const Vector& grad, double lr, double beta1, double beta2,
                double eps) {
  if (m.size() != theta.size()) reset(theta.size());
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

void fit_objective(FitState& state, int num_items, const BatchObjective& objective,
                   const TrainConfig& config, const std::optional<IqcSpec>& iqc,
                   const EpochCallback& on_epoch) {
  config.validate();
  if (num_items < 1) throw Error("training set is empty");
  if (state.adam.m.size() != state.theta.size()) state.adam.reset(state.theta.size());
  std::vector<int> order(num_items);
  std::vector<double> item_loss(num_items, 0.0);
  for (; state.epoch < config.epochs; ++state.epoch) {
    const int epoch = state.epoch;
    const double lr = config.rate_at(epoch);
    std::iota(order.begin(), order.end(), 0);
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                      static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    int step = 0;
    for (int start = 0; start < num_items; start += config.batch_size, ++step) {
      const int stop = std::min(num_items, start + config.batch_size);
      const std::vector<int> items(order.begin() + start, order.begin() + stop);
      std::vector<double> losses(items.size(), 0.0);
      double value = 0.0;
      DirectParams g;
      try {
        g = gradient(
            state.theta, iqc,
            [&](const ExplicitModel& mdl, ModelGradient* mg) {
              return objective(mdl, items, mg, &losses);
            },
            &value);
      } catch (const NumericalError& e) {
        throw NumericalError("epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(step) + ": " + e.what());
      }
      for (std::size_t k = 0; k < items.size(); ++k) item_loss[items[k]] = losses[k];
      state.log.push_back({epoch, step, value, lr});
      Vector flat = state.theta.flatten();
      state.adam.step(flat, g.flatten(), lr, config.beta1, config.beta2, config.eps_opt);
      if (!flat.allFinite())
        throw NumericalError("epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(step) + ": parameters became non-finite");
      state.theta.unflatten(flat);
      if (config.check_every_step) {
        const ExplicitModel mdl = param::construct(state.theta, iqc);
        auto checks = verify::check_contraction_lmi(mdl, {}, {verify::kLmiTolerance, false});
        if (state.theta.robust()) {
          const auto more = verify::check_iqc_lmi(mdl, *iqc, {}, {verify::kLmiTolerance, false});
          checks.insert(checks.end(), more.begin(), more.end());
        }
        if (!verify::all_pass(checks))
          throw NumericalError("epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(step) + ": certificate check failed after update");
      }
    }
    // Summed in item order so the value does not depend on the shuffle.
    double total = 0.0;
    for (double l : item_loss) total += l;
    state.epoch_loss.push_back(total);
    if (on_epoch) {
      FitState view = state;
      ++view.epoch;
      on_epoch(view);
    }
  }
}

FitResult fit(const DirectParams& theta0, const SequenceBatch& data, const TrainConfig& config,
              const std::optional<IqcSpec>& iqc) {
  const int length = config.chunk_length > 0 ? config.chunk_length
                                             : static_cast<int>(data.min_length());
  const ChunkSet chunks = make_chunks(data, length);
  FitState state;
  state.theta = theta0;
  fit_objective(
      state, static_cast<int>(chunks.inputs.size()),
      [&](const ExplicitModel& mdl, const std::vector<int>& items, ModelGradient* g,
          std::vector<double>* losses) {
        return chunk_loss(mdl, chunks, items, g, losses, config.solver);
      },
      config, iqc);
  return {state.theta, state.epoch_loss, state.log};
}

nlohmann::json state_to_json(const FitState& s) {
  nlohmann::json j;
  j["params"] = params_to_json(s.theta);
  j["epoch"] = s.epoch;
  j["adam"] = {{"t", s.adam.t}, {"m", vector_to_json(s.adam.m)}, {"v", vector_to_json(s.adam.v)}};
  nlohmann::json hist = nlohmann::json::array();
  for (double l : s.epoch_loss) hist.push_back(l);
  j["epoch_loss"] = hist;
  return j;
}

FitState state_from_json(const nlohmann::json& j) {
  try {
    FitState s;
    if (!j.is_object() || !j.contains("params") || !j.contains("epoch") || !j.contains("adam"))
      throw IoError("checkpoint: missing params, epoch or adam");
    s.theta = params_from_json(j["params"]);
    s.epoch = j["epoch"].get<int>();
    const auto& a = j["adam"];
    s.adam.t = a.at("t").get<long long>();
    s.adam.m = vector_from_json(a.at("m"), s.theta.size(), "adam.m");
    s.adam.v = vector_from_json(a.at("v"), s.theta.size(), "adam.v");
    if (j.contains("epoch_loss"))
      for (const auto& l : j["epoch_loss"]) s.epoch_loss.push_back(l.get<double>());
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace ren::train
