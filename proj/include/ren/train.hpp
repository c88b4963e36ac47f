#pragma once

#include "ren/model.hpp"
#include "ren/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace ren::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  double lr_decay = 1.0;  // multiply the rate by this ...
  int decay_every = 0;    // ... every this many epochs (0 = never)
  int epochs = 100;
  int chunk_length = 0;  // 0 = shortest sequence length
  int batch_size = 1;    // chunks (or samples) per optimizer step
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_opt = 1e-8;
  // Construct and LMI-check the model after every optimizer step.
  bool check_every_step = false;
  SolverOptions solver;

  double rate_at(int epoch) const;
  void validate() const;
};

// Sum over sequences of |y~_t - y_t|^2. Initial states from the batch or zero.
double loss_simulation_error(const ExplicitModel& model, const SequenceBatch& batch,
                             const SolverOptions& opts = {});

// |y - y_ref| / |y_ref| over the whole sequence.
double nrmse(const Matrix& y, const Matrix& y_ref);

// Loss of an explicit model; when `grad` is non-null also accumulates the
// cotangent of every explicit weight into it.
using ModelLoss = std::function<double(const ExplicitModel&, ModelGradient* grad)>;

// Reverse-mode gradient of loss(construct(theta)) with respect to theta.
DirectParams gradient(const DirectParams& theta, const std::optional<IqcSpec>& iqc,
                      const ModelLoss& loss, double* value = nullptr);

// Equal-length chunks stacked for lock-step simulation.
struct ChunkSet {
  std::vector<Matrix> inputs;   // T x m each
  std::vector<Matrix> outputs;  // T x p each
};

// Splits every sequence into chunks of `length`; a shorter tail becomes a
// chunk aligned to the sequence end (overlapping the previous one).
ChunkSet make_chunks(const SequenceBatch& data, int length);

// Simulation error of the chunks listed in `items`, from zero initial state.
// Per-chunk losses are written to item_losses[k] when non-null.
double chunk_loss(const ExplicitModel& model, const ChunkSet& chunks, const std::vector<int>& items,
                  ModelGradient* grad, std::vector<double>* item_losses = nullptr,
                  const SolverOptions& opts = {});

// One-step prediction error sum |x_next - f(x, u)|^2 over columns, where f is
// the state update of the model.
double one_step_loss(const ExplicitModel& model, const Matrix& X, const Matrix& U,
                     const Matrix& Xnext, ModelGradient* grad, Vector* item_losses = nullptr,
                     const SolverOptions& opts = {});

struct Adam {
  Vector m, v;
  long long t = 0;
  void reset(Eigen::Index size);
  void step(Vector& theta, const Vector& grad, double lr, double beta1, double beta2, double eps);
};

struct LogEntry {
  int epoch = 0;
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

struct FitState {
  DirectParams theta;
  Adam adam;
  int epoch = 0;  // epochs completed
  std::vector<LogEntry> log;
  std::vector<double> epoch_loss;  // sum over items at the parameters seen during the epoch
};

// Loss over a subset of items (chunks, snapshots) of the training set.
using BatchObjective = std::function<double(const ExplicitModel&, const std::vector<int>& items,
                                            ModelGradient* grad, std::vector<double>* item_losses)>;

using EpochCallback = std::function<void(const FitState&)>;

// Adam over shuffled minibatches of `num_items` items. Continues from
// `state` (epoch, optimizer moments) so an interrupted run can resume.
void fit_objective(FitState& state, int num_items, const BatchObjective& objective,
                   const TrainConfig& config, const std::optional<IqcSpec>& iqc,
                   const EpochCallback& on_epoch = {});

struct FitResult {
  DirectParams theta;
  std::vector<double> epoch_loss;
  std::vector<LogEntry> log;
};

// Simulation-error training on chunked sequences.
FitResult fit(const DirectParams& theta0, const SequenceBatch& data, const TrainConfig& config,
              const std::optional<IqcSpec>& iqc = {});

nlohmann::json state_to_json(const FitState& s);
FitState state_from_json(const nlohmann::json& j);

}  // namespace ren::train
