#pragma once

#include "ren/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ren {

// Time-major sequences: inputs[i] is T_i x m, outputs[i] is T_i x p.
struct SequenceBatch {
  std::vector<Matrix> inputs;
  std::vector<Matrix> outputs;         // empty when unlabeled
  std::vector<Vector> initial_states;  // empty means zero

  std::size_t size() const { return inputs.size(); }
  bool has_outputs() const { return !outputs.empty(); }
  int input_dim() const;
  int output_dim() const;
  Eigen::Index min_length() const;
  Eigen::Index total_length() const;
  void validate() const;
};

// Settings passed to the equilibrium solver for full-D11 models.
struct SolverOptions {
  double tolerance = 1e-10;
  int max_iters = 500;
  double step = 1.0;
};

struct Trajectory {
  Matrix y;  // T x p
  Matrix x;  // (T+1) x n, includes the terminal state
  Matrix w;  // T x q
};

Trajectory simulate(const ExplicitModel& model, const Matrix& u, const Vector& x0,
                    const SolverOptions& opts = {});
Trajectory simulate(const ExplicitModel& model, const Matrix& u);

// |x^a_t - x^b_t| for t = 0..T, both rollouts driven by u.
Vector trajectory_pair_gap(const ExplicitModel& model, const Matrix& u, const Vector& a,
                           const Vector& b, const SolverOptions& opts = {});

// Lock-step rollout of B sequences of equal length. u[t] is m x B.
struct BatchRollout {
  std::vector<Matrix> x;  // T+1 entries, n x B
  std::vector<Matrix> v;  // T entries, q x B (pre-activations)
  std::vector<Matrix> w;  // T entries, q x B
  std::vector<Matrix> y;  // T entries, p x B
};

BatchRollout simulate_batch(const ExplicitModel& model, const std::vector<Matrix>& u,
                            const Matrix& x0, const SolverOptions& opts = {});

struct BatchCotangent {
  ModelGradient weights;
  Matrix x0;              // n x B
  std::vector<Matrix> u;  // T entries, m x B
};

// Backpropagation through time for output cotangents ybar[t] (p x B).
BatchCotangent backward_batch(const ExplicitModel& model, const std::vector<Matrix>& u,
                              const BatchRollout& roll, const std::vector<Matrix>& ybar);

// Sequence CSV: header `t,u1..um[,y1..yp]`, optionally with a leading or
// trailing `seq_id` column separating sequences.
SequenceBatch read_sequences_csv(const std::string& path);
void write_sequences_csv(const std::string& path, const SequenceBatch& batch);

}  // namespace ren
