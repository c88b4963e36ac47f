#pragma once

#include "ren/train.hpp"
#include "ren/types.hpp"

#include <cstdint>
#include <string>

namespace ren::observer {

// Explicit finite-difference model of
//   d xi/dt = d^2 xi/dz^2 + xi (1 - xi)(xi - 1/2) / 2,  xi(0,t) = xi(1,t) = b(t)
// on N grid nodes of [0, 1].
struct PdeConfig {
  int N = 11;               // odd, so the centre is a node
  double dt = 0.0;          // 0 selects dz^2 / 4
  int steps = 20000;
  double boundary_noise_std = 0.05;
  double b0 = 1.0;          // initial boundary value
  double xi0 = 1.0;         // initial (uniform) state
  std::uint64_t seed = 0;

  double dz() const { return 1.0 / (N - 1); }
  double step_size() const { return dt > 0.0 ? dt : dz() * dz() / 4.0; }
  int centre() const { return (N - 1) / 2; }
  void validate() const;
};

double reaction(double xi);

// One explicit step: interior nodes advance, both boundary nodes become b.
Vector pde_step(const Vector& state, double b, const PdeConfig& cfg);

// Consecutive snapshots; column t of xi_next equals pde_step(xi.col(t), b(t)).
struct Snapshots {
  Matrix xi;       // N x T
  Vector b;        // T
  Vector y;        // T, centre node of xi
  Matrix xi_next;  // N x T
  Eigen::Index size() const { return xi.cols(); }
};

// Random-walk boundary b_{t+1} = b_t + std * omega_t.
Vector boundary_walk(int steps, double b0, double std_dev, std::uint64_t seed);

Snapshots generate_snapshots(const PdeConfig& cfg);

struct ObserverConfig {
  int q = 20;
  double init_scale = 1.0;
  Activation activation = Activation::kRelu;
  double alpha_bar = 1.0;
  std::uint64_t seed = 0;
  double holdout_fraction = 0.1;  // last fraction kept out of training
  train::TrainConfig train;
};

// C-aREN with n = N states, inputs (b, y) and output map [I, 0, 0].
DirectParams initial_observer(int N, const ObserverConfig& cfg);

// Observer inputs [b_t; y_t] as a 2 x T matrix.
Matrix observer_inputs(const Snapshots& data);

struct TrainedObserver {
  ExplicitModel model;
  train::FitState state;
  double rho_hat = 0.0;  // max one-step error over the held-out snapshots
};

TrainedObserver train_observer(const Snapshots& data, const ObserverConfig& cfg,
                               const train::EpochCallback& on_epoch = {});

// max over the held-out tail of |xi_next - f_o(xi, b, y)|.
double correctness_residual(const ExplicitModel& f_o, const Snapshots& data,
                            double holdout_fraction);

// Smallest alpha in (0, 1] for which the contraction LMI still holds with the
// model's (P, Lambda), found by bisection.
double certified_rate(const ExplicitModel& f_o, int steps = 50);

struct Evaluation {
  Matrix truth;      // (T+1) x N
  Matrix estimate;   // (T+1) x N
  Matrix free_run;   // (T+1) x N, plant copy started at the observer's initial state
  Vector error;      // |xhat_t - x_t|
  Vector free_error;
  double tail_error = 0.0;       // mean over the last quarter
  double tail_max_error = 0.0;
  double free_tail_error = 0.0;
  double rho = 0.0;
  double alpha = 0.0;  // per-step distance rate in the P metric
  double bound = 0.0;  // 2 rho / (1 - alpha) * sqrt(cond(P))
};

Evaluation evaluate_observer(const ExplicitModel& f_o, const PdeConfig& cfg, const Vector& x0_true,
                             const Vector& xhat0, int steps, double rho);

// Rows t,z,xi,xi_hat for t < T and every node.
void write_heatmap_csv(const std::string& path, const Evaluation& ev);

}  // namespace ren::observer
