#pragma once

#include "ren/types.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace ren::youla {

// Spectral radii within this distance of 1 count as marginally stable: a
// double root on the unit circle is only resolved to about sqrt(machine eps).
inline constexpr double kMarginalRadius = 1e-6;

// x+ = A x + B1 w + B2 u,  zeta = C1 x + D11 w + D12 u,  y = C2 x + D21 w,
// with observer gain L and state feedback K.
struct LinearPlant {
  Matrix A, B1, B2, C1, D11, D12, C2, D21, K, L;

  int states() const { return static_cast<int>(A.rows()); }
  int disturbances() const { return static_cast<int>(B1.cols()); }
  int controls() const { return static_cast<int>(B2.cols()); }
  int performance() const { return static_cast<int>(C1.rows()); }
  int measurements() const { return static_cast<int>(C2.rows()); }
  // Shapes, and Schur stability of A - L C2 and A - B2 K.
  void validate() const;
};

// P_zw = P_zv = -P_yw = 1 / (z^2 + 2 rho cos(phi) z + c0) in controllable
// canonical form, K = L = 0. c0 defaults to phi^2. Rejects plants whose
// poles are not strictly inside the unit circle.
LinearPlant plant_from_tf(double rho, double phi, std::optional<double> c0 = {});

// Closed-loop signals of the observer-based controller, one row per step.
struct ClosedLoop {
  Matrix zeta;    // T x nz
  Matrix u;       // T x nu
  Matrix ytilde;  // T x ny
  Matrix v;       // T x nu
};

// Linear closed loop with an exogenous augmentation v (T x nu).
ClosedLoop linear_response(const LinearPlant& plant, const Matrix& w, const Matrix& v);

// Closed loop with v = Q(ytilde); Q has inputs ny and outputs nu.
ClosedLoop closed_loop_rollout(const LinearPlant& plant, const ExplicitModel& Q, const Matrix& w,
                               const Vector& q0);
ClosedLoop closed_loop_rollout(const LinearPlant& plant, const ExplicitModel& Q, const Matrix& w);

// Q with fixed dynamics and a readout linear in theta. Basis outputs are the
// coordinates of [x; w; ytilde] (plus a constant when `bias`).
struct QBasis {
  ExplicitModel dynamics;  // output map ignored
  bool bias = true;

  int size() const;
  // T x size() feature rows for input ytilde (T x ny).
  Matrix features(const Matrix& ytilde, const Vector& q0) const;
  Matrix features(const Matrix& ytilde) const;
  // Q whose output is features * theta, theta is size() x nu.
  ExplicitModel with_readout(const Matrix& theta) const;
};

// Echo-state C-aREN: X entries ~ N(0, 4/(2n+q)), remaining free parameters
// Glorot normal.
QBasis sample_q_echo(int n, int q, std::uint64_t seed, int ny = 1,
                     Activation act = Activation::kRelu);

// Linear Q: A_q = (1 - lambda) Abar / rho(Abar), B_q Glorot normal.
QBasis sample_q_linear(int n, double lambda, std::uint64_t seed, int ny = 1);

// Stacked affine maps zeta(theta) = Z0 + GZ theta and u(theta) = U0 + GU theta
// over every disturbance sequence and time step (nu = 1 readouts).
struct AffineResponse {
  Vector Z0, U0;
  Matrix GZ, GU;
};

AffineResponse build_affine(const LinearPlant& plant, const QBasis& basis,
                            const std::vector<Matrix>& disturbances);

struct PolicyOptions {
  double umax = 5.0;  // infinity disables the control bound
  double reg = 1e-6;  // ridge weight on theta
  double rel_tol = 1e-8;
  double abs_tol = 1e-9;
  int max_newton = 200;
};

struct PolicyResult {
  Vector theta;
  double l1_cost = 0.0;    // sum |zeta|
  double objective = 0.0;  // l1_cost + reg |theta|^2
  double max_abs_u = 0.0;
  int newton_steps = 0;
};

// min sum|zeta| + reg |theta|^2 s.t. |u| <= umax, by a log-barrier method on
// the epigraph form with the slacks minimized in closed form.
PolicyResult optimize_policy(const AffineResponse& affine, const PolicyOptions& opts = {});

// Piecewise-constant signal, values uniform in [-magnitude, magnitude].
Matrix piecewise_constant(int length, int hold, double magnitude, std::mt19937_64& rng);

struct YoulaConfig {
  double rho = 0.8;
  double phi = 0.2 * 3.14159265358979323846;
  std::optional<double> c0;
  int n = 20;
  int q = 60;
  Activation activation = Activation::kRelu;
  double lambda = 0.05;
  int sequences = 20;
  int length = 500;
  int hold = 50;
  double magnitude = 10.0;
  PolicyOptions policy;
  std::uint64_t seed = 0;
};

struct YoulaRun {
  LinearPlant plant;
  QBasis nonlinear, linear;
  std::vector<Matrix> disturbances;
  PolicyResult nonlinear_policy, linear_policy;
  double open_loop_cost = 0.0;
};

YoulaRun run_experiment(const YoulaConfig& cfg);

// max |zeta^a - zeta^b| over the last quarter of a rollout where the two
// closed loops differ only in the initial Q state.
double pair_convergence_gap(const LinearPlant& plant, const ExplicitModel& Q, const Matrix& w,
                            std::uint64_t seed);

// Columns t,w,zeta,u per policy, for step-response plots.
void write_traces_csv(const std::string& path, const Matrix& w,
                      const std::vector<std::pair<std::string, ClosedLoop>>& runs);

}  // namespace ren::youla
