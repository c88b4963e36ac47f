#pragma once

#include "ren/model.hpp"
#include "ren/param.hpp"

#include <cstdint>

namespace ren::echo_state {

struct SampleOptions {
  ModelKind kind = ModelKind::kCAren;
  Activation activation = Activation::kRelu;
  double alpha_bar = 1.0;
  double epsilon = 1e-3;
};

// Random contracting dynamics; the output map (C2, D21, D22, by) is zero.
ExplicitModel sample_contracting(Dims dims, std::uint64_t seed, double scale = 1.0,
                                 const SampleOptions& opts = {});

// Features [x_t; w_t; u_t; 1] of a rollout, one row per time step.
Matrix readout_features(const ExplicitModel& model, const Matrix& u, const Vector& x0);

// Least-squares fit of (C2, D21, D22, by), minimal-norm on rank deficiency.
// ridge > 0 adds ridge * |theta|^2. Dynamics blocks are left untouched.
ExplicitModel fit_readout(const ExplicitModel& model, const SequenceBatch& data,
                          double ridge = 0.0);

}  // namespace ren::echo_state
