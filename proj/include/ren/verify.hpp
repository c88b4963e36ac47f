#pragma once

#include "ren/model.hpp"
#include "ren/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ren::verify {

inline constexpr double kLmiTolerance = 1e-9;

struct CheckResult {
  std::string name;
  bool pass = false;
  // Minimum eigenvalue when it was computed; otherwise the tolerance the
  // shifted Cholesky factorization certified.
  double margin = 0.0;
};

struct LmiOptions {
  double tolerance = kLmiTolerance;
  // Report the exact minimum eigenvalue. When false a passing check only
  // runs a shifted Cholesky factorization and reports the tolerance.
  bool exact_margin = true;
};

// Well-posedness and the contraction LMI at rate cert.alpha. Uses the
// model's certificate unless one is supplied.
std::vector<CheckResult> check_contraction_lmi(const ExplicitModel& model,
                                               const std::optional<Certificate>& cert = {},
                                               const LmiOptions& opts = {});

// R + S D22 + D22^T S^T + D22^T Q D22 > 0 and the incremental IQC block matrix.
std::vector<CheckResult> check_iqc_lmi(const ExplicitModel& model, const IqcSpec& iqc,
                                       const std::optional<Certificate>& cert = {},
                                       const LmiOptions& opts = {});

bool all_pass(const std::vector<CheckResult>& checks);

// Certificate for Lipschitz bound gamma on a model without neurons (q = 0),
// from the bounded-real Riccati equation. Empty when gamma is not above the
// H-infinity norm (the iteration diverges).
std::optional<Certificate> lti_lipschitz_certificate(const ExplicitModel& model, double gamma);

// H-infinity norm of a q = 0 model by sweeping the unit circle.
double lti_hinf_norm(const ExplicitModel& model, int grid = 4096);

// Smallest gamma (by bisection) for which check_iqc_lmi passes with the
// certificate (c P, c Lambda) for some c on a log grid, to relative
// precision 1e-6. Infinity if none.
double lipschitz_upper_bound(const ExplicitModel& model, double gamma_max = 1e6,
                             int bisection_steps = 60);

struct LipschitzOptions {
  int horizon = 100;
  int restarts = 10;
  int steps = 200;
  double learning_rate = 1e-2;
  double perturbation = 1e-2;
  std::uint64_t seed = 0;
  SolverOptions solver;
};

// Gradient ascent on |R_a(u) - R_a(v)| / |u - v| over (u, v, a).
double estimate_lipschitz_lower(const ExplicitModel& model, const LipschitzOptions& opts = {});

// Per-step decay rate of the squared state gap |x^a_t - x^b_t|^2, from a
// log-linear fit per random trajectory pair; the maximum over trials.
double empirical_contraction_rate(const ExplicitModel& model, int trials = 20, int horizon = 100,
                                  std::uint64_t seed = 0);

struct Report {
  std::vector<CheckResult> checks;
  std::optional<double> gamma_lower;
  std::optional<double> alpha_hat;
  bool pass() const { return all_pass(checks); }
};

nlohmann::json report_to_json(const Report& r);

}  // namespace ren::verify
