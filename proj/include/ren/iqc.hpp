#pragma once

#include "ren/linalg.hpp"

#include <string>

namespace ren {

enum class IqcKind { kLipschitz, kInputPassive, kOutputPassive, kGeneral };

// Incremental quadratic constraint (Q, S, R) on output/input differences:
//   sum_t [dy; du]^T [[Q, S^T], [S, R]] [dy; du] >= -d(a, b).
struct IqcSpec {
  IqcKind kind = IqcKind::kGeneral;
  double parameter = 0.0;  // gamma, nu or rho for the named kinds
  Matrix Q;                // p x p, symmetric negative semidefinite
  Matrix S;                // m x p
  Matrix R;                // m x m, symmetric

  // Lipschitz bound gamma: Q = -I/gamma, S = 0, R = gamma I.
  static IqcSpec lipschitz(double gamma, int p, int m);
  // Incremental input passivity: Q = 0, S = I, R = -2 nu I (needs p == m).
  static IqcSpec input_passive(double nu, int p);
  // Incremental strict output passivity: Q = -2 rho I, S = I, R = 0.
  static IqcSpec output_passive(double rho, int p);
  static IqcSpec general(Matrix Q, Matrix S, Matrix R);

  int outputs() const { return static_cast<int>(Q.rows()); }
  int inputs() const { return static_cast<int>(R.rows()); }

  // Throws DimensionError/InfeasibleError on shape or sign violations.
  void validate() const;
};

std::string to_string(IqcKind k);
IqcKind iqc_kind_from_string(const std::string& s);

}  // namespace ren
