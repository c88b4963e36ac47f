#include "ren/iqc.hpp"

#include "ren/errors.hpp"

namespace ren {

IqcSpec IqcSpec::lipschitz(double gamma, int p, int m) {
  if (!(gamma > 0.0)) throw InfeasibleError("lipschitz bound must be positive");
  IqcSpec s;
  s.kind = IqcKind::kLipschitz;
  s.parameter = gamma;
  s.Q = -Matrix::Identity(p, p) / gamma;
  s.S = Matrix::Zero(m, p);
  s.R = gamma * Matrix::Identity(m, m);
  return s;
}

IqcSpec IqcSpec::input_passive(double nu, int p) {
  if (!(nu >= 0.0)) throw InfeasibleError("input passivity index must be >= 0");
  IqcSpec s;
  s.kind = IqcKind::kInputPassive;
  s.parameter = nu;
  s.Q = Matrix::Zero(p, p);
  s.S = Matrix::Identity(p, p);
  s.R = -2.0 * nu * Matrix::Identity(p, p);
  return s;
}

IqcSpec IqcSpec::output_passive(double rho, int p) {
  if (!(rho > 0.0)) throw InfeasibleError("output passivity index must be > 0");
  IqcSpec s;
  s.kind = IqcKind::kOutputPassive;
  s.parameter = rho;
  s.Q = -2.0 * rho * Matrix::Identity(p, p);
  s.S = Matrix::Identity(p, p);
  s.R = Matrix::Zero(p, p);
  return s;
}

IqcSpec IqcSpec::general(Matrix Q, Matrix S, Matrix R) {
  IqcSpec s;
  s.kind = IqcKind::kGeneral;
  s.Q = std::move(Q);
  s.S = std::move(S);
  s.R = std::move(R);
  s.validate();
  return s;
}

void IqcSpec::validate() const {
  if (Q.rows() != Q.cols() || R.rows() != R.cols() || S.rows() != R.rows() ||
      S.cols() != Q.rows()) {
    throw DimensionError("IQC (Q,S,R) shapes are inconsistent");
  }
  if (!Q.allFinite() || !S.allFinite() || !R.allFinite())
    throw InfeasibleError("IQC (Q,S,R) has non-finite entries");
  const double tol = 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff() + R.cwiseAbs().maxCoeff());
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > tol)
    throw InfeasibleError("IQC Q must be symmetric");
  if ((R - R.transpose()).cwiseAbs().maxCoeff() > tol)
    throw InfeasibleError("IQC R must be symmetric");
  if (Q.size() > 0 && min_eigenvalue(-Q) < -tol)
    throw InfeasibleError("IQC Q must be negative semidefinite");
  if ((kind == IqcKind::kInputPassive || kind == IqcKind::kOutputPassive) &&
      Q.rows() != R.rows()) {
    throw DimensionError("passivity IQC needs equal input and output dimension");
  }
}

std::string to_string(IqcKind k) {
  switch (k) {
    case IqcKind::kLipschitz: return "lipschitz";
    case IqcKind::kInputPassive: return "input_passive";
    case IqcKind::kOutputPassive: return "output_passive";
    case IqcKind::kGeneral: return "general";
  }
  return "general";
}

IqcKind iqc_kind_from_string(const std::string& s) {
  if (s == "lipschitz") return IqcKind::kLipschitz;
  if (s == "input_passive") return IqcKind::kInputPassive;
  if (s == "output_passive") return IqcKind::kOutputPassive;
  if (s == "general") return IqcKind::kGeneral;
  throw IoError("unknown IQC kind '" + s + "'");
}

}  // namespace ren
