#include "ren/lmi.hpp"

namespace ren {

Matrix wellposedness_matrix(const Matrix& D11, const Vector& lambda) {
  const Matrix LD = lambda.asDiagonal() * D11;
  Matrix W = -LD - LD.transpose();
  W.diagonal() += 2.0 * lambda;
  return W;
}

Matrix contraction_lmi_matrix(const ExplicitModel& m, const Matrix& P, const Vector& lambda,
                              double alpha) {
  const int n = m.dims.n, q = m.dims.q;
  Matrix M = Matrix::Zero(n + q, n + q);
  const Matrix LC1 = lambda.asDiagonal() * m.C1;
  M.topLeftCorner(n, n) = alpha * P;
  M.topRightCorner(n, q) = -LC1.transpose();
  M.bottomLeftCorner(q, n) = -LC1;
  M.bottomRightCorner(q, q) = wellposedness_matrix(m.D11, lambda);
  Matrix AB(n, n + q);
  AB << m.A, m.B1;
  M -= AB.transpose() * P * AB;
  return symmetrize(M);
}

Matrix iqc_lmi_matrix(const ExplicitModel& m, const IqcSpec& iqc, const Matrix& P,
                      const Vector& lambda) {
  const int n = m.dims.n, q = m.dims.q, u = m.dims.m, p = m.dims.p;
  const int k = n + q + u;
  const Matrix LC1 = lambda.asDiagonal() * m.C1;
  const Matrix LD12 = lambda.asDiagonal() * m.D12;
  Matrix M = Matrix::Zero(k, k);
  M.block(0, 0, n, n) = P;
  M.block(0, n, n, q) = -LC1.transpose();
  M.block(n, 0, q, n) = -LC1;
  M.block(n, n, q, q) = wellposedness_matrix(m.D11, lambda);
  M.block(0, n + q, n, u) = m.C2.transpose() * iqc.S.transpose();
  M.block(n + q, 0, u, n) = iqc.S * m.C2;
  M.block(n, n + q, q, u) = m.D21.transpose() * iqc.S.transpose() - LD12;
  M.block(n + q, n, u, q) = iqc.S * m.D21 - LD12.transpose();
  M.block(n + q, n + q, u, u) = iqc.R + iqc.S * m.D22 + m.D22.transpose() * iqc.S.transpose();
  Matrix ABB(n, k);
  ABB << m.A, m.B1, m.B2;
  Matrix CDD(p, k);
  CDD << m.C2, m.D21, m.D22;
  M -= ABB.transpose() * P * ABB;
  M += CDD.transpose() * iqc.Q * CDD;
  return symmetrize(M);
}

Matrix feedthrough_matrix(const Matrix& D22, const IqcSpec& iqc) {
  const Matrix SD = iqc.S * D22;
  return symmetrize(iqc.R + SD + SD.transpose() + D22.transpose() * iqc.Q * D22);
}

}  // namespace ren
