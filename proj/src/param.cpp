#include "ren/param.hpp"

#include "ren/errors.hpp"
#include "ren/lmi.hpp"

#include <algorithm>
#include <cmath>

namespace ren::param {

namespace {

constexpr double kRcondMin = 1e-13;

// Everything the forward construction computes, kept for the backward pass.
struct Forward {
  ImplicitForm imp;
  Eigen::PartialPivLU<Matrix> E_lu;

  // Feedthrough pieces (robust kinds).
  Matrix M, N;          // M = X3^T X3 + Y3 - Y3^T + eps I, N = (I + M)^{-1}
  Matrix LQ, LR;        // LQ^T LQ = -(Q - eps I), LR^T LR = R - S Qc^{-1} S^T
  Matrix K;             // D22^T Q + S
  Matrix Rcal, Rinv;
  Matrix V, U;          // H gains V Rinv V^T - U Q U^T
};

Matrix cayley_feedthrough(const DirectParams& t, const IqcSpec& iqc, Forward* fw) {
  const int p = t.dims.p, m = t.dims.m;
  const int s = std::max(p, m);
  Matrix M = t.X3.transpose() * t.X3 + t.Y3 - t.Y3.transpose();
  M.diagonal().array() += t.epsilon;
  const Matrix IpM = Matrix::Identity(s, s) + M;
  Matrix N = solve_checked(IpM, Matrix::Identity(s, s), "Cayley transform");
  Matrix D22;
  switch (iqc.kind) {
    case IqcKind::kInputPassive:
      D22 = iqc.parameter * Matrix::Identity(p, m) + M;
      break;
    case IqcKind::kOutputPassive:
      D22 = N / iqc.parameter;
      break;
    case IqcKind::kLipschitz:
    case IqcKind::kGeneral: {
      Matrix Qc = iqc.Q;
      Qc.diagonal().array() -= t.epsilon;
      const Matrix LQl = cholesky_lower(-Qc, "infeasible IQC spec (-(Q - eps I))");
      // (-Qc)^{-1} through its Cholesky factor.
      const Matrix negQc_inv = LQl.transpose().triangularView<Eigen::Upper>().solve(
          LQl.triangularView<Eigen::Lower>().solve(Matrix::Identity(p, p)));
      const Matrix St = iqc.S.transpose();
      const Matrix Rs = iqc.R + iqc.S * negQc_inv * St;  // R - S Qc^{-1} S^T
      Eigen::LLT<Matrix> rl(symmetrize(Rs));
      if (rl.info() != Eigen::Success) {
        throw InfeasibleError("infeasible IQC spec: R - S Qc^{-1} S^T is not positive definite");
      }
      const Matrix LRl = rl.matrixL();
      const Matrix Z = (2.0 * N - Matrix::Identity(s, s)).topLeftCorner(p, m);
      // D22 = -Qc^{-1} S^T + LQ^{-1} Z LR with LQ = LQl^T, LR = LRl^T.
      const Matrix LQinvZ = LQl.transpose().triangularView<Eigen::Upper>().solve(Z);
      D22 = negQc_inv * St + LQinvZ * LRl.transpose();
      if (fw) {
        fw->LQ = LQl.transpose();
        fw->LR = LRl.transpose();
      }
      break;
    }
  }
  if (fw) {
    fw->M = std::move(M);
    fw->N = std::move(N);
  }
  return D22;
}

void check_dims(const DirectParams& t, const std::optional<IqcSpec>& iqc) {
  t.validate();
  if (t.robust()) {
    if (!iqc) throw DimensionError("robust model kind needs an IQC spec");
    iqc->validate();
    if (iqc->outputs() != t.dims.p || iqc->inputs() != t.dims.m)
      throw DimensionError("IQC dimensions do not match (p, m)");
  }
}

Forward forward(const DirectParams& t, const std::optional<IqcSpec>& iqc) {
  check_dims(t, iqc);
  const int n = t.dims.n, q = t.dims.q, m = t.dims.m, p = t.dims.p;
  const int k = 2 * n + q;
  Forward fw;
  auto& imp = fw.imp;

  Matrix H = t.X.transpose() * t.X;
  H.diagonal().array() += t.epsilon;

  if (t.robust()) {
    imp.D22 = cayley_feedthrough(t, *iqc, &fw);
    const Matrix& Q = iqc->Q;
    fw.K = imp.D22.transpose() * Q + iqc->S;
    const Matrix C2cal = fw.K * t.C2;
    const Matrix D21cal = fw.K * t.D21 - t.D12til.transpose();
    fw.Rcal = feedthrough_matrix(imp.D22, *iqc);
    Eigen::LLT<Matrix> rl(fw.Rcal);
    if (rl.info() != Eigen::Success)
      throw InfeasibleError("infeasible IQC spec: feedthrough term is not positive definite");
    fw.Rinv = symmetrize(rl.solve(Matrix::Identity(m, m)));
    fw.V = Matrix::Zero(k, m);
    fw.V.topRows(n) = C2cal.transpose();
    fw.V.middleRows(n, q) = D21cal.transpose();
    fw.V.bottomRows(n) = t.B2til;
    fw.U = Matrix::Zero(k, p);
    fw.U.topRows(n) = t.C2.transpose();
    fw.U.middleRows(n, q) = t.D21.transpose();
    H += fw.V * fw.Rinv * fw.V.transpose() - fw.U * Q * fw.U.transpose();
  } else {
    imp.D22 = Matrix::Zero(p, m);
  }
  H = symmetrize(H);

  const Matrix H11 = H.block(0, 0, n, n);
  const Matrix H21 = H.block(n, 0, q, n);
  const Matrix H22 = H.block(n, n, q, q);
  imp.F = H.block(n + q, 0, n, n);
  imp.B1til = H.block(n + q, n, n, q);
  imp.Ptil = H.block(n + q, n + q, n, n);
  imp.C1til = -H21;
  imp.B2til = t.B2til;
  imp.D12til = t.D12til;
  imp.E = 0.5 * (H11 + imp.Ptil / t.alpha_bar + t.Y1 - t.Y1.transpose());

  if (t.acyclic()) {
    imp.Lambda = 0.5 * H22.diagonal();
    imp.D11til = Matrix::Zero(q, q);
    imp.D11til.triangularView<Eigen::StrictlyLower>() = -H22;
  } else {
    imp.Lambda = t.g.array().exp().matrix();
    imp.D11til = -0.5 * (H22 + t.Y2 - t.Y2.transpose());
    imp.D11til.diagonal() += imp.Lambda;
  }
  imp.H = std::move(H);

  if (n > 0) {
    fw.E_lu.compute(imp.E);
    if (!(fw.E_lu.rcond() > kRcondMin)) throw NumericalError("ill-conditioned construction: E");
  }
  if (q > 0 && !(imp.Lambda.minCoeff() > 0.0 && std::isfinite(imp.Lambda.maxCoeff())))
    throw NumericalError("ill-conditioned construction: Lambda");
  return fw;
}

ExplicitModel explicit_from(const DirectParams& t, const std::optional<IqcSpec>& iqc,
                            const Forward& fw) {
  const auto& imp = fw.imp;
  const auto& d = t.dims;
  ExplicitModel mdl = ExplicitModel::zeros(t.kind, d, t.activation);
  mdl.epsilon = t.epsilon;
  mdl.alpha_bar = t.alpha_bar;
  if (t.robust()) mdl.iqc = iqc;
  if (d.n > 0) {
    mdl.A = fw.E_lu.solve(imp.F);
    if (d.q > 0) mdl.B1 = fw.E_lu.solve(imp.B1til);
    if (d.m > 0) mdl.B2 = fw.E_lu.solve(imp.B2til);
  }
  const Vector inv_lambda = imp.Lambda.cwiseInverse();
  mdl.C1 = inv_lambda.asDiagonal() * imp.C1til;
  mdl.D11 = inv_lambda.asDiagonal() * imp.D11til;
  if (t.acyclic()) mdl.D11.triangularView<Eigen::Upper>().setZero();
  mdl.D12 = inv_lambda.asDiagonal() * imp.D12til;
  mdl.C2 = t.C2;
  mdl.D21 = t.D21;
  mdl.D22 = imp.D22;
  mdl.bx = t.bx;
  mdl.bv = t.bv;
  mdl.by = t.by;

  Certificate cert;
  if (d.n > 0) {
    const Matrix PtinvE = imp.Ptil.llt().solve(imp.E);
    cert.P = symmetrize(imp.E.transpose() * PtinvE);
  } else {
    cert.P = Matrix::Zero(0, 0);
  }
  cert.Lambda = imp.Lambda;
  cert.alpha = t.alpha_bar;
  cert.wellposed_min_eig = min_eigenvalue(wellposedness_matrix(mdl.D11, cert.Lambda));
  cert.lmi_min_eig = min_eigenvalue(contraction_lmi_matrix(mdl, cert.P, cert.Lambda, cert.alpha));
  if (!std::isfinite(cert.wellposed_min_eig)) cert.wellposed_min_eig = 0.0;
  if (!std::isfinite(cert.lmi_min_eig)) cert.lmi_min_eig = 0.0;
  mdl.certificate = std::move(cert);
  mdl.params = t;
  if (!mdl.A.allFinite() || !mdl.B1.allFinite() || !mdl.B2.allFinite() ||
      !mdl.C1.allFinite() || !mdl.D11.allFinite() || !mdl.D12.allFinite() ||
      !mdl.D22.allFinite()) {
    throw NumericalError("ill-conditioned construction: non-finite explicit weights");
  }
  return mdl;
}

// Cotangent of M = X3^T X3 + Y3 - Y3^T + eps I pushed to (X3, Y3).
void pull_back_m(const DirectParams& t, const Matrix& Mbar, DirectParams& out) {
  out.X3 += t.X3 * (Mbar + Mbar.transpose());
  out.Y3 += Mbar - Mbar.transpose();
}

void d22_vjp(const DirectParams& t, const IqcSpec& iqc, const Forward& fw, const Matrix& D22bar,
             DirectParams& out) {
  const int p = t.dims.p, m = t.dims.m;
  const int s = std::max(p, m);
  Matrix Mbar;
  switch (iqc.kind) {
    case IqcKind::kInputPassive:
      Mbar = D22bar;
      break;
    case IqcKind::kOutputPassive: {
      const Matrix Nbar = D22bar / iqc.parameter;
      Mbar = -fw.N.transpose() * Nbar * fw.N.transpose();
      break;
    }
    case IqcKind::kLipschitz:
    case IqcKind::kGeneral: {
      // D22 = const + LQ^{-1} Z LR
      const Matrix Zbar = fw.LQ.transpose().triangularView<Eigen::Lower>().solve(D22bar) *
                          fw.LR.transpose();
      Matrix Nbar = Matrix::Zero(s, s);
      Nbar.topLeftCorner(p, m) = 2.0 * Zbar;
      Mbar = -fw.N.transpose() * Nbar * fw.N.transpose();
      break;
    }
  }
  pull_back_m(t, Mbar, out);
}

}  // namespace

ImplicitForm build_implicit(const DirectParams& theta, const std::optional<IqcSpec>& iqc) {
  return forward(theta, iqc).imp;
}

ExplicitModel construct_contracting(const DirectParams& theta) {
  if (theta.robust()) throw DimensionError("construct_contracting needs a c-ren or c-aren kind");
  return explicit_from(theta, std::nullopt, forward(theta, std::nullopt));
}

Matrix construct_d22(const DirectParams& theta, const IqcSpec& iqc) {
  iqc.validate();
  const int s = std::max(theta.dims.p, theta.dims.m);
  if (theta.X3.rows() != s || theta.X3.cols() != s || theta.Y3.rows() != s ||
      theta.Y3.cols() != s) {
    throw DimensionError("X3/Y3 must be max(p,m) square");
  }
  if (iqc.outputs() != theta.dims.p || iqc.inputs() != theta.dims.m)
    throw DimensionError("IQC dimensions do not match (p, m)");
  return cayley_feedthrough(theta, iqc, nullptr);
}

ExplicitModel construct_robust(const DirectParams& theta, const IqcSpec& iqc) {
  if (!theta.robust()) throw DimensionError("construct_robust needs an r-ren or r-aren kind");
  return explicit_from(theta, iqc, forward(theta, iqc));
}

ExplicitModel construct(const DirectParams& theta, const std::optional<IqcSpec>& iqc) {
  if (theta.robust()) {
    if (!iqc) throw DimensionError("robust model kind needs an IQC spec");
    return construct_robust(theta, *iqc);
  }
  return construct_contracting(theta);
}

DirectParams construct_vjp(const DirectParams& t, const std::optional<IqcSpec>& iqc,
                           const ModelGradient& gb) {
  const Forward fw = forward(t, iqc);
  const auto& imp = fw.imp;
  const int n = t.dims.n, q = t.dims.q;
  const int k = 2 * n + q;
  DirectParams out = t.zeros_like();

  // Explicit-from-implicit: A = E^{-1} F etc., C1 = Lambda^{-1} C1til etc.
  Matrix Ebar = Matrix::Zero(n, n);
  Matrix Fbar = Matrix::Zero(n, n), B1tbar = Matrix::Zero(n, q);
  if (n > 0) {
    const Matrix A = fw.E_lu.solve(imp.F);
    const Matrix B1 = fw.E_lu.solve(imp.B1til);
    const Matrix B2 = fw.E_lu.solve(imp.B2til);
    // E^{-T} applied through the transpose of the LU factors.
    auto solve_T = [&](const Matrix& rhs) -> Matrix {
      return fw.E_lu.transpose().solve(rhs);
    };
    Fbar = solve_T(gb.A);
    B1tbar = solve_T(gb.B1);
    out.B2til += solve_T(gb.B2);
    Ebar = -(Fbar * A.transpose() + B1tbar * B1.transpose() +
             solve_T(gb.B2) * B2.transpose());
  }

  const Vector inv_l = imp.Lambda.cwiseInverse();
  Matrix D11bar = gb.D11;
  if (t.acyclic()) D11bar.triangularView<Eigen::Upper>().setZero();
  const Matrix C1 = inv_l.asDiagonal() * imp.C1til;
  const Matrix D11 = inv_l.asDiagonal() * imp.D11til;
  const Matrix D12 = inv_l.asDiagonal() * imp.D12til;
  const Matrix C1tbar = inv_l.asDiagonal() * gb.C1;
  const Matrix D11tbar = inv_l.asDiagonal() * D11bar;
  out.D12til += inv_l.asDiagonal() * gb.D12;
  Vector lbar = Vector::Zero(q);
  for (int i = 0; i < q; ++i) {
    const double acc = gb.C1.row(i).dot(C1.row(i)) + D11bar.row(i).dot(D11.row(i)) +
                       gb.D12.row(i).dot(D12.row(i));
    lbar(i) = -acc * inv_l(i);
  }

  Matrix Hbar = Matrix::Zero(k, k);
  if (t.acyclic()) {
    Matrix low = Matrix::Zero(q, q);
    low.triangularView<Eigen::StrictlyLower>() = D11tbar;
    Hbar.block(n, n, q, q) -= low;
    for (int i = 0; i < q; ++i) Hbar(n + i, n + i) += 0.5 * lbar(i);
  } else {
    lbar += D11tbar.diagonal();
    Hbar.block(n, n, q, q) -= 0.5 * D11tbar;
    out.Y2 += -0.5 * (D11tbar - D11tbar.transpose());
    out.g += lbar.cwiseProduct(imp.Lambda);
  }
  // E = (H11 + Ptil / alpha + Y1 - Y1^T) / 2
  Hbar.block(0, 0, n, n) += 0.5 * Ebar;
  Hbar.block(n + q, n + q, n, n) += Ebar / (2.0 * t.alpha_bar);
  out.Y1 += 0.5 * (Ebar - Ebar.transpose());
  Hbar.block(n + q, 0, n, n) += Fbar;
  Hbar.block(n + q, n, n, q) += B1tbar;
  Hbar.block(n, 0, q, n) -= C1tbar;

  // H = sym(H_raw)
  const Matrix Hs = symmetrize(Hbar);

  out.C2 += gb.C2;
  out.D21 += gb.D21;
  out.bx += gb.bx;
  out.bv += gb.bv;
  out.by += gb.by;

  if (t.robust()) {
    const Matrix& Q = iqc->Q;
    const Matrix& S = iqc->S;
    // H_raw += V Rinv V^T - U Q U^T
    const Matrix Vbar = 2.0 * Hs * fw.V * fw.Rinv;
    const Matrix Rinvbar = fw.V.transpose() * Hs * fw.V;
    const Matrix Rcalbar = -fw.Rinv * Rinvbar * fw.Rinv;
    const Matrix Ubar = -2.0 * Hs * fw.U * Q;
    const Matrix C2calbar = Vbar.topRows(n).transpose();
    const Matrix D21calbar = Vbar.middleRows(n, q).transpose();
    out.B2til += Vbar.bottomRows(n);
    out.C2 += Ubar.topRows(n).transpose();
    out.D21 += Ubar.middleRows(n, q).transpose();
    // C2cal = K C2, D21cal = K D21 - D12til^T
    out.C2 += fw.K.transpose() * C2calbar;
    out.D21 += fw.K.transpose() * D21calbar;
    out.D12til -= D21calbar.transpose();
    const Matrix Kbar = C2calbar * t.C2.transpose() + D21calbar * t.D21.transpose();
    // K = D22^T Q + S; Rcal = R + S D22 + D22^T S^T + D22^T Q D22
    Matrix D22bar = gb.D22 + Q * Kbar.transpose();
    D22bar += S.transpose() * (Rcalbar + Rcalbar.transpose()) +
              Q * imp.D22 * (Rcalbar + Rcalbar.transpose());
    d22_vjp(t, *iqc, fw, D22bar, out);
  }
  out.X += 2.0 * t.X * Hs;
  return out;
}

DirectParams sample_params(ModelKind kind, Dims dims, std::mt19937_64& rng,
                           const InitOptions& opts) {
  DirectParams t = DirectParams::zeros(kind, dims);
  t.activation = opts.activation;
  t.epsilon = opts.epsilon;
  t.alpha_bar = opts.alpha_bar;
  const int k = 2 * dims.n + dims.q;
  const double sd = k > 0 ? opts.scale / std::sqrt(static_cast<double>(k)) : 0.0;
  std::normal_distribution<double> nd(0.0, 1.0);
  t.for_each_block([&](std::string_view, double* d, Eigen::Index len) {
    for (Eigen::Index i = 0; i < len; ++i) d[i] = sd * nd(rng);
  });
  return t;
}

ExplicitModel embed_feedforward(const std::vector<Layer>& layers, Activation act) {
  if (layers.empty()) throw DimensionError("feedforward network needs at least one layer");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].bias.size() != layers[l].weight.rows())
      throw DimensionError("layer " + std::to_string(l) + " bias/weight mismatch");
    if (l > 0 && layers[l].weight.cols() != layers[l - 1].weight.rows())
      throw DimensionError("layer " + std::to_string(l) + " input width mismatch");
  }
  const std::size_t L = layers.size() - 1;
  Dims d;
  d.n = 0;
  d.m = static_cast<int>(layers.front().weight.cols());
  d.p = static_cast<int>(layers.back().weight.rows());
  d.q = 0;
  for (std::size_t l = 0; l < L; ++l) d.q += static_cast<int>(layers[l].weight.rows());
  ExplicitModel mdl = ExplicitModel::zeros(ModelKind::kCAren, d, act);
  if (L == 0) {
    mdl.D22 = layers[0].weight;
    mdl.by = layers[0].bias;
    return mdl;
  }
  int row = 0;
  int prev_row = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& lay = layers[l];
    const int h = static_cast<int>(lay.weight.rows());
    if (l == 0) {
      mdl.D12.middleRows(0, h) = lay.weight;
    } else {
      mdl.D11.block(row, prev_row, h, lay.weight.cols()) = lay.weight;
    }
    mdl.bv.segment(row, h) = lay.bias;
    prev_row = row;
    row += h;
  }
  mdl.D21.rightCols(layers.back().weight.cols()) = layers.back().weight;
  mdl.by = layers.back().bias;
  return mdl;
}

ExplicitModel embed_fir(int memory, int m, const std::vector<Layer>& readout, Activation act) {
  if (memory < 1) throw DimensionError("FIR memory must be >= 1");
  if (readout.empty() || readout.front().weight.cols() != memory * m)
    throw DimensionError("FIR readout input width must be memory * m");
  const ExplicitModel net = embed_feedforward(readout, act);
  Dims d = net.dims;
  d.n = memory * m;
  d.m = m;
  ExplicitModel mdl = ExplicitModel::zeros(ModelKind::kCAren, d, act);
  for (int k = 1; k < memory; ++k)
    mdl.A.block(k * m, (k - 1) * m, m, m) = Matrix::Identity(m, m);
  mdl.B2.topRows(m) = Matrix::Identity(m, m);
  // The network reads the stored history (the state) instead of u.
  mdl.C1 = net.D12;
  mdl.D11 = net.D11;
  mdl.bv = net.bv;
  mdl.C2 = net.D22;
  mdl.D21 = net.D21;
  mdl.by = net.by;
  return mdl;
}

}  // namespace ren::param
