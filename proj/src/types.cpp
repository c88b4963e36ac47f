#include "ren/types.hpp"

#include "ren/errors.hpp"

#include <algorithm>
#include <cstring>

namespace ren {

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kCRen: return "c-ren";
    case ModelKind::kCAren: return "c-aren";
    case ModelKind::kRRen: return "r-ren";
    case ModelKind::kRAren: return "r-aren";
  }
  return "c-aren";
}

ModelKind model_kind_from_string(std::string_view s) {
  if (s == "c-ren") return ModelKind::kCRen;
  if (s == "c-aren") return ModelKind::kCAren;
  if (s == "r-ren") return ModelKind::kRRen;
  if (s == "r-aren") return ModelKind::kRAren;
  throw IoError("unknown model kind '" + std::string(s) + "'");
}

DirectParams DirectParams::zeros(ModelKind kind, Dims d) {
  if (d.n < 0 || d.m < 0 || d.p < 0 || d.q < 0) throw DimensionError("negative dimension");
  DirectParams t;
  t.kind = kind;
  t.dims = d;
  const int k = 2 * d.n + d.q;
  t.X = Matrix::Zero(k, k);
  t.Y1 = Matrix::Zero(d.n, d.n);
  if (!is_acyclic(kind)) {
    t.g = Vector::Zero(d.q);
    t.Y2 = Matrix::Zero(d.q, d.q);
  }
  if (is_robust(kind)) {
    const int s = std::max(d.p, d.m);
    t.X3 = Matrix::Zero(s, s);
    t.Y3 = Matrix::Zero(s, s);
  }
  t.B2til = Matrix::Zero(d.n, d.m);
  t.C2 = Matrix::Zero(d.p, d.n);
  t.D12til = Matrix::Zero(d.q, d.m);
  t.D21 = Matrix::Zero(d.p, d.q);
  t.bx = Vector::Zero(d.n);
  t.bv = Vector::Zero(d.q);
  t.by = Vector::Zero(d.p);
  return t;
}

void DirectParams::for_each_block(
    const std::function<void(std::string_view, double*, Eigen::Index)>& f) {
  f("X", X.data(), X.size());
  f("Y1", Y1.data(), Y1.size());
  if (!acyclic()) {
    f("g", g.data(), g.size());
    f("Y2", Y2.data(), Y2.size());
  }
  if (robust()) {
    f("X3", X3.data(), X3.size());
    f("Y3", Y3.data(), Y3.size());
  }
  f("B2til", B2til.data(), B2til.size());
  f("C2", C2.data(), C2.size());
  f("D12til", D12til.data(), D12til.size());
  f("D21", D21.data(), D21.size());
  f("bx", bx.data(), bx.size());
  f("bv", bv.data(), bv.size());
  f("by", by.data(), by.size());
}

void DirectParams::for_each_block(
    const std::function<void(std::string_view, const double*, Eigen::Index)>& f) const {
  const_cast<DirectParams*>(this)->for_each_block(
      [&](std::string_view name, double* data, Eigen::Index n) { f(name, data, n); });
}

Eigen::Index DirectParams::size() const {
  Eigen::Index total = 0;
  for_each_block([&](std::string_view, const double*, Eigen::Index n) { total += n; });
  return total;
}

Vector DirectParams::flatten() const {
  Vector out(size());
  Eigen::Index off = 0;
  for_each_block([&](std::string_view, const double* d, Eigen::Index n) {
    std::copy(d, d + n, out.data() + off);
    off += n;
  });
  return out;
}

void DirectParams::unflatten(const Vector& flat) {
  if (flat.size() != size()) throw DimensionError("flat parameter vector has wrong length");
  Eigen::Index off = 0;
  for_each_block([&](std::string_view, double* d, Eigen::Index n) {
    std::copy(flat.data() + off, flat.data() + off + n, d);
    off += n;
  });
}

DirectParams DirectParams::zeros_like() const {
  DirectParams z = zeros(kind, dims);
  z.activation = activation;
  z.epsilon = epsilon;
  z.alpha_bar = alpha_bar;
  return z;
}

namespace {

void expect_shape(const Matrix& m, Eigen::Index r, Eigen::Index c, const char* name) {
  if (m.rows() != r || m.cols() != c) {
    throw DimensionError(std::string(name) + " has shape " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", expected " + std::to_string(r) + "x" +
                         std::to_string(c));
  }
}

}  // namespace

void DirectParams::validate() const {
  const auto& d = dims;
  if (d.n < 0 || d.m < 0 || d.p < 0 || d.q < 0) throw DimensionError("negative dimension");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw DimensionError("epsilon must be > 0");
  if (!(alpha_bar > 0.0 && alpha_bar <= 1.0))
    throw DimensionError("alpha_bar must lie in (0, 1]");
  const int k = 2 * d.n + d.q;
  expect_shape(X, k, k, "X");
  expect_shape(Y1, d.n, d.n, "Y1");
  if (!acyclic()) {
    expect_shape(g, d.q, 1, "g");
    expect_shape(Y2, d.q, d.q, "Y2");
  }
  if (robust()) {
    const int s = std::max(d.p, d.m);
    expect_shape(X3, s, s, "X3");
    expect_shape(Y3, s, s, "Y3");
  }
  expect_shape(B2til, d.n, d.m, "B2til");
  expect_shape(C2, d.p, d.n, "C2");
  expect_shape(D12til, d.q, d.m, "D12til");
  expect_shape(D21, d.p, d.q, "D21");
  expect_shape(bx, d.n, 1, "bx");
  expect_shape(bv, d.q, 1, "bv");
  expect_shape(by, d.p, 1, "by");
  bool finite = true;
  for_each_block([&](std::string_view, const double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) finite = finite && std::isfinite(p[i]);
  });
  if (!finite) throw NumericalError("direct parameters contain non-finite entries");
}

ExplicitModel ExplicitModel::zeros(ModelKind kind, Dims d, Activation act) {
  ExplicitModel m;
  m.kind = kind;
  m.dims = d;
  m.activation = act;
  m.A = Matrix::Zero(d.n, d.n);
  m.B1 = Matrix::Zero(d.n, d.q);
  m.B2 = Matrix::Zero(d.n, d.m);
  m.C1 = Matrix::Zero(d.q, d.n);
  m.D11 = Matrix::Zero(d.q, d.q);
  m.D12 = Matrix::Zero(d.q, d.m);
  m.C2 = Matrix::Zero(d.p, d.n);
  m.D21 = Matrix::Zero(d.p, d.q);
  m.D22 = Matrix::Zero(d.p, d.m);
  m.bx = Vector::Zero(d.n);
  m.bv = Vector::Zero(d.q);
  m.by = Vector::Zero(d.p);
  return m;
}

void ExplicitModel::validate() const {
  const auto& d = dims;
  expect_shape(A, d.n, d.n, "A");
  expect_shape(B1, d.n, d.q, "B1");
  expect_shape(B2, d.n, d.m, "B2");
  expect_shape(C1, d.q, d.n, "C1");
  expect_shape(D11, d.q, d.q, "D11");
  expect_shape(D12, d.q, d.m, "D12");
  expect_shape(C2, d.p, d.n, "C2");
  expect_shape(D21, d.p, d.q, "D21");
  expect_shape(D22, d.p, d.m, "D22");
  expect_shape(bx, d.n, 1, "bx");
  expect_shape(bv, d.q, 1, "bv");
  expect_shape(by, d.p, 1, "by");
  if (certificate) {
    expect_shape(certificate->P, d.n, d.n, "P");
    expect_shape(certificate->Lambda, d.q, 1, "Lambda");
  }
  if (iqc) {
    if (iqc->outputs() != d.p || iqc->inputs() != d.m)
      throw DimensionError("IQC dimensions do not match model (p, m)");
  }
  if (is_acyclic(kind)) {
    for (int i = 0; i < d.q; ++i)
      for (int j = i; j < d.q; ++j)
        if (D11(i, j) != 0.0) throw DimensionError("acyclic model has D11 not strictly lower");
  }
}

ModelGradient ModelGradient::zeros(Dims d) {
  ModelGradient g;
  g.A = Matrix::Zero(d.n, d.n);
  g.B1 = Matrix::Zero(d.n, d.q);
  g.B2 = Matrix::Zero(d.n, d.m);
  g.C1 = Matrix::Zero(d.q, d.n);
  g.D11 = Matrix::Zero(d.q, d.q);
  g.D12 = Matrix::Zero(d.q, d.m);
  g.C2 = Matrix::Zero(d.p, d.n);
  g.D21 = Matrix::Zero(d.p, d.q);
  g.D22 = Matrix::Zero(d.p, d.m);
  g.bx = Vector::Zero(d.n);
  g.bv = Vector::Zero(d.q);
  g.by = Vector::Zero(d.p);
  return g;
}

ModelGradient& ModelGradient::operator+=(const ModelGradient& o) {
  A += o.A; B1 += o.B1; B2 += o.B2;
  C1 += o.C1; D11 += o.D11; D12 += o.D12;
  C2 += o.C2; D21 += o.D21; D22 += o.D22;
  bx += o.bx; bv += o.bv; by += o.by;
  return *this;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return a.size() == 0 ||
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<size_t>(a.size())) == 0;
}

bool bit_equal(const DirectParams& a, const DirectParams& b) {
  if (a.kind != b.kind || !(a.dims == b.dims) || a.activation != b.activation ||
      !bit_equal(Matrix::Constant(1, 1, a.epsilon), Matrix::Constant(1, 1, b.epsilon)) ||
      !bit_equal(Matrix::Constant(1, 1, a.alpha_bar), Matrix::Constant(1, 1, b.alpha_bar))) {
    return false;
  }
  return bit_equal(Matrix(a.flatten()), Matrix(b.flatten()));
}

namespace {

bool bit_equal_iqc(const IqcSpec& a, const IqcSpec& b) {
  return a.kind == b.kind &&
         bit_equal(Matrix::Constant(1, 1, a.parameter), Matrix::Constant(1, 1, b.parameter)) &&
         bit_equal(a.Q, b.Q) && bit_equal(a.S, b.S) && bit_equal(a.R, b.R);
}

}  // namespace

bool bit_equal(const ExplicitModel& a, const ExplicitModel& b) {
  auto scalar_eq = [](double x, double y) {
    return bit_equal(Matrix::Constant(1, 1, x), Matrix::Constant(1, 1, y));
  };
  if (a.kind != b.kind || !(a.dims == b.dims) || a.activation != b.activation ||
      !scalar_eq(a.epsilon, b.epsilon) || !scalar_eq(a.alpha_bar, b.alpha_bar)) {
    return false;
  }
  if (a.iqc.has_value() != b.iqc.has_value()) return false;
  if (a.iqc && !bit_equal_iqc(*a.iqc, *b.iqc)) return false;
  const bool weights = bit_equal(a.A, b.A) && bit_equal(a.B1, b.B1) && bit_equal(a.B2, b.B2) &&
                       bit_equal(a.C1, b.C1) && bit_equal(a.D11, b.D11) &&
                       bit_equal(a.D12, b.D12) && bit_equal(a.C2, b.C2) &&
                       bit_equal(a.D21, b.D21) && bit_equal(a.D22, b.D22) &&
                       bit_equal(a.bx, b.bx) && bit_equal(a.bv, b.bv) && bit_equal(a.by, b.by);
  if (!weights) return false;
  if (a.certificate.has_value() != b.certificate.has_value()) return false;
  if (a.certificate) {
    const auto& ca = *a.certificate;
    const auto& cb = *b.certificate;
    if (!bit_equal(ca.P, cb.P) || !bit_equal(ca.Lambda, cb.Lambda) ||
        !scalar_eq(ca.alpha, cb.alpha) || !scalar_eq(ca.lmi_min_eig, cb.lmi_min_eig) ||
        !scalar_eq(ca.wellposed_min_eig, cb.wellposed_min_eig)) {
      return false;
    }
  }
  if (a.params.has_value() != b.params.has_value()) return false;
  return !a.params || bit_equal(*a.params, *b.params);
}

}  // namespace ren
