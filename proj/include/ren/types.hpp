#pragma once

#include "ren/activation.hpp"
#include "ren/iqc.hpp"
#include "ren/linalg.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace ren {

// n states, m inputs, p outputs, q neurons.
struct Dims {
  int n = 0;
  int m = 0;
  int p = 0;
  int q = 0;
  bool operator==(const Dims&) const = default;
};

// c-ren / r-ren have a full D11; the "a" variants are acyclic (strictly
// lower-triangular D11). r-* variants carry an IQC.
enum class ModelKind { kCRen, kCAren, kRRen, kRAren };

inline bool is_acyclic(ModelKind k) { return k == ModelKind::kCAren || k == ModelKind::kRAren; }
inline bool is_robust(ModelKind k) { return k == ModelKind::kRRen || k == ModelKind::kRAren; }

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(std::string_view s);

// Unconstrained parameter vector. Every finite value maps to a well-posed,
// contracting (and for robust kinds, IQC-satisfying) model.
struct DirectParams {
  ModelKind kind = ModelKind::kCAren;
  Dims dims;
  Activation activation = Activation::kRelu;
  double epsilon = 1e-3;
  double alpha_bar = 1.0;

  Matrix X;       // (2n+q) x (2n+q)
  Matrix Y1;      // n x n
  Vector g;       // q, full D11 only
  Matrix Y2;      // q x q, full D11 only
  Matrix X3, Y3;  // s x s with s = max(p, m), robust only
  Matrix B2til;   // n x m
  Matrix C2;      // p x n
  Matrix D12til;  // q x m
  Matrix D21;     // p x q
  Vector bx, bv, by;

  bool acyclic() const { return is_acyclic(kind); }
  bool robust() const { return is_robust(kind); }

  // Zero-valued parameters with the right shapes for `kind` and `dims`.
  static DirectParams zeros(ModelKind kind, Dims dims);

  // Visits every trainable block in a fixed order as (name, data, size).
  void for_each_block(const std::function<void(std::string_view, double*, Eigen::Index)>& f);
  void for_each_block(
      const std::function<void(std::string_view, const double*, Eigen::Index)>& f) const;

  Eigen::Index size() const;
  Vector flatten() const;
  void unflatten(const Vector& flat);
  DirectParams zeros_like() const;

  // Shapes, finiteness, epsilon > 0 and alpha_bar in (0, 1].
  void validate() const;
};

// Stability certificate: P > 0 and positive diagonal Lambda.
struct Certificate {
  Matrix P;
  Vector Lambda;
  double alpha = 1.0;
  double lmi_min_eig = 0.0;
  double wellposed_min_eig = 0.0;
};

// Explicit REN:
//   x+ = A x + B1 w + B2 u + bx
//   v  = C1 x + D11 w + D12 u + bv,   w = sigma(v)
//   y  = C2 x + D21 w + D22 u + by
struct ExplicitModel {
  ModelKind kind = ModelKind::kCAren;
  Dims dims;
  Activation activation = Activation::kRelu;
  double epsilon = 1e-3;
  double alpha_bar = 1.0;
  std::optional<IqcSpec> iqc;

  Matrix A, B1, B2, C1, D11, D12, C2, D21, D22;
  Vector bx, bv, by;

  std::optional<Certificate> certificate;
  // Parameters the model was built from, when known.
  std::optional<DirectParams> params;

  static ExplicitModel zeros(ModelKind kind, Dims dims, Activation act = Activation::kRelu);
  void validate() const;
};

// Cotangent (or tangent) of every explicit weight and bias.
struct ModelGradient {
  Matrix A, B1, B2, C1, D11, D12, C2, D21, D22;
  Vector bx, bv, by;

  static ModelGradient zeros(Dims d);
  ModelGradient& operator+=(const ModelGradient& o);
};

bool bit_equal(const Matrix& a, const Matrix& b);
bool bit_equal(const DirectParams& a, const DirectParams& b);
bool bit_equal(const ExplicitModel& a, const ExplicitModel& b);

}  // namespace ren
