#include "ren/activation.hpp"

#include "ren/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ren {

double activate(Activation a, double x) {
  switch (a) {
    case Activation::kRelu:
      return x > 0.0 ? x : 0.0;
    case Activation::kTanh:
      return std::tanh(x);
    case Activation::kSigmoid:
      return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

double activation_slope(Activation a, double x) {
  switch (a) {
    case Activation::kRelu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::kSigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

double scaled_prox(Activation a, double z, double c) {
  if (a == Activation::kRelu) return z > 0.0 ? z : 0.0;
  if (c == 1.0) return activate(a, z);
  // w = sigma(x) where x solves g(x) = (1-c) sigma(x) + c x - z = 0.
  // g' >= min(c, 1) > 0, so g is strictly increasing.
  auto g = [&](double x) { return (1.0 - c) * activate(a, x) + c * x - z; };
  const double slope_lo = std::min(c, 1.0);
  double lo = (z - std::abs(1.0 - c)) / c - 1.0;
  double hi = (z + std::abs(1.0 - c)) / c + 1.0;
  while (g(lo) > 0.0) lo -= (hi - lo);
  while (g(hi) < 0.0) hi += (hi - lo);
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double gx = g(x);
    if (gx == 0.0) break;
    if (gx > 0.0) hi = x; else lo = x;
    const double d = (1.0 - c) * activation_slope(a, x) + c;
    double xn = x - gx / std::max(d, slope_lo);
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    if (std::abs(xn - x) <= 1e-15 * (1.0 + std::abs(x))) { x = xn; break; }
    x = xn;
  }
  return activate(a, x);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "relu";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw IoError("unknown activation '" + std::string(name) + "'");
}

}  // namespace ren
