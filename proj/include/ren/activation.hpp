#pragma once

#include <string>
#include <string_view>

namespace ren {

// Scalar nonlinearities slope-restricted to [0, 1].
enum class Activation { kRelu, kTanh, kSigmoid };

double activate(Activation a, double x);

// Derivative used in Jacobians. At the relu kink (x == 0) this returns 0.
double activation_slope(Activation a, double x);

// Proximal map of c*f where f is the convex function whose prox is the
// activation itself (every slope-[0,1] monotone scalar map is such a prox).
// For c == 1 this is the activation.
double scaled_prox(Activation a, double z, double c);

std::string to_string(Activation a);
Activation activation_from_string(std::string_view name);

}  // namespace ren
