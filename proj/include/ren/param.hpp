#pragma once

#include "ren/iqc.hpp"
#include "ren/types.hpp"

#include <optional>
#include <random>
#include <vector>

namespace ren::param {

// Implicit form of a REN, kept alongside the explicit model:
//   [E x+; Lambda v; y] = [[F, B1til, B2til], [C1til, D11til, D12til], ...] [x; w; u]
// H is the positive-definite matrix the blocks were read from, partitioned
// into blocks of size (n, q, n).
struct ImplicitForm {
  Matrix H;
  Matrix E, F, B1til, B2til, Ptil;
  Matrix C1til, D11til, D12til;
  Vector Lambda;
  Matrix D22;  // p x m; zero for contracting kinds
};

ImplicitForm build_implicit(const DirectParams& theta, const std::optional<IqcSpec>& iqc = {});

// Contracting REN (c-ren / c-aren). D22 is fixed to zero.
ExplicitModel construct_contracting(const DirectParams& theta);

// Feedthrough satisfying R + S D22 + D22^T S^T + D22^T (Q - eps I) D22 > 0,
// built from (X3, Y3) via a Cayley transform.
Matrix construct_d22(const DirectParams& theta, const IqcSpec& iqc);

// Robust REN (r-ren / r-aren) satisfying the incremental IQC (Q, S, R).
ExplicitModel construct_robust(const DirectParams& theta, const IqcSpec& iqc);

// Dispatches on theta.kind; iqc is required for robust kinds.
ExplicitModel construct(const DirectParams& theta, const std::optional<IqcSpec>& iqc = {});

// Pulls a cotangent on the explicit model back to the direct parameters.
// The certificate is not differentiated.
DirectParams construct_vjp(const DirectParams& theta, const std::optional<IqcSpec>& iqc,
                           const ModelGradient& cotangent);

struct InitOptions {
  double scale = 1.0;  // entries ~ N(0, (scale / sqrt(2n+q))^2)
  double epsilon = 1e-3;
  double alpha_bar = 1.0;
  Activation activation = Activation::kRelu;
};

DirectParams sample_params(ModelKind kind, Dims dims, std::mt19937_64& rng,
                           const InitOptions& opts = {});

struct Layer {
  Matrix weight;
  Vector bias;
};

// z0 = u, z_{l+1} = sigma(W_l z_l + b_l) for l < L, y = W_L z_L + b_L.
// `layers` holds the L+1 affine maps; the result has n = 0.
ExplicitModel embed_feedforward(const std::vector<Layer>& layers,
                                Activation act = Activation::kRelu);

// Finite-memory filter: the state stores the last `memory` inputs and the
// readout network maps that history to the output. The readout's input
// width must be memory * m.
ExplicitModel embed_fir(int memory, int m, const std::vector<Layer>& readout,
                        Activation act = Activation::kRelu);

}  // namespace ren::param
