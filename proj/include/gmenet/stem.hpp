#pragma once

#include <string>

#include "gmenet/nn.hpp"
#include "gmenet/param_store.hpp"
#include "gmenet/random.hpp"

namespace gmenet {

// Residual MLP stem for one sequence: y = LayerNorm(Proj(x) + MLP(x)).
// The residual projection exists only when raw_dim != d_model; otherwise the
// residual is the identity. Hidden width equals d_model.
struct StemSeq {
  Param* w1 = nullptr;  // raw_dim x d_model
  Param* b1 = nullptr;
  Param* w2 = nullptr;  // d_model x d_model
  Param* b2 = nullptr;
  Param* proj = nullptr;  // raw_dim x d_model, null when raw_dim == d_model
  Param* ln_g = nullptr;
  Param* ln_b = nullptr;
};

StemSeq make_stem(ParamStore& ps, const std::string& prefix, Index raw_dim,
                  Index d_model, Rng& rng);

struct StemCache {
  MatX x;    // raw input
  MatX pre;  // x w1 + b1
  MatX hid;  // gelu(pre)
  LayerNormCache ln;
};

MatX stem_forward(const MatX& raw, const StemSeq& p, StemCache* cache = nullptr,
                  double eps = kLnEps);

// Accumulates parameter gradients; the input is data, so no dx is returned.
void stem_backward(const MatX& dy, const StemSeq& p, const StemCache& cache);

}  // namespace gmenet
