#pragma once

#include <array>
#include <string>

#include "gmenet/nn.hpp"
#include "gmenet/param_store.hpp"
#include "gmenet/random.hpp"

namespace gmenet {

// One expert: two-layer perceptron with GELU, layer-normalized output,
// input D -> hidden D -> output D_e.
struct Expert {
  Param* w1 = nullptr;
  Param* b1 = nullptr;
  Param* w2 = nullptr;
  Param* b2 = nullptr;
  Param* ln_g = nullptr;
  Param* ln_b = nullptr;
};

struct Dwefm {
  Expert expert_fl;
  Expert expert_t1c;
  Param* router_w = nullptr;  // D x 1, one confidence logit per feature
  Param* proj_w = nullptr;    // 2D x D
  Param* proj_b = nullptr;    // 1 x D
  Index d_expert = 0;
};

Dwefm make_dwefm(ParamStore& ps, const std::string& prefix, Index d_model,
                 Index d_expert, Rng& rng);

struct ExpertCache {
  RowVecX x;
  RowVecX pre;
  RowVecX hid;
  RowVecX out;  // pre layer-norm
  LayerNormCache ln;
};

RowVecX expert_forward(const RowVecX& x, const Expert& e,
                       ExpertCache* cache = nullptr, double eps = kLnEps);
RowVecX expert_backward(const RowVecX& dy, const Expert& e,
                        const ExpertCache& cache);

struct DwefmCache {
  // Expert views grouped by input sequence: e_fl = [E_fl(f_fl), E_t1c(f_fl)],
  // e_t1c = [E_t1c(f_t1c), E_fl(f_t1c)].
  ExpertCache fl_native, fl_cross;    // experts applied to f_fl
  ExpertCache t1c_native, t1c_cross;  // experts applied to f_t1c
  RowVecX e_fl, e_t1c;                // 1 x 2*D_e each
  Vec2 w;                             // confidence weights, sum to 1
  RowVecX fused_in;                   // concat(w_fl*e_fl, w_t1c*e_t1c)
};

// e_fl = concat(E_fl(f_fl), E_t1c(f_fl)); e_t1c = concat(E_t1c(f_t1c),
// E_fl(f_t1c)) — both experts view each sequence, grouped by input.
void expert_views(const RowVecX& f_fl, const RowVecX& f_t1c, const Dwefm& p,
                  RowVecX& e_fl, RowVecX& e_t1c, DwefmCache* cache = nullptr);

// Softmax over the two scalar router logits [R(f_fl), R(f_t1c)].
Vec2 route(const RowVecX& f_fl, const RowVecX& f_t1c, const Dwefm& p);

// f_f = Linear(concat(w_fl * e_fl, w_t1c * e_t1c)).
RowVecX fuse(const RowVecX& e_fl, const RowVecX& e_t1c, const Vec2& w,
             const Dwefm& p, DwefmCache* cache = nullptr);

// Full module: expert views, routing, weighted fusion.
RowVecX dwefm_forward(const RowVecX& f_fl, const RowVecX& f_t1c,
                      const Dwefm& p, DwefmCache* cache = nullptr);

// Accumulates parameter grads; returns gradients wrt (f_fl, f_t1c).
std::array<RowVecX, 2> dwefm_backward(const RowVecX& df_f, const RowVecX& f_fl,
                                      const RowVecX& f_t1c, const Dwefm& p,
                                      const DwefmCache& cache);

}  // namespace gmenet
