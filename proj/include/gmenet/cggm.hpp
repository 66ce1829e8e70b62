#pragma once

#include <string>
#include <vector>

#include "gmenet/nn.hpp"
#include "gmenet/param_store.hpp"
#include "gmenet/random.hpp"

namespace gmenet {

// Dual latent features for one subject. A synthesized side was produced by
// the generator rather than observed through the stem.
struct FeaturePair {
  RowVecX f_fl;
  RowVecX f_t1c;
  bool fl_synth = false;
  bool t1c_synth = false;
};

enum class Sequence { FL = 0, T1c = 1 };

// One generation direction (source sequence -> synthesized sequence): a
// learnable query embedding, cross-attention projections, and the gate.
struct CggmDirection {
  Param* embed = nullptr;   // T x d query tokens
  Param* wq = nullptr;      // d x d, bias-free
  Param* wk = nullptr;      // d x d, bias-free
  Param* wv = nullptr;      // d x d
  Param* bv = nullptr;      // 1 x d
  Param* wo = nullptr;      // d x d
  Param* bo = nullptr;      // 1 x d
  Param* gate_w = nullptr;  // 2D x D
  Param* gate_b = nullptr;  // 1 x D

  AttentionParams attention() const {
    return {&wq->value, &wk->value, &wv->value,
            &bv->value, &wo->value, &bo->value};
  }
  AttentionGrads attention_grads() const {
    return {&wq->grad, &wk->grad, &wv->grad, &bv->grad, &wo->grad, &bo->grad};
  }
};

struct Cggm {
  AttentionConfig att;       // token_count T, token_dim d, T*d = D
  CggmDirection fl_to_t1c;   // synthesizes T1c from FL
  CggmDirection t1c_to_fl;   // synthesizes FL from T1c

  const CggmDirection& toward(Sequence target) const {
    return target == Sequence::T1c ? fl_to_t1c : t1c_to_fl;
  }
};

Cggm make_cggm(ParamStore& ps, const std::string& prefix, Index d_model,
               Index tokens, int heads, Rng& rng);

struct CggmCache {
  MatX tokens_u;      // T x d source tokens
  AttentionCache att;
  RowVecX f_cs;       // flattened attention output
  RowVecX gate_in;    // concat(f_cs, f_u), 1 x 2D
  RowVecX alpha;      // sigmoid gate, elementwise in (0,1)
  RowVecX f_m;        // alpha .* f_cs
};

// Eq.-style cross-attention synthesis: the source feature is chunked into T
// tokens used as keys and values; the direction's embedding queries them.
RowVecX cggm_impute(const RowVecX& f_u, const CggmDirection& dir,
                    const AttentionConfig& cfg, CggmCache* cache = nullptr);

// alpha = sigmoid(Linear(concat(f_cs, f_u))); f_m = alpha .* f_cs.
RowVecX cggm_gate(const RowVecX& f_cs, const RowVecX& f_u,
                  const CggmDirection& dir, CggmCache* cache = nullptr);

// impute followed by gate, sharing one cache.
RowVecX cggm_impute_gate(const RowVecX& f_u, const CggmDirection& dir,
                         const AttentionConfig& cfg,
                         CggmCache* cache = nullptr);

// Backward through gate+attention; accumulates into the direction's grads and
// returns d loss / d f_u.
RowVecX cggm_backward(const RowVecX& df_m, const CggmDirection& dir,
                      const AttentionConfig& cfg, const CggmCache& cache);

// Applies the opposite direction's impute+gate to the synthesized feature,
// reconstructing the source.
RowVecX cggm_cycle_reconstruct(const RowVecX& f_m, const CggmDirection& reverse,
                               const AttentionConfig& cfg,
                               CggmCache* cache = nullptr);

struct ReconLoss {
  double mse = 0.0;
  double kl = 0.0;
  double cycle = 0.0;
  double total = 0.0;
};

// mse = MSE(f_m_hat, f_m_true); kl = KL(softmax(f_m_true) || softmax(f_m_hat));
// cycle = MSE(f_u_hat, f_u_true). Targets are constants; optional gradient
// outputs are wrt the two generated vectors.
ReconLoss recon_loss(const RowVecX& f_m_hat, const RowVecX& f_m_true,
                     const RowVecX& f_u_hat, const RowVecX& f_u_true,
                     RowVecX* df_m_hat = nullptr, RowVecX* df_u_hat = nullptr);

struct MaskDraw {
  bool fl = false;
  bool t1c = false;
};

// Per pair each side is masked with probability mask_prob; both-masked draws
// are rejected (bounded retries, then one side is kept by coin flip).
std::vector<MaskDraw> draw_masks(std::size_t n, double mask_prob, Rng& rng);

// One self-supervised step over complete latent pairs with explicit mask
// draws: each masked side contributes the three-term reconstruction loss
// against its true latent. Gradients accumulate into the CGGM parameter
// grads; the returned loss is averaged over contributing sides.
ReconLoss cggm_masked_step(const Cggm& cggm,
                           const std::vector<FeaturePair>& batch,
                           const std::vector<MaskDraw>& masks);

// draw_masks + cggm_masked_step.
ReconLoss cggm_pretrain_step(const Cggm& cggm,
                             const std::vector<FeaturePair>& batch,
                             double mask_prob, Rng& rng);

// Fills the absent side (an empty vector) in place and flags it synthesized;
// complete pairs are returned unchanged. Both sides absent is an error.
void complete_pair(FeaturePair& pair, const Cggm& cggm);

}  // namespace gmenet
