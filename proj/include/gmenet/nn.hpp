#pragma once

#include <vector>

#include "gmenet/types.hpp"

namespace gmenet {

// Shared layer-norm stabilizer.
inline constexpr double kLnEps = 1e-5;

// ---------------------------------------------------------------------------
// Differentiable primitives. Forward functions optionally fill a cache;
// backward functions consume the cache, accumulate (+=) into parameter
// gradient slots and return the gradient wrt the input.
// ---------------------------------------------------------------------------

// y = x * W + b, b broadcast over rows (b is 1 x cols).
MatX linear(const MatX& x, const MatX& w, const MatX& b);

// Accumulates dW += x^T dy, db += colsum(dy); returns dx = dy W^T.
MatX linear_backward(const MatX& dy, const MatX& x, const MatX& w, MatX& dw,
                     MatX& db);

// Exact Gaussian-CDF GELU: x * Phi(x). Derivative Phi(x) + x * phi(x).
MatX gelu(const MatX& x);
MatX gelu_backward(const MatX& dy, const MatX& x);

MatX sigmoid(const MatX& x);
// dy/dx from the forward output y = sigmoid(x): dx = dy .* y .* (1 - y).
MatX sigmoid_backward(const MatX& dy, const MatX& y);

// Max-shifted row softmax; tie inputs yield exactly uniform outputs.
RowVecX softmax(const RowVecX& x);
MatX softmax_rows(const MatX& x);
// dx given y = softmax_rows(x): dx = y .* (dy - rowsum(dy .* y)).
MatX softmax_rows_backward(const MatX& dy, const MatX& y);

struct LayerNormCache {
  MatX xhat;     // normalized rows before affine
  VecX inv_std;  // per-row 1/sqrt(var + eps)
};

// Per-row normalization to zero mean / unit variance followed by affine
// (gain, bias are 1 x cols). Requires cols >= 2.
MatX layer_norm(const MatX& x, const MatX& gain, const MatX& bias, double eps,
                LayerNormCache* cache = nullptr);
MatX layer_norm_backward(const MatX& dy, const MatX& gain,
                         const LayerNormCache& cache, MatX& dgain, MatX& dbias);

// ---------------------------------------------------------------------------
// Multi-head cross-attention over token matrices (tokens are rows).
// ---------------------------------------------------------------------------

struct AttentionConfig {
  int num_heads = 1;
  Index token_count = 1;  // T
  Index token_dim = 1;    // d
  Index model_dim = 1;    // D = T * d

  static AttentionConfig make(int num_heads, Index token_count,
                              Index token_dim);
  Index head_dim() const { return token_dim / num_heads; }
  void validate() const;
};

// Projection weights; wq/wk are bias-free so a zero query yields uniform
// attention regardless of the key content.
struct AttentionParams {
  const MatX* wq = nullptr;  // d x d
  const MatX* wk = nullptr;  // d x d
  const MatX* wv = nullptr;  // d x d
  const MatX* bv = nullptr;  // 1 x d
  const MatX* wo = nullptr;  // d x d
  const MatX* bo = nullptr;  // 1 x d
};

struct AttentionGrads {
  MatX* wq = nullptr;
  MatX* wk = nullptr;
  MatX* wv = nullptr;
  MatX* bv = nullptr;
  MatX* wo = nullptr;
  MatX* bo = nullptr;
};

struct AttentionCache {
  MatX q, k, v;             // projected tokens, Tq x d / Tk x d
  std::vector<MatX> attn;   // per head, Tq x Tk rows summing to 1
  MatX concat;              // Tq x d, heads re-assembled, before out proj
};

// Scaled dot-product attention per head (scale 1/sqrt(head_dim)) with output
// projection. q_tokens: Tq x d; k_tokens, v_tokens: Tk x d. Returns Tq x d.
MatX mh_cross_attention(const MatX& q_tokens, const MatX& k_tokens,
                        const MatX& v_tokens, const AttentionConfig& cfg,
                        const AttentionParams& p,
                        AttentionCache* cache = nullptr);

// Fills dq/dk/dv_tokens when non-null; accumulates into parameter grads.
void mh_cross_attention_backward(const MatX& dy, const MatX& q_tokens,
                                 const MatX& k_tokens, const MatX& v_tokens,
                                 const AttentionConfig& cfg,
                                 const AttentionParams& p,
                                 const AttentionCache& cache,
                                 const AttentionGrads& g, MatX* dq_tokens,
                                 MatX* dk_tokens, MatX* dv_tokens);

}  // namespace gmenet
