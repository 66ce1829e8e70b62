#include "gmenet/cggm.hpp"

#include <cmath>

#include "gmenet/check.hpp"

namespace gmenet {

namespace {

// Row-major D-vector viewed as T tokens of dim d.
MatX to_tokens(const RowVecX& f, const AttentionConfig& cfg) {
  MatX tokens(cfg.token_count, cfg.token_dim);
  for (Index t = 0; t < cfg.token_count; ++t)
    tokens.row(t) = f.segment(t * cfg.token_dim, cfg.token_dim);
  return tokens;
}

RowVecX flatten(const MatX& tokens) {
  RowVecX f(tokens.rows() * tokens.cols());
  for (Index t = 0; t < tokens.rows(); ++t)
    f.segment(t * tokens.cols(), tokens.cols()) = tokens.row(t);
  return f;
}

CggmDirection make_direction(ParamStore& ps, const std::string& prefix,
                             Index d_model, Index tokens, Index token_dim,
                             Rng& rng) {
  CggmDirection dir;
  const double sd = 1.0 / std::sqrt(static_cast<double>(token_dim));
  const double sg = 1.0 / std::sqrt(static_cast<double>(2 * d_model));
  dir.embed = &ps.create(prefix + "embed", tokens, token_dim);
  fill_gaussian(dir.embed->value, rng, 1.0);
  dir.wq = &ps.create(prefix + "wq", token_dim, token_dim);
  fill_gaussian(dir.wq->value, rng, sd);
  dir.wk = &ps.create(prefix + "wk", token_dim, token_dim);
  fill_gaussian(dir.wk->value, rng, sd);
  dir.wv = &ps.create(prefix + "wv", token_dim, token_dim);
  fill_gaussian(dir.wv->value, rng, sd);
  dir.bv = &ps.create(prefix + "bv", 1, token_dim);
  dir.wo = &ps.create(prefix + "wo", token_dim, token_dim);
  fill_gaussian(dir.wo->value, rng, sd);
  dir.bo = &ps.create(prefix + "bo", 1, token_dim);
  dir.gate_w = &ps.create(prefix + "gate_w", 2 * d_model, d_model);
  fill_gaussian(dir.gate_w->value, rng, sg);
  dir.gate_b = &ps.create(prefix + "gate_b", 1, d_model);
  return dir;
}

}  // namespace

Cggm make_cggm(ParamStore& ps, const std::string& prefix, Index d_model,
               Index tokens, int heads, Rng& rng) {
  require(tokens > 0 && d_model % tokens == 0,
          "cggm: d_model must be divisible by token count");
  Cggm c;
  c.att = AttentionConfig::make(heads, tokens, d_model / tokens);
  c.fl_to_t1c = make_direction(ps, prefix + "fl_to_t1c.", d_model, tokens,
                               c.att.token_dim, rng);
  c.t1c_to_fl = make_direction(ps, prefix + "t1c_to_fl.", d_model, tokens,
                               c.att.token_dim, rng);
  return c;
}

RowVecX cggm_impute(const RowVecX& f_u, const CggmDirection& dir,
                    const AttentionConfig& cfg, CggmCache* cache) {
  require(f_u.size() == cfg.model_dim, "cggm: feature dim mismatch");
  MatX tokens_u = to_tokens(f_u, cfg);
  MatX out =
      mh_cross_attention(dir.embed->value, tokens_u, tokens_u, cfg,
                         dir.attention(), cache ? &cache->att : nullptr);
  RowVecX f_cs = flatten(out);
  if (cache) {
    cache->tokens_u = std::move(tokens_u);
    cache->f_cs = f_cs;
  }
  return f_cs;
}

RowVecX cggm_gate(const RowVecX& f_cs, const RowVecX& f_u,
                  const CggmDirection& dir, CggmCache* cache) {
  RowVecX gate_in(f_cs.size() + f_u.size());
  gate_in << f_cs, f_u;
  MatX pre = linear(gate_in, dir.gate_w->value, dir.gate_b->value);
  RowVecX alpha = sigmoid(pre).row(0);
  RowVecX f_m = alpha.cwiseProduct(f_cs);
  if (cache) {
    cache->gate_in = std::move(gate_in);
    cache->alpha = alpha;
    cache->f_m = f_m;
  }
  return f_m;
}

RowVecX cggm_impute_gate(const RowVecX& f_u, const CggmDirection& dir,
                         const AttentionConfig& cfg, CggmCache* cache) {
  RowVecX f_cs = cggm_impute(f_u, dir, cfg, cache);
  return cggm_gate(f_cs, f_u, dir, cache);
}

RowVecX cggm_backward(const RowVecX& df_m, const CggmDirection& dir,
                      const AttentionConfig& cfg, const CggmCache& cache) {
  const Index d_model = cfg.model_dim;
  // Gate: f_m = alpha .* f_cs, alpha = sigmoid(gate_in W + b).
  RowVecX dalpha = df_m.cwiseProduct(cache.f_cs);
  RowVecX df_cs = df_m.cwiseProduct(cache.alpha);
  RowVecX ones = RowVecX::Ones(dalpha.size());
  RowVecX dpre =
      dalpha.cwiseProduct(cache.alpha.cwiseProduct(ones - cache.alpha));
  MatX dgate_in = linear_backward(dpre, cache.gate_in, dir.gate_w->value,
                                  dir.gate_w->grad, dir.gate_b->grad);
  df_cs += dgate_in.row(0).head(d_model);
  RowVecX df_u = dgate_in.row(0).tail(d_model);

  // Attention: queries are the embedding; keys and values share the source
  // tokens, so their gradients add.
  MatX dy = to_tokens(df_cs, cfg);
  MatX dq, dk, dv;
  mh_cross_attention_backward(dy, dir.embed->value, cache.tokens_u,
                              cache.tokens_u, cfg, dir.attention(), cache.att,
                              dir.attention_grads(), &dq, &dk, &dv);
  dir.embed->grad += dq;
  df_u += flatten(dk + dv);
  return df_u;
}

RowVecX cggm_cycle_reconstruct(const RowVecX& f_m, const CggmDirection& reverse,
                               const AttentionConfig& cfg, CggmCache* cache) {
  return cggm_impute_gate(f_m, reverse, cfg, cache);
}

ReconLoss recon_loss(const RowVecX& f_m_hat, const RowVecX& f_m_true,
                     const RowVecX& f_u_hat, const RowVecX& f_u_true,
                     RowVecX* df_m_hat, RowVecX* df_u_hat) {
  require(f_m_hat.size() == f_m_true.size() &&
              f_u_hat.size() == f_u_true.size(),
          "recon_loss: dim mismatch");
  const double dm = static_cast<double>(f_m_hat.size());
  const double du = static_cast<double>(f_u_hat.size());
  ReconLoss l;
  l.mse = (f_m_hat - f_m_true).squaredNorm() / dm;
  l.cycle = (f_u_hat - f_u_true).squaredNorm() / du;

  RowVecX p = softmax(f_m_true);
  RowVecX q = softmax(f_m_hat);
  double kl = 0.0;
  for (Index i = 0; i < p.size(); ++i)
    if (p(i) > 0.0) kl += p(i) * std::log(p(i) / q(i));
  l.kl = kl;
  l.total = l.mse + l.kl + l.cycle;

  if (df_m_hat) *df_m_hat = 2.0 / dm * (f_m_hat - f_m_true) + (q - p);
  if (df_u_hat) *df_u_hat = 2.0 / du * (f_u_hat - f_u_true);
  return l;
}

std::vector<MaskDraw> draw_masks(std::size_t n, double mask_prob, Rng& rng) {
  require(mask_prob >= 0.0 && mask_prob <= 1.0,
          "draw_masks: mask_prob outside [0,1]");
  std::bernoulli_distribution mask(mask_prob);
  std::vector<MaskDraw> draws(n);
  for (MaskDraw& d : draws) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      d.fl = mask(rng);
      d.t1c = mask(rng);
      if (!(d.fl && d.t1c)) break;
    }
    if (d.fl && d.t1c) {
      d.fl = std::bernoulli_distribution(0.5)(rng);
      d.t1c = !d.fl;
    }
  }
  return draws;
}

ReconLoss cggm_masked_step(const Cggm& cggm,
                           const std::vector<FeaturePair>& batch,
                           const std::vector<MaskDraw>& masks) {
  require(!batch.empty(), "pretrain_step: empty batch");
  require(masks.size() == batch.size(),
          "pretrain_step: one mask draw per pair");

  struct Contribution {
    const RowVecX* source;  // unmasked side, cycle target
    const RowVecX* target;  // masked side, reconstruction target
    const CggmDirection* synth;  // source -> target
    const CggmDirection* back;   // target -> source
  };
  std::vector<Contribution> work;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const FeaturePair& pair = batch[i];
    require(pair.f_fl.size() > 0 && pair.f_t1c.size() > 0,
            "pretrain_step: batch must contain complete pairs");
    require(!(masks[i].fl && masks[i].t1c),
            "pretrain_step: both sides masked");
    if (masks[i].fl)
      work.push_back({&pair.f_t1c, &pair.f_fl, &cggm.t1c_to_fl,
                      &cggm.fl_to_t1c});
    else if (masks[i].t1c)
      work.push_back({&pair.f_fl, &pair.f_t1c, &cggm.fl_to_t1c,
                      &cggm.t1c_to_fl});
  }
  if (work.empty()) return {};

  const double inv_n = 1.0 / static_cast<double>(work.size());
  ReconLoss sum;
  for (const Contribution& c : work) {
    CggmCache synth_cache, cycle_cache;
    RowVecX f_m_hat =
        cggm_impute_gate(*c.source, *c.synth, cggm.att, &synth_cache);
    RowVecX f_u_hat =
        cggm_cycle_reconstruct(f_m_hat, *c.back, cggm.att, &cycle_cache);
    RowVecX df_m_hat, df_u_hat;
    ReconLoss l =
        recon_loss(f_m_hat, *c.target, f_u_hat, *c.source, &df_m_hat,
                   &df_u_hat);
    sum.mse += l.mse;
    sum.kl += l.kl;
    sum.cycle += l.cycle;
    sum.total += l.total;

    df_m_hat *= inv_n;
    df_u_hat *= inv_n;
    df_m_hat += cggm_backward(df_u_hat, *c.back, cggm.att, cycle_cache);
    cggm_backward(df_m_hat, *c.synth, cggm.att, synth_cache);
  }
  sum.mse *= inv_n;
  sum.kl *= inv_n;
  sum.cycle *= inv_n;
  sum.total *= inv_n;
  return sum;
}

ReconLoss cggm_pretrain_step(const Cggm& cggm,
                             const std::vector<FeaturePair>& batch,
                             double mask_prob, Rng& rng) {
  return cggm_masked_step(cggm, batch,
                          draw_masks(batch.size(), mask_prob, rng));
}

void complete_pair(FeaturePair& pair, const Cggm& cggm) {
  const bool has_fl = pair.f_fl.size() > 0;
  const bool has_t1c = pair.f_t1c.size() > 0;
  require(has_fl || has_t1c, "complete_pair: both sides absent");
  if (has_fl && has_t1c) return;
  if (!has_t1c) {
    pair.f_t1c = cggm_impute_gate(pair.f_fl, cggm.fl_to_t1c, cggm.att);
    pair.t1c_synth = true;
  } else {
    pair.f_fl = cggm_impute_gate(pair.f_t1c, cggm.t1c_to_fl, cggm.att);
    pair.fl_synth = true;
  }
}

}  // namespace gmenet
