#include "gmenet/dwefm.hpp"

#include <cmath>

#include "gmenet/check.hpp"

namespace gmenet {

namespace {

Expert make_expert(ParamStore& ps, const std::string& prefix, Index d_model,
                   Index d_expert, Rng& rng) {
  Expert e;
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d_model));
  e.w1 = &ps.create(prefix + "w1", d_model, d_model);
  fill_gaussian(e.w1->value, rng, s1);
  e.b1 = &ps.create(prefix + "b1", 1, d_model);
  e.w2 = &ps.create(prefix + "w2", d_model, d_expert);
  fill_gaussian(e.w2->value, rng, s1);
  e.b2 = &ps.create(prefix + "b2", 1, d_expert);
  e.ln_g = &ps.create(prefix + "ln_g", 1, d_expert);
  e.ln_g->value.setOnes();
  e.ln_b = &ps.create(prefix + "ln_b", 1, d_expert);
  return e;
}

}  // namespace

Dwefm make_dwefm(ParamStore& ps, const std::string& prefix, Index d_model,
                 Index d_expert, Rng& rng) {
  require(d_expert >= 2, "dwefm: expert width must be at least 2");
  Dwefm p;
  p.d_expert = d_expert;
  p.expert_fl = make_expert(ps, prefix + "expert_fl.", d_model, d_expert, rng);
  p.expert_t1c =
      make_expert(ps, prefix + "expert_t1c.", d_model, d_expert, rng);
  p.router_w = &ps.create(prefix + "router_w", d_model, 1);
  fill_gaussian(p.router_w->value, rng,
                1.0 / std::sqrt(static_cast<double>(d_model)));
  const Index fused = 4 * d_expert;
  p.proj_w = &ps.create(prefix + "proj_w", fused, d_model);
  fill_gaussian(p.proj_w->value, rng,
                1.0 / std::sqrt(static_cast<double>(fused)));
  p.proj_b = &ps.create(prefix + "proj_b", 1, d_model);
  return p;
}

RowVecX expert_forward(const RowVecX& x, const Expert& e, ExpertCache* cache,
                       double eps) {
  MatX pre = linear(x, e.w1->value, e.b1->value);
  MatX hid = gelu(pre);
  MatX out = linear(hid, e.w2->value, e.b2->value);
  MatX y = layer_norm(out, e.ln_g->value, e.ln_b->value, eps,
                      cache ? &cache->ln : nullptr);
  if (cache) {
    cache->x = x;
    cache->pre = pre.row(0);
    cache->hid = hid.row(0);
    cache->out = out.row(0);
  }
  return y.row(0);
}

RowVecX expert_backward(const RowVecX& dy, const Expert& e,
                        const ExpertCache& cache) {
  MatX dout = layer_norm_backward(dy, e.ln_g->value, cache.ln, e.ln_g->grad,
                                  e.ln_b->grad);
  MatX dhid =
      linear_backward(dout, cache.hid, e.w2->value, e.w2->grad, e.b2->grad);
  MatX dpre = gelu_backward(dhid, cache.pre);
  MatX dx =
      linear_backward(dpre, cache.x, e.w1->value, e.w1->grad, e.b1->grad);
  return dx.row(0);
}

void expert_views(const RowVecX& f_fl, const RowVecX& f_t1c, const Dwefm& p,
                  RowVecX& e_fl, RowVecX& e_t1c, DwefmCache* cache) {
  const Index de = p.d_expert;
  e_fl.resize(2 * de);
  e_t1c.resize(2 * de);
  e_fl.head(de) = expert_forward(f_fl, p.expert_fl,
                                 cache ? &cache->fl_native : nullptr);
  e_fl.tail(de) = expert_forward(f_fl, p.expert_t1c,
                                 cache ? &cache->fl_cross : nullptr);
  e_t1c.head(de) = expert_forward(f_t1c, p.expert_t1c,
                                  cache ? &cache->t1c_native : nullptr);
  e_t1c.tail(de) = expert_forward(f_t1c, p.expert_fl,
                                  cache ? &cache->t1c_cross : nullptr);
  if (cache) {
    cache->e_fl = e_fl;
    cache->e_t1c = e_t1c;
  }
}

Vec2 route(const RowVecX& f_fl, const RowVecX& f_t1c, const Dwefm& p) {
  // Same 1/sqrt(d) tempering as the attention scores; without it the router
  // saturates early and fusion degenerates to a hard switch.
  const double scale = 1.0 / std::sqrt(static_cast<double>(f_fl.size()));
  RowVecX logits(2);
  logits << scale * (f_fl * p.router_w->value)(0, 0),
      scale * (f_t1c * p.router_w->value)(0, 0);
  RowVecX w = softmax(logits);
  return Vec2(w(0), w(1));
}

RowVecX fuse(const RowVecX& e_fl, const RowVecX& e_t1c, const Vec2& w,
             const Dwefm& p, DwefmCache* cache) {
  RowVecX fused_in(e_fl.size() + e_t1c.size());
  fused_in << w(0) * e_fl, w(1) * e_t1c;
  MatX f_f = linear(fused_in, p.proj_w->value, p.proj_b->value);
  if (cache) {
    cache->w = w;
    cache->fused_in = fused_in;
  }
  return f_f.row(0);
}

RowVecX dwefm_forward(const RowVecX& f_fl, const RowVecX& f_t1c,
                      const Dwefm& p, DwefmCache* cache) {
  RowVecX e_fl, e_t1c;
  expert_views(f_fl, f_t1c, p, e_fl, e_t1c, cache);
  Vec2 w = route(f_fl, f_t1c, p);
  return fuse(e_fl, e_t1c, w, p, cache);
}

std::array<RowVecX, 2> dwefm_backward(const RowVecX& df_f, const RowVecX& f_fl,
                                      const RowVecX& f_t1c, const Dwefm& p,
                                      const DwefmCache& cache) {
  const Index de = p.d_expert;
  p.proj_w->grad += cache.fused_in.transpose() * df_f;
  p.proj_b->grad += df_f;
  RowVecX dfused = df_f * p.proj_w->value.transpose();

  RowVecX dew_fl = dfused.head(2 * de);
  RowVecX dew_t1c = dfused.tail(2 * de);
  RowVecX de_fl = cache.w(0) * dew_fl;
  RowVecX de_t1c = cache.w(1) * dew_t1c;
  Vec2 dw(dew_fl.dot(cache.e_fl), dew_t1c.dot(cache.e_t1c));

  // Softmax over two logits.
  const double dot = dw(0) * cache.w(0) + dw(1) * cache.w(1);
  Vec2 dlogit(cache.w(0) * (dw(0) - dot), cache.w(1) * (dw(1) - dot));
  dlogit *= 1.0 / std::sqrt(static_cast<double>(f_fl.size()));

  p.router_w->grad += f_fl.transpose() * dlogit(0);
  p.router_w->grad += f_t1c.transpose() * dlogit(1);
  RowVecX df_fl = dlogit(0) * p.router_w->value.transpose();
  RowVecX df_t1c = dlogit(1) * p.router_w->value.transpose();

  df_fl += expert_backward(de_fl.head(de), p.expert_fl, cache.fl_native);
  df_fl += expert_backward(de_fl.tail(de), p.expert_t1c, cache.fl_cross);
  df_t1c += expert_backward(de_t1c.head(de), p.expert_t1c, cache.t1c_native);
  df_t1c += expert_backward(de_t1c.tail(de), p.expert_fl, cache.t1c_cross);
  return {df_fl, df_t1c};
}

}  // namespace gmenet
