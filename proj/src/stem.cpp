#include "gmenet/stem.hpp"

#include <cmath>

#include "gmenet/check.hpp"

namespace gmenet {

StemSeq make_stem(ParamStore& ps, const std::string& prefix, Index raw_dim,
                  Index d_model, Rng& rng) {
  require(raw_dim > 0 && d_model >= 2, "stem: bad dims");
  StemSeq s;
  const double s1 = 1.0 / std::sqrt(static_cast<double>(raw_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(d_model));
  s.w1 = &ps.create(prefix + "w1", raw_dim, d_model);
  fill_gaussian(s.w1->value, rng, s1);
  s.b1 = &ps.create(prefix + "b1", 1, d_model);
  s.w2 = &ps.create(prefix + "w2", d_model, d_model);
  fill_gaussian(s.w2->value, rng, s2);
  s.b2 = &ps.create(prefix + "b2", 1, d_model);
  if (raw_dim != d_model) {
    s.proj = &ps.create(prefix + "proj", raw_dim, d_model);
    fill_gaussian(s.proj->value, rng, s1);
  }
  s.ln_g = &ps.create(prefix + "ln_g", 1, d_model);
  s.ln_g->value.setOnes();
  s.ln_b = &ps.create(prefix + "ln_b", 1, d_model);
  return s;
}

MatX stem_forward(const MatX& raw, const StemSeq& p, StemCache* cache,
                  double eps) {
  MatX pre = linear(raw, p.w1->value, p.b1->value);
  MatX hid = gelu(pre);
  MatX mlp = linear(hid, p.w2->value, p.b2->value);
  MatX res = p.proj ? MatX(raw * p.proj->value) : raw;
  MatX y = layer_norm(res + mlp, p.ln_g->value, p.ln_b->value, eps,
                      cache ? &cache->ln : nullptr);
  if (cache) {
    cache->x = raw;
    cache->pre = std::move(pre);
    cache->hid = std::move(hid);
  }
  return y;
}

void stem_backward(const MatX& dy, const StemSeq& p, const StemCache& cache) {
  MatX dsum = layer_norm_backward(dy, p.ln_g->value, cache.ln, p.ln_g->grad,
                                  p.ln_b->grad);
  // Residual branch.
  if (p.proj) p.proj->grad += cache.x.transpose() * dsum;
  // MLP branch.
  MatX dhid =
      linear_backward(dsum, cache.hid, p.w2->value, p.w2->grad, p.b2->grad);
  MatX dpre = gelu_backward(dhid, cache.pre);
  linear_backward(dpre, cache.x, p.w1->value, p.w1->grad, p.b1->grad);
}

}  // namespace gmenet
