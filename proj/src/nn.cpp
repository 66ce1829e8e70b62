#include "gmenet/nn.hpp"

#include <cmath>

#include "gmenet/check.hpp"

namespace gmenet {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double norm_cdf(double x) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)); }
double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

MatX linear(const MatX& x, const MatX& w, const MatX& b) {
  require(x.cols() == w.rows(), "linear: input cols " +
                                    std::to_string(x.cols()) +
                                    " != weight rows " +
                                    std::to_string(w.rows()));
  require(b.rows() == 1 && b.cols() == w.cols(),
          "linear: bias shape mismatch");
  MatX y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

MatX linear_backward(const MatX& dy, const MatX& x, const MatX& w, MatX& dw,
                     MatX& db) {
  dw += x.transpose() * dy;
  db += dy.colwise().sum();
  return dy * w.transpose();
}

MatX gelu(const MatX& x) {
  return x.unaryExpr([](double v) { return v * norm_cdf(v); });
}

MatX gelu_backward(const MatX& dy, const MatX& x) {
  MatX d = x.unaryExpr(
      [](double v) { return norm_cdf(v) + v * norm_pdf(v); });
  return dy.cwiseProduct(d);
}

MatX sigmoid(const MatX& x) {
  return x.unaryExpr([](double v) { return sigmoid_scalar(v); });
}

MatX sigmoid_backward(const MatX& dy, const MatX& y) {
  return dy.cwiseProduct(y.cwiseProduct(MatX::Ones(y.rows(), y.cols()) - y));
}

RowVecX softmax(const RowVecX& x) {
  RowVecX shifted = x.array() - x.maxCoeff();
  RowVecX e = shifted.array().exp();
  return e / e.sum();
}

MatX softmax_rows(const MatX& x) {
  MatX y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    RowVecX e = (x.row(i).array() - m).exp();
    y.row(i) = e / e.sum();
  }
  return y;
}

MatX softmax_rows_backward(const MatX& dy, const MatX& y) {
  MatX dx(y.rows(), y.cols());
  for (Index i = 0; i < y.rows(); ++i) {
    const double dot = dy.row(i).dot(y.row(i));
    dx.row(i) = (y.row(i).array() * (dy.row(i).array() - dot)).matrix();
  }
  return dx;
}

MatX layer_norm(const MatX& x, const MatX& gain, const MatX& bias, double eps,
                LayerNormCache* cache) {
  require(x.cols() >= 2, "layer_norm: needs at least 2 columns");
  require(gain.rows() == 1 && gain.cols() == x.cols() && bias.rows() == 1 &&
              bias.cols() == x.cols(),
          "layer_norm: affine shape mismatch");
  MatX xhat(x.rows(), x.cols());
  VecX inv_std(x.rows());
  const double n = static_cast<double>(x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    RowVecX centered = x.row(i).array() - mean;
    const double var = centered.squaredNorm() / n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std(i) = is;
    xhat.row(i) = centered * is;
  }
  MatX y = xhat.cwiseProduct(gain.row(0).replicate(x.rows(), 1));
  y.rowwise() += bias.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

MatX layer_norm_backward(const MatX& dy, const MatX& gain,
                         const LayerNormCache& cache, MatX& dgain,
                         MatX& dbias) {
  dgain += dy.cwiseProduct(cache.xhat).colwise().sum();
  dbias += dy.colwise().sum();
  const Index rows = dy.rows();
  const Index cols = dy.cols();
  const double n = static_cast<double>(cols);
  MatX dx(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    RowVecX u = dy.row(i).cwiseProduct(gain.row(0));
    const double mean_u = u.mean();
    const double mean_ux = u.dot(cache.xhat.row(i)) / n;
    dx.row(i) =
        (u.array() - mean_u - cache.xhat.row(i).array() * mean_ux) *
        cache.inv_std(i);
  }
  return dx;
}

AttentionConfig AttentionConfig::make(int num_heads, Index token_count,
                                      Index token_dim) {
  AttentionConfig cfg;
  cfg.num_heads = num_heads;
  cfg.token_count = token_count;
  cfg.token_dim = token_dim;
  cfg.model_dim = token_count * token_dim;
  cfg.validate();
  return cfg;
}

void AttentionConfig::validate() const {
  require(num_heads > 0 && token_count > 0 && token_dim > 0,
          "attention config: non-positive dims");
  require(model_dim == token_count * token_dim,
          "attention config: model_dim != token_count * token_dim");
  require(token_dim % num_heads == 0,
          "attention config: token_dim not divisible by num_heads");
}

MatX mh_cross_attention(const MatX& q_tokens, const MatX& k_tokens,
                        const MatX& v_tokens, const AttentionConfig& cfg,
                        const AttentionParams& p, AttentionCache* cache) {
  cfg.validate();
  const Index d = cfg.token_dim;
  require(q_tokens.cols() == d && k_tokens.cols() == d && v_tokens.cols() == d,
          "attention: token dim mismatch");
  require(k_tokens.rows() == v_tokens.rows(),
          "attention: key/value token count mismatch");

  MatX q = q_tokens * (*p.wq);
  MatX k = k_tokens * (*p.wk);
  MatX v = v_tokens * (*p.wv);
  v.rowwise() += p.bv->row(0);

  const Index dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  MatX concat(q_tokens.rows(), d);
  std::vector<MatX> attn(static_cast<std::size_t>(cfg.num_heads));
  for (int h = 0; h < cfg.num_heads; ++h) {
    const Index off = h * dh;
    MatX scores = q.middleCols(off, dh) * k.middleCols(off, dh).transpose();
    scores *= scale;
    MatX a = softmax_rows(scores);
    concat.middleCols(off, dh) = a * v.middleCols(off, dh);
    attn[static_cast<std::size_t>(h)] = std::move(a);
  }
  MatX y = concat * (*p.wo);
  y.rowwise() += p.bo->row(0);
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn = std::move(attn);
    cache->concat = std::move(concat);
  }
  return y;
}

void mh_cross_attention_backward(const MatX& dy, const MatX& q_tokens,
                                 const MatX& k_tokens, const MatX& v_tokens,
                                 const AttentionConfig& cfg,
                                 const AttentionParams& p,
                                 const AttentionCache& cache,
                                 const AttentionGrads& g, MatX* dq_tokens,
                                 MatX* dk_tokens, MatX* dv_tokens) {
  const Index d = cfg.token_dim;
  const Index dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  *g.wo += cache.concat.transpose() * dy;
  *g.bo += dy.colwise().sum();
  MatX dconcat = dy * p.wo->transpose();

  MatX dq(cache.q.rows(), d), dk(cache.k.rows(), d), dv(cache.v.rows(), d);
  for (int h = 0; h < cfg.num_heads; ++h) {
    const Index off = h * dh;
    const MatX& a = cache.attn[static_cast<std::size_t>(h)];
    MatX doh = dconcat.middleCols(off, dh);
    MatX da = doh * cache.v.middleCols(off, dh).transpose();
    dv.middleCols(off, dh) = a.transpose() * doh;
    MatX ds = softmax_rows_backward(da, a);
    ds *= scale;
    dq.middleCols(off, dh) = ds * cache.k.middleCols(off, dh);
    dk.middleCols(off, dh) = ds.transpose() * cache.q.middleCols(off, dh);
  }

  *g.wq += q_tokens.transpose() * dq;
  *g.wk += k_tokens.transpose() * dk;
  *g.wv += v_tokens.transpose() * dv;
  *g.bv += dv.colwise().sum();
  if (dq_tokens) *dq_tokens = dq * p.wq->transpose();
  if (dk_tokens) *dk_tokens = dk * p.wk->transpose();
  if (dv_tokens) *dv_tokens = dv * p.wv->transpose();
}

}  // namespace gmenet
