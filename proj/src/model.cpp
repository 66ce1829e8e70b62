#include "gmenet/model.hpp"

#include <cmath>

#include "gmenet/check.hpp"
#include "gmenet/checkpoint.hpp"
#include "gmenet/nn.hpp"
#include "gmenet/random.hpp"

namespace gmenet {
namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;  // "init"

TaskHead make_head(ParamStore& ps, const std::string& prefix, Index d_model,
                   Index n_classes, Rng& rng) {
  TaskHead h;
  h.w = &ps.create(prefix + "w", d_model, n_classes);
  h.b = &ps.create(prefix + "b", 1, n_classes);
  fill_gaussian(h.w->value, rng, 1.0 / std::sqrt(static_cast<double>(d_model)));
  return h;
}

}  // namespace

const std::string& variant_name(Variant v) {
  static const std::string names[] = {"full", "no_cggm", "no_dwefm"};
  return names[static_cast<int>(v)];
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : {Variant::Full, Variant::NoCggm, Variant::NoDwefm})
    if (variant_name(v) == name) return v;
  throw std::runtime_error("unknown variant: " + name);
}

void ModelConfig::validate() const {
  require(raw_dim >= 1, "raw_dim must be positive");
  require(d_model >= 2, "d_model must be at least 2");
  require(tokens >= 1 && d_model % tokens == 0,
               "tokens must divide d_model");
  require(heads >= 1 && token_dim() % heads == 0,
               "heads must divide the token dim");
  if (variant != Variant::NoDwefm)
    require(expert_dim() >= 2, "expert dim must be at least 2");
}

Model make_model(const ModelConfig& cfg) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  Rng rng(mix_seed(cfg.init_seed, kInitStream));

  m.stem_fl = make_stem(m.params, "stem_fl.", cfg.raw_dim, cfg.d_model, rng);
  m.stem_t1c = make_stem(m.params, "stem_t1c.", cfg.raw_dim, cfg.d_model, rng);
  if (m.has_cggm())
    m.cggm = make_cggm(m.params, "cggm.", cfg.d_model, cfg.tokens, cfg.heads,
                       rng);
  if (m.has_dwefm()) {
    m.dwefm = make_dwefm(m.params, "dwefm.", cfg.d_model, cfg.expert_dim(),
                         rng);
  } else {
    m.concat.w = &m.params.create("fusion.w", 2 * cfg.d_model, cfg.d_model);
    m.concat.b = &m.params.create("fusion.b", 1, cfg.d_model);
    fill_gaussian(m.concat.w->value, rng,
                  1.0 / std::sqrt(2.0 * static_cast<double>(cfg.d_model)));
  }
  m.head_idh = make_head(m.params, "head.idh.", cfg.d_model, 2, rng);
  m.head_codel = make_head(m.params, "head.codel.", cfg.d_model, 2, rng);
  m.head_path = make_head(m.params, "head.path.", cfg.d_model, 3, rng);
  return m;
}

FeaturePair stem_latents(const Model& m, const SampleRecord& rec) {
  require(rec.fl_raw || rec.t1c_raw,
               "sample has no sequence at all: " + rec.id);
  FeaturePair pair;
  if (rec.fl_raw) pair.f_fl = stem_forward(*rec.fl_raw, m.stem_fl);
  if (rec.t1c_raw) pair.f_t1c = stem_forward(*rec.t1c_raw, m.stem_t1c);
  return pair;
}

PredictionSet model_forward(const Model& m, const SampleRecord& rec,
                            ModelCache* cache) {
  require(rec.fl_raw || rec.t1c_raw,
               "sample has no sequence at all: " + rec.id);
  ModelCache local;
  ModelCache& c = cache ? *cache : local;
  c.fl_present = rec.fl_raw.has_value();
  c.t1c_present = rec.t1c_raw.has_value();

  if (c.fl_present) c.f_fl = stem_forward(*rec.fl_raw, m.stem_fl, &c.stem_fl);
  if (c.t1c_present)
    c.f_t1c = stem_forward(*rec.t1c_raw, m.stem_t1c, &c.stem_t1c);

  c.imputed = false;
  if (!c.fl_present || !c.t1c_present) {
    const Sequence missing = c.fl_present ? Sequence::T1c : Sequence::FL;
    c.imputed_seq = missing;
    RowVecX& slot = missing == Sequence::FL ? c.f_fl : c.f_t1c;
    if (m.has_cggm()) {
      c.imputed = true;
      const RowVecX& src = c.fl_present ? c.f_fl : c.f_t1c;
      slot = cggm_impute_gate(src, m.cggm.toward(missing), m.cggm.att,
                              &c.impute);
    } else {
      slot = RowVecX::Zero(m.cfg.d_model);
    }
  }

  if (m.has_dwefm()) {
    c.fused = dwefm_forward(c.f_fl, c.f_t1c, m.dwefm, &c.fusion);
  } else {
    c.concat_in.resize(2 * m.cfg.d_model);
    c.concat_in << c.f_fl, c.f_t1c;
    c.fused = linear(c.concat_in, m.concat.w->value, m.concat.b->value);
  }

  return make_prediction(
      linear(c.fused, m.head_idh.w->value, m.head_idh.b->value),
      linear(c.fused, m.head_codel.w->value, m.head_codel.b->value),
      linear(c.fused, m.head_path.w->value, m.head_path.b->value));
}

void model_backward(const Model& m, const TotalLossGrads& grads,
                    const ModelCache& c) {
  RowVecX dfused = RowVecX::Zero(m.cfg.d_model);
  dfused += linear_backward(grads.idh, c.fused, m.head_idh.w->value,
                            m.head_idh.w->grad, m.head_idh.b->grad);
  dfused += linear_backward(grads.codel, c.fused, m.head_codel.w->value,
                            m.head_codel.w->grad, m.head_codel.b->grad);
  dfused += linear_backward(grads.path, c.fused, m.head_path.w->value,
                            m.head_path.w->grad, m.head_path.b->grad);

  RowVecX df_fl, df_t1c;
  if (m.has_dwefm()) {
    auto d = dwefm_backward(dfused, c.f_fl, c.f_t1c, m.dwefm, c.fusion);
    df_fl = std::move(d[0]);
    df_t1c = std::move(d[1]);
  } else {
    const MatX dcat = linear_backward(dfused, c.concat_in, m.concat.w->value,
                                      m.concat.w->grad, m.concat.b->grad);
    df_fl = dcat.leftCols(m.cfg.d_model);
    df_t1c = dcat.rightCols(m.cfg.d_model);
  }

  if (c.imputed) {
    // The generated latent routes its gradient back into the observed side.
    const bool fl_generated = c.imputed_seq == Sequence::FL;
    const RowVecX& dgen = fl_generated ? df_fl : df_t1c;
    const RowVecX dsrc =
        cggm_backward(dgen, m.cggm.toward(c.imputed_seq), m.cggm.att,
                      c.impute);
    (fl_generated ? df_t1c : df_fl) += dsrc;
  }

  if (c.fl_present) stem_backward(df_fl, m.stem_fl, c.stem_fl);
  if (c.t1c_present) stem_backward(df_t1c, m.stem_t1c, c.stem_t1c);
}

void save_model(const std::string& path, const Model& m,
                const ModelCheckpointInfo& info) {
  CheckpointHeader h;
  h.kind = "model";
  h.raw_dim = m.cfg.raw_dim;
  h.d_model = m.cfg.d_model;
  h.tokens = m.cfg.tokens;
  h.heads = m.cfg.heads;
  h.d_expert = m.cfg.expert_dim();
  h.init_seed = m.cfg.init_seed;
  h.variant = variant_name(m.cfg.variant);
  h.mode = info.mode;
  h.split_seed = info.split_seed;
  h.fold = info.fold;
  h.n_folds = info.n_folds;
  h.test_frac = info.test_frac;
  h.independent_center = center_name(info.independent_center);
  save_checkpoint(path, h, m.params);
}

Model load_model(const std::string& path, ModelCheckpointInfo* info) {
  const CheckpointHeader h = read_checkpoint_header(path);
  require_io(h.kind == "model", path + ": not a model checkpoint");
  ModelConfig cfg;
  cfg.raw_dim = h.raw_dim;
  cfg.d_model = h.d_model;
  cfg.tokens = h.tokens;
  cfg.heads = static_cast<int>(h.heads);
  cfg.d_expert = h.d_expert;
  cfg.variant = variant_from_name(h.variant);
  cfg.init_seed = h.init_seed;
  Model m = make_model(cfg);
  load_checkpoint(path, m.params);
  if (info) {
    info->mode = h.mode;
    info->split_seed = h.split_seed;
    info->fold = h.fold;
    info->n_folds = h.n_folds;
    info->test_frac = h.test_frac;
    info->independent_center = center_from_name(h.independent_center);
  }
  return m;
}

}  // namespace gmenet
