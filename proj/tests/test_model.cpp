#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>

#include "gmenet/model.hpp"
#include "gmenet/random.hpp"

using namespace gmenet;

namespace {

ModelConfig small_config(Variant v, std::uint64_t seed = 11) {
  ModelConfig cfg;
  cfg.raw_dim = 6;
  cfg.d_model = 8;
  cfg.tokens = 4;
  cfg.heads = 2;
  cfg.d_expert = 4;
  cfg.variant = v;
  cfg.init_seed = seed;
  return cfg;
}

SampleRecord record(std::uint64_t seed, bool fl, bool t1c,
                    Pathology path = Pathology::Astrocytoma) {
  Rng rng(seed);
  SampleRecord r;
  r.id = "r" + std::to_string(seed);
  r.center = Center::RJ;
  if (fl) r.fl_raw = gaussian_row(6, rng, 1.0);
  if (t1c) r.t1c_raw = gaussian_row(6, rng, 1.0);
  r.labels = label_from_pathology(path);
  return r;
}

}  // namespace

TEST_CASE("variant names round-trip") {
  for (Variant v : {Variant::Full, Variant::NoCggm, Variant::NoDwefm})
    CHECK(variant_from_name(variant_name(v)) == v);
  CHECK(variant_name(Variant::NoCggm) == "no_cggm");
  CHECK_THROWS_AS(variant_from_name("nocggm"), std::runtime_error);
}

TEST_CASE("model config: expert width defaults to half the model width") {
  ModelConfig cfg;
  CHECK(cfg.expert_dim() == 32);
  cfg.d_expert = 12;
  CHECK(cfg.expert_dim() == 12);
  cfg.tokens = 7;  // 64 % 7 != 0
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("model: variants own exactly their parameter groups") {
  Model full = make_model(small_config(Variant::Full));
  Model no_cggm = make_model(small_config(Variant::NoCggm));
  Model no_dwefm = make_model(small_config(Variant::NoDwefm));

  CHECK(full.params.has("cggm.fl_to_t1c.wq"));
  CHECK(full.params.has("dwefm.router_w"));
  CHECK(!full.params.has("fusion.w"));

  CHECK(!no_cggm.params.has("cggm.fl_to_t1c.wq"));
  CHECK(no_cggm.params.has("dwefm.router_w"));

  CHECK(no_dwefm.params.has("cggm.fl_to_t1c.wq"));
  CHECK(!no_dwefm.params.has("dwefm.router_w"));
  CHECK(no_dwefm.params.has("fusion.w"));
}

TEST_CASE("model: same seed reproduces identical parameters") {
  Model a = make_model(small_config(Variant::Full));
  Model b = make_model(small_config(Variant::Full));
  for (const auto& [name, p] : a.params)
    CHECK(p.value == b.params.at(name).value);

  Model c = make_model(small_config(Variant::Full, 12));
  CHECK(c.params.at("stem_fl.w1").value != a.params.at("stem_fl.w1").value);
}

TEST_CASE("model: shared modules share their initialization across variants") {
  Model full = make_model(small_config(Variant::Full));
  Model no_cggm = make_model(small_config(Variant::NoCggm));
  Model no_dwefm = make_model(small_config(Variant::NoDwefm));

  // Stems are drawn first, so every variant agrees on them.
  for (const char* name : {"stem_fl.w1", "stem_fl.w2", "stem_t1c.w1"}) {
    CHECK(full.params.at(name).value == no_cggm.params.at(name).value);
    CHECK(full.params.at(name).value == no_dwefm.params.at(name).value);
  }
  // The generator draw precedes fusion, so full and no_dwefm agree on it.
  CHECK(full.params.at("cggm.fl_to_t1c.wq").value ==
        no_dwefm.params.at("cggm.fl_to_t1c.wq").value);
}

TEST_CASE("model: forward fills caches and yields valid predictions") {
  Model m = make_model(small_config(Variant::Full));
  SampleRecord complete = record(1, true, true);
  ModelCache cache;
  PredictionSet p = model_forward(m, complete, &cache);
  CHECK(cache.fl_present);
  CHECK(cache.t1c_present);
  CHECK(!cache.imputed);
  CHECK(std::abs(p.idh_prob.sum() - 1.0) < 1e-12);
  CHECK(std::abs(p.path_prob.sum() - 1.0) < 1e-12);

  SampleRecord no_fl = record(2, false, true);
  ModelCache c2;
  model_forward(m, no_fl, &c2);
  CHECK(c2.imputed);
  CHECK(c2.imputed_seq == Sequence::FL);
  CHECK(c2.f_fl.cwiseAbs().maxCoeff() > 0.0);  // synthesized, not zero
}

TEST_CASE("model: no_cggm zero-fills the missing side") {
  Model m = make_model(small_config(Variant::NoCggm));
  SampleRecord no_t1c = record(3, true, false);
  ModelCache cache;
  model_forward(m, no_t1c, &cache);
  CHECK(!cache.imputed);
  CHECK(cache.f_t1c.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("model: both sequences absent is rejected") {
  Model m = make_model(small_config(Variant::Full));
  SampleRecord empty = record(4, false, false);
  CHECK_THROWS_AS(model_forward(m, empty), std::invalid_argument);
}

TEST_CASE("model: on complete records no_cggm matches full exactly") {
  // The generator is dead weight when nothing is missing; with the live
  // parameter groups copied over, the two graphs coincide.
  Model full = make_model(small_config(Variant::Full));
  Model lite = make_model(small_config(Variant::NoCggm));
  for (auto& [name, p] : lite.params)
    p.value = full.params.at(name).value;

  for (std::uint64_t s : {5, 6, 7}) {
    SampleRecord r = record(s, true, true);
    PredictionSet a = model_forward(full, r);
    PredictionSet b = model_forward(lite, r);
    CHECK(a.idh_logits == b.idh_logits);
    CHECK(a.codel_logits == b.codel_logits);
    CHECK(a.path_logits == b.path_logits);
  }
}

TEST_CASE("model: stem_latents covers only the present sides") {
  Model m = make_model(small_config(Variant::Full));
  FeaturePair both = stem_latents(m, record(8, true, true));
  CHECK(both.f_fl.size() == 8);
  CHECK(both.f_t1c.size() == 8);
  FeaturePair only_fl = stem_latents(m, record(9, true, false));
  CHECK(only_fl.f_fl.size() == 8);
  CHECK(only_fl.f_t1c.size() == 0);
}

TEST_CASE("model: checkpoint round trip preserves bits and provenance") {
  const std::string path = "/tmp/gmenet_model_test.ckpt";
  Model m = make_model(small_config(Variant::NoDwefm, 21));
  ModelCheckpointInfo info;
  info.mode = "fs";
  info.split_seed = 77;
  info.fold = 2;
  info.n_folds = 4;
  info.test_frac = 0.3;
  info.independent_center = Center::TH;
  save_model(path, m, info);

  ModelCheckpointInfo back;
  Model loaded = load_model(path, &back);
  std::remove(path.c_str());

  CHECK(loaded.cfg.variant == Variant::NoDwefm);
  CHECK(loaded.cfg.raw_dim == m.cfg.raw_dim);
  CHECK(loaded.cfg.init_seed == 21);
  CHECK(back.mode == "fs");
  CHECK(back.split_seed == 77);
  CHECK(back.fold == 2);
  CHECK(back.n_folds == 4);
  CHECK(back.test_frac == 0.3);
  CHECK(back.independent_center == Center::TH);
  CHECK(loaded.params.size() == m.params.size());
  for (const auto& [name, p] : m.params) {
    const MatX& l = loaded.params.at(name).value;
    for (Index i = 0; i < p.value.size(); ++i)
      CHECK(l.data()[i] == p.value.data()[i]);
  }

  // The reloaded graph is wired to its own store.
  SampleRecord r = record(10, true, true);
  PredictionSet a = model_forward(m, r);
  PredictionSet b = model_forward(loaded, r);
  CHECK(a.idh_logits == b.idh_logits);
}

TEST_CASE("model: moving preserves wiring") {
  Model m = make_model(small_config(Variant::Full));
  SampleRecord r = record(11, true, true);
  PredictionSet before = model_forward(m, r);
  Model moved = std::move(m);
  PredictionSet after = model_forward(moved, r);
  CHECK(before.idh_logits == after.idh_logits);
  CHECK(before.path_logits == after.path_logits);
}
