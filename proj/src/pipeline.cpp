#include "gmenet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>

#include "gmenet/check.hpp"
#include "gmenet/checkpoint.hpp"
#include "gmenet/optim.hpp"
#include "gmenet/random.hpp"

namespace gmenet {
namespace {

constexpr std::uint64_t kBatchStream = 0x62617463;  // "batc"
constexpr std::uint64_t kMaskStream = 0x6d61736b;   // "mask"

// Shuffle-and-cycle batch order; reshuffles at every epoch boundary.
class BatchCycler {
 public:
  BatchCycler(std::size_t n, std::uint64_t seed) : rng_(seed), order_(n) {
    require(n > 0, "empty training pool");
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  std::vector<std::size_t> next(std::size_t batch) {
    std::vector<std::size_t> out;
    out.reserve(batch);
    while (out.size() < batch) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

// Value-copies one parameter group between stores; the group must exist with
// identical names and shapes on both sides.
void copy_group(const ParamStore& src, ParamStore& dst,
                const std::string& prefix) {
  std::set<std::string> expected;
  for (const auto& [name, p] : dst)
    if (starts_with(name, prefix)) expected.insert(name);
  for (const auto& [name, p] : src) {
    if (!starts_with(name, prefix)) continue;
    require(expected.erase(name) == 1,
            "generator parameter not in model: " + name);
    Param& d = dst.at(name);
    require(d.value.rows() == p.value.rows() &&
                d.value.cols() == p.value.cols(),
            "generator shape mismatch: " + name);
    d.value = p.value;
  }
  if (!expected.empty())
    throw std::invalid_argument("generator source lacks parameter: " +
                                *expected.begin());
}

SplitPlan make_split(const Dataset& ds, const RunConfig& rc) {
  SplitPlan plan =
      split_fig1e(ds.records, rc.effective_split_seed(ds),
                  rc.independent_center, rc.n_folds, rc.test_frac);
  validate_split(plan, ds.records);
  return plan;
}

TaskMetrics mean_task(const std::vector<const TaskMetrics*>& parts) {
  TaskMetrics m;
  double auc_sum = 0.0, n_sum = 0.0;
  int auc_cnt = 0;
  for (const TaskMetrics* t : parts) {
    m.acc += t->acc;
    m.spe += t->spe;
    m.sen += t->sen;
    n_sum += static_cast<double>(t->n);
    if (t->auc) {
      auc_sum += *t->auc;
      ++auc_cnt;
    }
    if (m.confusion.size() == 0)
      m.confusion = t->confusion;
    else if (t->confusion.size() == m.confusion.size())
      m.confusion += t->confusion;
  }
  const double k = static_cast<double>(parts.size());
  m.acc /= k;
  m.spe /= k;
  m.sen /= k;
  if (auc_cnt > 0) m.auc = auc_sum / auc_cnt;
  m.n = static_cast<std::size_t>(std::llround(n_sum / k));
  return m;
}

MetricsReport mean_report(const std::vector<MetricsReport>& reports) {
  require(!reports.empty(), "mean over zero reports");
  MetricsReport mean;
  std::vector<const TaskMetrics*> idh, codel, path;
  double n_sum = 0.0;
  for (const MetricsReport& r : reports) {
    idh.push_back(&r.idh);
    codel.push_back(&r.codel);
    path.push_back(&r.path);
    n_sum += static_cast<double>(r.n);
  }
  mean.idh = mean_task(idh);
  mean.codel = mean_task(codel);
  mean.path = mean_task(path);
  mean.n = static_cast<std::size_t>(
      std::llround(n_sum / static_cast<double>(reports.size())));
  return mean;
}

}  // namespace

void RunConfig::validate() const {
  require(d_model >= 2, "d_model must be at least 2");
  require(tokens >= 1 && d_model % tokens == 0, "tokens must divide d_model");
  require(heads >= 1, "heads must be positive");
  require(batch_size >= 1, "batch_size must be positive");
  require(pretrain_steps >= 0 && train_steps >= 0,
          "step counts must be nonnegative");
  require(lr > 0.0 && pretrain_lr > 0.0, "learning rates must be positive");
  require(weight_decay >= 0.0, "weight_decay must be nonnegative");
  require(mask_prob >= 0.0 && mask_prob <= 1.0, "mask_prob outside [0,1]");
  require(n_folds >= 2, "n_folds must be at least 2");
  require(test_frac > 0.0 && test_frac < 1.0, "test_frac outside (0,1)");
}

ModelConfig RunConfig::model_config(Index raw_dim, Variant variant) const {
  ModelConfig mc;
  mc.raw_dim = raw_dim;
  mc.d_model = d_model;
  mc.tokens = tokens;
  mc.heads = heads;
  mc.d_expert = d_expert;
  mc.variant = variant;
  mc.init_seed = seed;
  mc.validate();
  return mc;
}

std::uint64_t RunConfig::effective_split_seed(const Dataset& ds) const {
  return split_seed != 0 ? split_seed : ds.seed;
}

RunConfig run_config_from(const Config& cfg) {
  RunConfig rc;
  rc.d_model = static_cast<Index>(cfg.integer("d_model", rc.d_model));
  rc.tokens = static_cast<Index>(cfg.integer("tokens", rc.tokens));
  rc.heads = static_cast<int>(cfg.integer("heads", rc.heads));
  rc.d_expert = static_cast<Index>(cfg.integer("d_expert", rc.d_expert));
  rc.batch_size = static_cast<int>(cfg.integer("batch_size", rc.batch_size));
  rc.pretrain_steps =
      static_cast<int>(cfg.integer("pretrain_steps", rc.pretrain_steps));
  rc.train_steps =
      static_cast<int>(cfg.integer("train_steps", rc.train_steps));
  rc.lr = cfg.num("lr", rc.lr);
  rc.pretrain_lr = cfg.num("pretrain_lr", rc.pretrain_lr);
  rc.weight_decay = cfg.num("weight_decay", rc.weight_decay);
  rc.mask_prob = cfg.num("mask_prob", rc.mask_prob);
  rc.n_folds = static_cast<int>(cfg.integer("n_folds", rc.n_folds));
  rc.test_frac = cfg.num("test_frac", rc.test_frac);
  rc.independent_center = center_from_name(
      cfg.str("independent_center", center_name(rc.independent_center)));
  rc.split_seed = cfg.uinteger("split_seed", rc.split_seed);
  rc.smooth_counts = cfg.flag("smooth_counts", rc.smooth_counts);
  rc.seed = cfg.uinteger("seed", rc.seed);
  rc.validate();
  return rc;
}

CohortConfig cohort_config_from(const Config& cfg) {
  CohortConfig cc;

  auto int_array6 = [&](const char* key, std::array<int, kNumCenters>& out) {
    std::vector<double> def(out.begin(), out.end());
    const auto v = cfg.num_list(key, def);
    require(v.size() == out.size(),
            std::string(key) + ": expected " + std::to_string(out.size()) +
                " comma-separated values");
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = static_cast<int>(std::llround(v[i]));
  };
  auto num_array = [&](const char* key, auto& out) {
    std::vector<double> def(out.begin(), out.end());
    const auto v = cfg.num_list(key, def);
    require(v.size() == out.size(),
            std::string(key) + ": expected " + std::to_string(out.size()) +
                " comma-separated values");
    std::copy(v.begin(), v.end(), out.begin());
  };

  int_array6("counts", cc.counts);
  if (cfg.has("miss")) {
    num_array("miss", cc.miss_fl);
    cc.miss_t1c = cc.miss_fl;
  }
  num_array("miss_fl", cc.miss_fl);
  num_array("miss_t1c", cc.miss_t1c);
  num_array("class_prior", cc.class_prior);
  cc.center_shift = cfg.num("center_shift", cc.center_shift);
  cc.independent_center = center_from_name(
      cfg.str("independent_center", center_name(cc.independent_center)));
  cc.independent_shift_boost =
      cfg.num("independent_shift_boost", cc.independent_shift_boost);
  cc.coupling = cfg.num("coupling", cc.coupling);
  cc.class_sep = cfg.num("class_sep", cc.class_sep);
  cc.noise = cfg.num("noise", cc.noise);
  cc.raw_dim = static_cast<Index>(cfg.integer("raw_dim", cc.raw_dim));
  cc.seed = cfg.uinteger("seed", cc.seed);
  cc.validate();
  return cc;
}

std::vector<const SampleRecord*> records_by_id(
    const Dataset& ds, const std::vector<std::string>& ids) {
  std::map<std::string, const SampleRecord*> index;
  for (const SampleRecord& r : ds.records) index.emplace(r.id, &r);
  std::vector<const SampleRecord*> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) {
    const auto it = index.find(id);
    require(it != index.end(), "unknown record id: " + id);
    out.push_back(it->second);
  }
  return out;
}

PretrainResult pretrain_cggm(const Dataset& ds, const RunConfig& rc,
                             const std::string& out_ckpt, int fold,
                             std::ostream* log) {
  rc.validate();
  PretrainResult res;
  res.plan = make_split(ds, rc);
  const auto recs = records_by_id(ds, res.plan.train_ids(fold, Mode::FS));
  require(!recs.empty(), "pretraining pool is empty");

  res.model = make_model(rc.model_config(ds.raw_dim, Variant::Full));

  std::vector<FeaturePair> pairs;
  pairs.reserve(recs.size());
  for (const SampleRecord* r : recs) {
    require(r->complete(), "pretraining requires complete records: " + r->id);
    pairs.push_back(stem_latents(res.model, *r));
  }

  // Stems stay fixed: everything but the generator is excluded from updates.
  res.model.params.freeze_group("");
  res.model.params.unfreeze_group("cggm.");

  AdamWConfig oc;
  oc.lr = rc.pretrain_lr;
  oc.weight_decay = rc.weight_decay;
  AdamW opt(oc);
  BatchCycler cycler(pairs.size(), mix_seed(rc.seed, kBatchStream));
  Rng mask_rng(mix_seed(rc.seed, kMaskStream));

  res.curve.reserve(static_cast<std::size_t>(rc.pretrain_steps));
  for (int step = 0; step < rc.pretrain_steps; ++step) {
    const auto idx = cycler.next(static_cast<std::size_t>(rc.batch_size));
    std::vector<FeaturePair> batch;
    batch.reserve(idx.size());
    for (std::size_t i : idx) batch.push_back(pairs[i]);
    res.model.params.zero_grads();
    const ReconLoss l =
        cggm_pretrain_step(res.model.cggm, batch, rc.mask_prob, mask_rng);
    opt.step(res.model.params);
    res.curve.push_back(l);
    if (log && (step % 100 == 0 || step + 1 == rc.pretrain_steps))
      *log << "pretrain step " << step << " loss " << l.total << "\n";
  }

  if (!out_ckpt.empty()) {
    const ModelConfig mc = rc.model_config(ds.raw_dim, Variant::Full);
    CheckpointHeader h;
    h.kind = "cggm";
    h.raw_dim = mc.raw_dim;
    h.d_model = mc.d_model;
    h.tokens = mc.tokens;
    h.heads = mc.heads;
    h.d_expert = mc.expert_dim();
    h.init_seed = rc.seed;
    save_checkpoint(out_ckpt, h, res.model.params, "cggm.");

    std::ofstream curve(out_ckpt + ".curve.csv");
    require_io(curve.good(), "cannot write " + out_ckpt + ".curve.csv");
    curve << "step,mse,kl,cycle,total\n";
    for (std::size_t i = 0; i < res.curve.size(); ++i) {
      const ReconLoss& l = res.curve[i];
      curve << i << ',' << csv_num(l.mse) << ',' << csv_num(l.kl) << ','
            << csv_num(l.cycle) << ',' << csv_num(l.total) << '\n';
    }
  }
  return res;
}

TrainResult train_model(const Dataset& ds, const RunConfig& rc,
                        const TrainOptions& opt, std::ostream* log) {
  rc.validate();
  require(!(opt.generator && !opt.generator_ckpt.empty()),
          "train: pass the generator either in memory or as a file, not both");

  TrainResult res;
  res.plan = make_split(ds, rc);
  res.info.mode = mode_name(opt.mode);
  res.info.split_seed = rc.effective_split_seed(ds);
  res.info.fold = opt.fold;
  res.info.n_folds = rc.n_folds;
  res.info.test_frac = rc.test_frac;
  res.info.independent_center = rc.independent_center;

  const auto ids = res.plan.train_ids(opt.fold, opt.mode);
  const auto recs = records_by_id(ds, ids);
  require(!recs.empty(), "training pool is empty");

  // No test-set record may ever contribute a gradient.
  std::set<std::string> test_ids(res.plan.internal_test.begin(),
                                 res.plan.internal_test.end());
  test_ids.insert(res.plan.independent_test.begin(),
                  res.plan.independent_test.end());
  for (const std::string& id : ids)
    require(test_ids.count(id) == 0,
            "protocol violation: training on test record " + id);

  res.model = make_model(rc.model_config(ds.raw_dim, opt.variant));

  const bool has_generator = opt.generator || !opt.generator_ckpt.empty();
  if (opt.variant == Variant::NoCggm) {
    require(!has_generator,
            "no_cggm variant forbids a pretrained generator");
  } else if (opt.generator) {
    copy_group(*opt.generator, res.model.params, "cggm.");
    res.model.params.freeze_group("cggm.");
  } else if (!opt.generator_ckpt.empty()) {
    const CheckpointHeader h = read_checkpoint_header(opt.generator_ckpt);
    require_io(h.kind == "cggm",
               opt.generator_ckpt + ": not a generator checkpoint");
    require_io(h.raw_dim == ds.raw_dim && h.d_model == rc.d_model &&
                   h.tokens == rc.tokens && h.heads == rc.heads,
               opt.generator_ckpt + ": dimension mismatch with this run");
    if (h.init_seed != rc.seed && log)
      *log << "warning: generator pretrained at seed " << h.init_seed
           << ", training at seed " << rc.seed
           << "; stem latents differ from the pretraining distribution\n";
    load_checkpoint(opt.generator_ckpt, res.model.params, "cggm.");
    res.model.params.freeze_group("cggm.");
  }

  std::vector<LabelSet> train_labels;
  train_labels.reserve(recs.size());
  for (const SampleRecord* r : recs) train_labels.push_back(r->labels);
  const ClassCounts counts = count_labels(train_labels, rc.smooth_counts);
  counts.validate();

  AdamWConfig oc;
  oc.lr = rc.lr;
  oc.weight_decay = rc.weight_decay;
  AdamW optim(oc);
  BatchCycler cycler(recs.size(), mix_seed(rc.seed, kBatchStream));

  res.curve.reserve(static_cast<std::size_t>(rc.train_steps));
  for (int step = 0; step < rc.train_steps; ++step) {
    const auto idx = cycler.next(static_cast<std::size_t>(rc.batch_size));
    const double inv_b = 1.0 / static_cast<double>(idx.size());
    res.model.params.zero_grads();
    double loss = 0.0;
    for (std::size_t i : idx) {
      ModelCache cache;
      const PredictionSet pred = model_forward(res.model, *recs[i], &cache);
      TotalLossGrads g;
      loss += total_loss(pred, recs[i]->labels, counts, &g);
      g.idh *= inv_b;
      g.codel *= inv_b;
      g.path *= inv_b;
      model_backward(res.model, g, cache);
    }
    optim.step(res.model.params);
    res.curve.push_back(loss * inv_b);
    if (log && (step % 200 == 0 || step + 1 == rc.train_steps))
      *log << "train step " << step << " loss " << loss * inv_b << "\n";
  }
  return res;
}

EvalResult evaluate_model(const Model& m,
                          const std::vector<const SampleRecord*>& records) {
  require(!records.empty(), "evaluation set is empty");
  EvalResult out;
  out.ids.reserve(records.size());
  out.preds.reserve(records.size());
  out.labels.reserve(records.size());
  for (const SampleRecord* r : records) {
    require(r->complete(),
            "evaluation requires complete sequences: " + r->id);
    out.ids.push_back(r->id);
    out.preds.push_back(model_forward(m, *r));
    out.labels.push_back(r->labels);
  }
  out.report = compute_metrics(out.preds, out.labels);
  return out;
}

void write_predictions_csv(std::ostream& out, const EvalResult& eval) {
  out << "id,idh_true,idh_pred,idh_p1,codel_true,codel_pred,codel_p1,"
         "path_true,path_pred,path_p0,path_p1,path_p2\n";
  for (std::size_t i = 0; i < eval.ids.size(); ++i) {
    const PredictionSet& p = eval.preds[i];
    const LabelSet& l = eval.labels[i];
    out << eval.ids[i] << ',' << static_cast<int>(l.idh) << ',' << p.idh_pred
        << ',' << csv_num(p.idh_prob[1]) << ',' << static_cast<int>(l.codel)
        << ',' << p.codel_pred << ',' << csv_num(p.codel_prob[1]) << ','
        << static_cast<int>(l.pathology) << ',' << p.path_pred << ','
        << csv_num(p.path_prob[0]) << ',' << csv_num(p.path_prob[1]) << ','
        << csv_num(p.path_prob[2]) << '\n';
  }
}

ImputationEval eval_imputation(const Model& m,
                               const std::vector<const SampleRecord*>& train,
                               const std::vector<const SampleRecord*>& held) {
  require(m.has_cggm(), "imputation eval needs a generator");
  require(!train.empty() && !held.empty(),
          "imputation eval: empty record set");
  const double d = static_cast<double>(m.cfg.d_model);

  RowVecX mean_fl = RowVecX::Zero(m.cfg.d_model);
  RowVecX mean_t1c = RowVecX::Zero(m.cfg.d_model);
  for (const SampleRecord* r : train) {
    require(r->complete(), "imputation eval: incomplete training record");
    const FeaturePair p = stem_latents(m, *r);
    mean_fl += p.f_fl;
    mean_t1c += p.f_t1c;
  }
  mean_fl /= static_cast<double>(train.size());
  mean_t1c /= static_cast<double>(train.size());

  ImputationEval ev;
  for (const SampleRecord* r : held) {
    require(r->complete(), "imputation eval: incomplete held-out record");
    const FeaturePair p = stem_latents(m, *r);
    const RowVecX fl_hat =
        cggm_impute_gate(p.f_t1c, m.cggm.t1c_to_fl, m.cggm.att);
    const RowVecX t1c_hat =
        cggm_impute_gate(p.f_fl, m.cggm.fl_to_t1c, m.cggm.att);
    ev.imputed_mse += (fl_hat - p.f_fl).squaredNorm() / d +
                      (t1c_hat - p.f_t1c).squaredNorm() / d;
    ev.zero_mse += p.f_fl.squaredNorm() / d + p.f_t1c.squaredNorm() / d;
    ev.mean_mse += (mean_fl - p.f_fl).squaredNorm() / d +
                   (mean_t1c - p.f_t1c).squaredNorm() / d;
  }
  const double sides = 2.0 * static_cast<double>(held.size());
  ev.imputed_mse /= sides;
  ev.zero_mse /= sides;
  ev.mean_mse /= sides;
  return ev;
}

CvResult cross_validate(const Dataset& ds, const RunConfig& rc, Mode mode,
                        const std::string& out_csv, std::ostream* log) {
  rc.validate();
  const SplitPlan plan = make_split(ds, rc);
  const auto internal = records_by_id(ds, plan.internal_test);
  const auto independent = records_by_id(ds, plan.independent_test);

  CvResult cv;
  for (int fold = 0; fold < rc.n_folds; ++fold) {
    if (log) *log << "fold " << fold << ": pretraining generator\n";
    PretrainResult pre = pretrain_cggm(ds, rc, "", fold, log);

    if (log) *log << "fold " << fold << ": fine-tuning\n";
    TrainOptions to;
    to.mode = mode;
    to.variant = Variant::Full;
    to.fold = fold;
    to.generator = &pre.model.params;
    const TrainResult tr = train_model(ds, rc, to, log);

    cv.internal_folds.push_back(evaluate_model(tr.model, internal).report);
    cv.independent_folds.push_back(
        evaluate_model(tr.model, independent).report);
  }
  cv.internal_mean = mean_report(cv.internal_folds);
  cv.independent_mean = mean_report(cv.independent_folds);

  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    require_io(out.good(), "cannot write " + out_csv);
    out << kMetricsCsvHeader << '\n';
    for (int fold = 0; fold < rc.n_folds; ++fold) {
      const std::string tag = "fold" + std::to_string(fold);
      write_metrics_rows(out, tag + "_internal", cv.internal_folds[fold]);
      write_metrics_rows(out, tag + "_independent",
                         cv.independent_folds[fold]);
    }
    write_metrics_rows(out, "mean_internal", cv.internal_mean);
    write_metrics_rows(out, "mean_independent", cv.independent_mean);
  }
  return cv;
}

std::vector<VariantEval> run_ablation(const Dataset& ds, const RunConfig& rc,
                                      const std::string& out_csv,
                                      std::ostream* log) {
  rc.validate();
  if (log) *log << "ablation: pretraining shared generator\n";
  const PretrainResult pre = pretrain_cggm(ds, rc, "", -1, log);
  const auto internal = records_by_id(ds, pre.plan.internal_test);
  const auto independent = records_by_id(ds, pre.plan.independent_test);

  std::vector<VariantEval> evals;
  for (Variant v : {Variant::Full, Variant::NoCggm, Variant::NoDwefm}) {
    if (log) *log << "ablation: training variant " << variant_name(v) << "\n";
    TrainOptions to;
    to.mode = Mode::MS;
    to.variant = v;
    to.fold = -1;
    if (v != Variant::NoCggm) to.generator = &pre.model.params;
    const TrainResult tr = train_model(ds, rc, to, log);

    VariantEval ve;
    ve.variant = v;
    ve.internal = evaluate_model(tr.model, internal).report;
    ve.independent = evaluate_model(tr.model, independent).report;
    evals.push_back(std::move(ve));
  }

  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    require_io(out.good(), "cannot write " + out_csv);
    out << kMetricsCsvHeader << '\n';
    for (const VariantEval& ve : evals) {
      write_metrics_rows(out, variant_name(ve.variant) + "_internal",
                         ve.internal);
      write_metrics_rows(out, variant_name(ve.variant) + "_independent",
                         ve.independent);
    }
  }
  return evals;
}

GradSuite run_grad_suite() {
  GradSuite suite;

  // Small dims keep finite differences fast while exercising every path.
  ModelConfig mc;
  mc.raw_dim = 6;
  mc.d_model = 8;
  mc.tokens = 4;
  mc.heads = 2;
  mc.d_expert = 4;
  mc.init_seed = 7;

  Rng rng(mix_seed(99, 0x5eed));
  std::vector<SampleRecord> samples(3);
  samples[0].id = "g0";
  samples[0].fl_raw = gaussian_row(mc.raw_dim, rng, 1.0);
  samples[0].t1c_raw = gaussian_row(mc.raw_dim, rng, 1.0);
  samples[0].labels = label_from_pathology(Pathology::Oligodendroglioma);
  samples[1].id = "g1";  // FLAIR missing -> t1c_to_fl imputation path
  samples[1].t1c_raw = gaussian_row(mc.raw_dim, rng, 1.0);
  samples[1].labels = label_from_pathology(Pathology::Astrocytoma);
  samples[2].id = "g2";  // T1c missing -> fl_to_t1c imputation path
  samples[2].fl_raw = gaussian_row(mc.raw_dim, rng, 1.0);
  samples[2].labels = label_from_pathology(Pathology::Glioblastoma);

  std::vector<LabelSet> labels;
  for (const SampleRecord& s : samples) labels.push_back(s.labels);
  const ClassCounts counts = count_labels(labels);

  const auto supervised = [&](Variant v, const std::string& name) {
    ModelConfig cfg = mc;
    cfg.variant = v;
    Model m = make_model(cfg);
    const double inv = 1.0 / static_cast<double>(samples.size());

    m.params.zero_grads();
    for (const SampleRecord& s : samples) {
      ModelCache cache;
      const PredictionSet pred = model_forward(m, s, &cache);
      TotalLossGrads g;
      total_loss(pred, s.labels, counts, &g);
      g.idh *= inv;
      g.codel *= inv;
      g.path *= inv;
      model_backward(m, g, cache);
    }
    const auto loss_fn = [&]() {
      double total = 0.0;
      for (const SampleRecord& s : samples)
        total += total_loss(model_forward(m, s), s.labels, counts);
      return total * inv;
    };
    suite.cases.emplace_back(name, grad_check(loss_fn, m.params));
  };
  supervised(Variant::Full, "supervised_full");
  supervised(Variant::NoCggm, "supervised_no_cggm");
  supervised(Variant::NoDwefm, "supervised_no_dwefm");

  {
    Model m = make_model(mc);
    std::vector<FeaturePair> batch(2);
    for (FeaturePair& p : batch) {
      p.f_fl = gaussian_row(mc.d_model, rng, 1.0);
      p.f_t1c = gaussian_row(mc.d_model, rng, 1.0);
    }
    const std::vector<MaskDraw> masks = {{true, false}, {false, true}};

    m.params.freeze_group("");
    m.params.unfreeze_group("cggm.");
    m.params.zero_grads();
    cggm_masked_step(m.cggm, batch, masks);

    const auto loss_fn = [&]() {
      double total = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const bool fl_masked = masks[i].fl;
        const RowVecX& src = fl_masked ? batch[i].f_t1c : batch[i].f_fl;
        const RowVecX& tgt = fl_masked ? batch[i].f_fl : batch[i].f_t1c;
        const CggmDirection& synth =
            fl_masked ? m.cggm.t1c_to_fl : m.cggm.fl_to_t1c;
        const CggmDirection& back =
            fl_masked ? m.cggm.fl_to_t1c : m.cggm.t1c_to_fl;
        const RowVecX f_m_hat = cggm_impute_gate(src, synth, m.cggm.att);
        const RowVecX f_u_hat =
            cggm_cycle_reconstruct(f_m_hat, back, m.cggm.att);
        total += recon_loss(f_m_hat, tgt, f_u_hat, src).total;
      }
      return total / static_cast<double>(batch.size());
    };
    suite.cases.emplace_back("generator_masked", grad_check(loss_fn, m.params));
  }

  for (const auto& [name, rep] : suite.cases)
    suite.max_rel_err = std::max(suite.max_rel_err, rep.max_rel_err);
  return suite;
}

}  // namespace gmenet
