#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "gmenet/check.hpp"
#include "gmenet/checkpoint.hpp"
#include "gmenet/config.hpp"
#include "gmenet/data.hpp"
#include "gmenet/metrics.hpp"
#include "gmenet/model.hpp"
#include "gmenet/pipeline.hpp"

namespace {

using namespace gmenet;

Config load_config(const std::string& path) {
  return path.empty() ? Config{} : Config::from_file(path);
}

RunConfig make_run_config(const std::string& config_path,
                          std::uint64_t seed_override, bool seed_given) {
  const Config cfg = load_config(config_path);
  RunConfig rc = run_config_from(cfg);
  cfg.require_all_used();
  if (seed_given) rc.seed = seed_override;
  return rc;
}

// `eval --out metrics.csv` also drops metrics_roc.csv etc. next to it.
std::string sibling(const std::string& out, const std::string& suffix) {
  const std::string ext = ".csv";
  if (out.size() > ext.size() &&
      out.compare(out.size() - ext.size(), ext.size(), ext) == 0)
    return out.substr(0, out.size() - ext.size()) + suffix + ext;
  return out + suffix + ext;
}

int cmd_synth(const std::string& config_path, const std::string& out) {
  const Config cfg = load_config(config_path);
  const CohortConfig cc = cohort_config_from(cfg);
  cfg.require_all_used();

  const Dataset ds = generate_cohort(cc);
  write_dataset(ds, out);

  std::map<Center, std::pair<int, int>> per_center;  // total, complete
  for (const SampleRecord& r : ds.records) {
    auto& [total, complete] = per_center[r.center];
    ++total;
    if (r.complete()) ++complete;
  }
  std::cout << "wrote " << ds.records.size() << " records to " << out << "\n";
  for (const auto& [center, counts] : per_center)
    std::cout << "  " << center_name(center) << ": " << counts.first
              << " records, " << counts.second << " complete\n";

  const SplitPlan plan =
      split_fig1e(ds.records, ds.seed, cc.independent_center);
  for (const std::string& w : plan.warnings)
    std::cerr << "warning: " << w << "\n";

  const std::size_t fs = plan.fs_pool_size();
  const std::size_t ms = plan.ms_pool_size();
  const std::size_t surplus = ms - fs;
  std::cout << "independent test (" << center_name(cc.independent_center)
            << "): " << plan.independent_test.size() << "\n"
            << "internal test: " << plan.internal_test.size() << "\n"
            << "FS training pool: " << fs << "\n"
            << "MS training pool: " << ms << " (incomplete surplus "
            << surplus << ")\n"
            << "MS/FS expansion ratio: " << std::fixed << std::setprecision(2)
            << (fs ? static_cast<double>(ms) / static_cast<double>(fs) : 0.0)
            << "\n";
  return 0;
}

int cmd_pretrain(const std::string& data, const std::string& config_path,
                 std::uint64_t seed, bool seed_given, int fold,
                 const std::string& out) {
  const RunConfig rc = make_run_config(config_path, seed, seed_given);
  const Dataset ds = read_dataset(data);
  const PretrainResult res = pretrain_cggm(ds, rc, out, fold, &std::cerr);
  if (!res.curve.empty())
    std::cout << "pretraining: " << res.curve.size() << " steps, loss "
              << res.curve.front().total << " -> " << res.curve.back().total
              << "\n";
  std::cout << "saved generator checkpoint to " << out << "\n";
  return 0;
}

int cmd_train(const std::string& data, const std::string& cggm,
              const std::string& mode, const std::string& variant,
              const std::string& config_path, std::uint64_t seed,
              bool seed_given, int fold, const std::string& out) {
  const RunConfig rc = make_run_config(config_path, seed, seed_given);
  const Dataset ds = read_dataset(data);

  TrainOptions to;
  to.mode = mode_from_name(mode);
  to.variant = variant_from_name(variant);
  to.fold = fold;
  to.generator_ckpt = cggm;
  const TrainResult res = train_model(ds, rc, to, &std::cerr);
  if (!res.curve.empty())
    std::cout << "training: " << res.curve.size() << " steps, loss "
              << res.curve.front() << " -> " << res.curve.back() << "\n";
  save_model(out, res.model, res.info);
  std::cout << "saved model checkpoint to " << out << "\n";
  return 0;
}

int cmd_cv(const std::string& data, const std::string& mode,
           const std::string& config_path, std::uint64_t seed, bool seed_given,
           const std::string& out) {
  const RunConfig rc = make_run_config(config_path, seed, seed_given);
  const Dataset ds = read_dataset(data);
  const CvResult cv =
      cross_validate(ds, rc, mode_from_name(mode), out, &std::cerr);
  const auto show = [](const char* name, const MetricsReport& r) {
    std::cout << name << " mean macro-AUC: "
              << (r.mean_auc() ? csv_num(*r.mean_auc()) : std::string("n/a"))
              << "\n";
  };
  show("internal", cv.internal_mean);
  show("independent", cv.independent_mean);
  std::cout << "wrote per-fold and mean metrics to " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data,
             const std::string& split, const std::string& out) {
  ModelCheckpointInfo info;
  const Model m = load_model(model_path, &info);
  const Dataset ds = read_dataset(data);
  require(ds.raw_dim == m.cfg.raw_dim,
          "dataset feature dim does not match the model");

  const SplitPlan plan =
      split_fig1e(ds.records, info.split_seed, info.independent_center,
                  info.n_folds, info.test_frac);
  const auto& ids =
      split == "internal" ? plan.internal_test : plan.independent_test;
  const EvalResult ev = evaluate_model(m, records_by_id(ds, ids));

  std::ofstream metrics(out);
  require_io(metrics.good(), "cannot write " + out);
  metrics << kMetricsCsvHeader << '\n';
  write_metrics_rows(metrics, split, ev.report);

  std::ofstream roc(sibling(out, "_roc"));
  write_roc_csv(roc, ev.preds, ev.labels);
  std::ofstream conf(sibling(out, "_confusion"));
  write_confusion_csv(conf, ev.report);
  std::ofstream preds(sibling(out, "_predictions"));
  write_predictions_csv(preds, ev);

  std::cout << split << " n=" << ev.report.n << " mean macro-AUC: "
            << (ev.report.mean_auc() ? csv_num(*ev.report.mean_auc())
                                     : std::string("n/a"))
            << "\n"
            << "wrote " << out << " (+ _roc/_confusion/_predictions)\n";
  return 0;
}

int cmd_ablate(const std::string& data, const std::string& config_path,
               std::uint64_t seed, bool seed_given, const std::string& out) {
  const RunConfig rc = make_run_config(config_path, seed, seed_given);
  const Dataset ds = read_dataset(data);
  const auto evals = run_ablation(ds, rc, out, &std::cerr);
  for (const VariantEval& ve : evals)
    std::cout << variant_name(ve.variant) << " independent mean macro-AUC: "
              << (ve.independent.mean_auc()
                      ? csv_num(*ve.independent.mean_auc())
                      : std::string("n/a"))
              << "\n";
  std::cout << "wrote ablation table to " << out << "\n";
  return 0;
}

int cmd_gradcheck() {
  const GradSuite suite = run_grad_suite();
  constexpr double kTol = 1e-4;
  for (const auto& [name, rep] : suite.cases)
    std::cout << name << ": " << rep.describe() << "\n";
  const bool ok = suite.pass(kTol);
  std::cout << (ok ? "PASS" : "FAIL") << " (max " << suite.max_rel_err
            << ", tolerance " << kTol << ")\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GMENet: gated imputation + expert fusion for dual-sequence "
               "glioma marker prediction"};
  app.require_subcommand(1);

  std::string config_path, data, out, model_path, cggm, split;
  std::string mode = "ms", variant = "full";
  std::uint64_t seed = 1;
  int fold = -1;

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  synth->add_option("--config", config_path, "cohort config file");
  synth->add_option("--out", out, "output JSONL path")->required();

  auto* pretrain =
      app.add_subcommand("pretrain", "self-supervised generator pretraining");
  pretrain->add_option("--data", data, "dataset JSONL")->required();
  pretrain->add_option("--config", config_path, "run config file");
  auto* pre_seed = pretrain->add_option("--seed", seed, "run seed");
  pretrain->add_option("--fold", fold, "restrict to one fold's pool");
  pretrain->add_option("--out", out, "generator checkpoint path")->required();

  auto* train = app.add_subcommand("train", "supervised fine-tuning");
  train->add_option("--data", data, "dataset JSONL")->required();
  train->add_option("--cggm", cggm, "pretrained generator checkpoint");
  train->add_option("--mode", mode, "training pool: fs|ms");
  train->add_option("--variant", variant, "full|no_cggm|no_dwefm");
  train->add_option("--config", config_path, "run config file");
  auto* train_seed = train->add_option("--seed", seed, "run seed");
  train->add_option("--fold", fold, "train on one fold's pool");
  train->add_option("--out", out, "model checkpoint path")->required();

  auto* cv = app.add_subcommand("cv", "five-fold cross-validation");
  cv->add_option("--data", data, "dataset JSONL")->required();
  cv->add_option("--mode", mode, "training pool: fs|ms");
  cv->add_option("--config", config_path, "run config file");
  auto* cv_seed = cv->add_option("--seed", seed, "run seed");
  cv->add_option("--out", out, "metrics CSV path")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a trained model");
  eval->add_option("--model", model_path, "model checkpoint")->required();
  eval->add_option("--data", data, "dataset JSONL")->required();
  eval->add_option("--split", split, "internal|independent")
      ->required()
      ->check(CLI::IsMember({"internal", "independent"}));
  eval->add_option("--out", out, "metrics CSV path")->required();

  auto* ablate = app.add_subcommand("ablate", "train and compare variants");
  ablate->add_option("--data", data, "dataset JSONL")->required();
  ablate->add_option("--config", config_path, "run config file");
  auto* ab_seed = ablate->add_option("--seed", seed, "run seed");
  ablate->add_option("--out", out, "comparison table CSV path")->required();

  app.add_subcommand("gradcheck", "finite-difference gradient suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(config_path, out);
    if (pretrain->parsed())
      return cmd_pretrain(data, config_path, seed, !pre_seed->empty(), fold,
                          out);
    if (train->parsed())
      return cmd_train(data, cggm, mode, variant, config_path, seed,
                       !train_seed->empty(), fold, out);
    if (cv->parsed())
      return cmd_cv(data, mode, config_path, seed, !cv_seed->empty(), out);
    if (eval->parsed()) return cmd_eval(model_path, data, split, out);
    if (ablate->parsed())
      return cmd_ablate(data, config_path, seed, !ab_seed->empty(), out);
    return cmd_gradcheck();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
