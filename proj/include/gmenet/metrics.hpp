#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gmenet/losses.hpp"
#include "gmenet/types.hpp"

namespace gmenet {

// Pairwise concordance probability with half credit for ties (equals
// trapezoidal ROC integration), computed from average ranks. Absent when the
// labels contain a single class.
std::optional<double> roc_auc(const std::vector<double>& scores,
                              const std::vector<int>& labels);

struct TaskMetrics {
  double acc = 0.0;
  std::optional<double> auc;
  double spe = 0.0;
  double sen = 0.0;
  MatX confusion;  // rows = ground truth, cols = prediction
  std::size_t n = 0;
};

struct MetricsReport {
  TaskMetrics idh;
  TaskMetrics codel;
  TaskMetrics path;
  std::size_t n = 0;

  // Mean of the per-task AUCs that are defined (pathology AUC is itself a
  // macro one-vs-rest mean).
  std::optional<double> mean_auc() const;
};

// Binary tasks: positive class 1 (mutant / codeleted), SEN = TP/(TP+FN),
// SPE = TN/(TN+FP), AUC on the positive-class probability. Pathology: micro
// ACC, macro one-vs-rest AUC, micro SEN (= ACC), macro per-class SPE.
MetricsReport compute_metrics(const std::vector<PredictionSet>& preds,
                              const std::vector<LabelSet>& labels);

// Deterministic fixed 6-decimal, classic-locale formatting shared by every
// CSV emitter.
std::string csv_num(double v);

// CSV emission. All numbers fixed at 6 decimals so identical inputs produce
// identical bytes; absent AUCs become empty fields.
extern const char* const kMetricsCsvHeader;  // split,task,acc,auc,spe,sen,n
void write_metrics_rows(std::ostream& out, const std::string& split,
                        const MetricsReport& report);

// ROC points (task,threshold,fpr,tpr) for both binary tasks and each
// pathology one-vs-rest curve.
void write_roc_csv(std::ostream& out, const std::vector<PredictionSet>& preds,
                   const std::vector<LabelSet>& labels);

// One block per task: a title row, a header of predicted classes, then one
// row per ground-truth class. Blocks are separated by blank lines.
void write_confusion_csv(std::ostream& out, const MetricsReport& report);

}  // namespace gmenet
