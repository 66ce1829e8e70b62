#include "gmenet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "gmenet/check.hpp"

namespace gmenet {

std::string csv_num(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

namespace {

std::string fmt6(double v) { return csv_num(v); }

std::string fmt6(const std::optional<double>& v) {
  return v ? fmt6(*v) : std::string{};
}

MatX confusion_matrix(const std::vector<int>& truth,
                      const std::vector<int>& pred, int n_classes) {
  MatX conf = MatX::Zero(n_classes, n_classes);
  for (std::size_t i = 0; i < truth.size(); ++i)
    conf(truth[i], pred[i]) += 1.0;
  return conf;
}

// Class-c specificity from a confusion matrix: fraction of true non-c
// correctly kept out of column c.
std::optional<double> class_specificity(const MatX& conf, int c) {
  const double truth_c = conf.row(c).sum();
  const double negatives = conf.sum() - truth_c;
  if (negatives <= 0.0) return std::nullopt;
  const double fp = conf.col(c).sum() - conf(c, c);
  return (negatives - fp) / negatives;
}

TaskMetrics binary_metrics(const std::vector<double>& pos_scores,
                           const std::vector<int>& truth,
                           const std::vector<int>& pred) {
  TaskMetrics m;
  m.n = truth.size();
  m.confusion = confusion_matrix(truth, pred, 2);
  m.acc = m.n ? m.confusion.trace() / static_cast<double>(m.n) : 0.0;
  const double tp = m.confusion(1, 1), fn = m.confusion(1, 0);
  const double tn = m.confusion(0, 0), fp = m.confusion(0, 1);
  m.sen = (tp + fn > 0.0) ? tp / (tp + fn) : 0.0;
  m.spe = (tn + fp > 0.0) ? tn / (tn + fp) : 0.0;
  m.auc = roc_auc(pos_scores, truth);
  return m;
}

}  // namespace

std::optional<double> roc_auc(const std::vector<double>& scores,
                              const std::vector<int>& labels) {
  require(scores.size() == labels.size(),
               "roc_auc: scores/labels size mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int y : labels) {
    require(y == 0 || y == 1, "roc_auc: labels must be 0/1");
    n_pos += static_cast<std::size_t>(y);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Average ranks within tie groups, then the Mann-Whitney statistic.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

std::optional<double> MetricsReport::mean_auc() const {
  double sum = 0.0;
  int cnt = 0;
  for (const auto* t : {&idh, &codel, &path})
    if (t->auc) {
      sum += *t->auc;
      ++cnt;
    }
  if (cnt == 0) return std::nullopt;
  return sum / cnt;
}

MetricsReport compute_metrics(const std::vector<PredictionSet>& preds,
                              const std::vector<LabelSet>& labels) {
  require(preds.size() == labels.size(),
               "compute_metrics: preds/labels size mismatch");
  const std::size_t n = preds.size();
  require(n > 0, "compute_metrics: empty evaluation set");

  MetricsReport rep;
  rep.n = n;

  std::vector<double> idh_scores(n), codel_scores(n);
  std::vector<int> idh_truth(n), idh_pred(n), codel_truth(n), codel_pred(n);
  std::vector<int> path_truth(n), path_pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    idh_scores[i] = preds[i].idh_prob[1];
    codel_scores[i] = preds[i].codel_prob[1];
    idh_truth[i] = static_cast<int>(labels[i].idh);
    codel_truth[i] = static_cast<int>(labels[i].codel);
    path_truth[i] = static_cast<int>(labels[i].pathology);
    idh_pred[i] = preds[i].idh_pred;
    codel_pred[i] = preds[i].codel_pred;
    path_pred[i] = preds[i].path_pred;
  }

  rep.idh = binary_metrics(idh_scores, idh_truth, idh_pred);
  rep.codel = binary_metrics(codel_scores, codel_truth, codel_pred);

  TaskMetrics& p = rep.path;
  p.n = n;
  p.confusion = confusion_matrix(path_truth, path_pred, 3);
  p.acc = p.confusion.trace() / static_cast<double>(n);
  p.sen = p.acc;  // micro-averaged recall over all samples

  double auc_sum = 0.0, spe_sum = 0.0;
  int auc_cnt = 0, spe_cnt = 0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> ovr_scores(n);
    std::vector<int> ovr_truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      ovr_scores[i] = preds[i].path_prob[c];
      ovr_truth[i] = path_truth[i] == c ? 1 : 0;
    }
    if (auto a = roc_auc(ovr_scores, ovr_truth)) {
      auc_sum += *a;
      ++auc_cnt;
    }
    if (auto s = class_specificity(p.confusion, c)) {
      spe_sum += *s;
      ++spe_cnt;
    }
  }
  if (auc_cnt > 0) p.auc = auc_sum / auc_cnt;
  p.spe = spe_cnt > 0 ? spe_sum / spe_cnt : 0.0;

  rep.path = p;
  return rep;
}

const char* const kMetricsCsvHeader = "split,task,acc,auc,spe,sen,n";

void write_metrics_rows(std::ostream& out, const std::string& split,
                        const MetricsReport& report) {
  const std::pair<const char*, const TaskMetrics*> rows[] = {
      {"idh", &report.idh}, {"codel", &report.codel}, {"path", &report.path}};
  for (const auto& [task, m] : rows)
    out << split << ',' << task << ',' << fmt6(m->acc) << ',' << fmt6(m->auc)
        << ',' << fmt6(m->spe) << ',' << fmt6(m->sen) << ',' << m->n << '\n';
}

namespace {

void write_roc_points(std::ostream& out, const std::string& task,
                      const std::vector<double>& scores,
                      const std::vector<int>& truth) {
  const std::size_t n = scores.size();
  double n_pos = 0, n_neg = 0;
  for (int y : truth) (y == 1 ? n_pos : n_neg) += 1.0;
  if (n_pos == 0 || n_neg == 0) return;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  out << task << ",inf," << fmt6(0.0) << ',' << fmt6(0.0) << '\n';
  double tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    for (std::size_t k = i; k < j; ++k)
      (truth[order[k]] == 1 ? tp : fp) += 1.0;
    out << task << ',' << fmt6(scores[order[i]]) << ',' << fmt6(fp / n_neg)
        << ',' << fmt6(tp / n_pos) << '\n';
    i = j;
  }
}

}  // namespace

void write_roc_csv(std::ostream& out, const std::vector<PredictionSet>& preds,
                   const std::vector<LabelSet>& labels) {
  require(preds.size() == labels.size(),
               "write_roc_csv: preds/labels size mismatch");
  const std::size_t n = preds.size();
  out << "task,threshold,fpr,tpr\n";

  std::vector<double> scores(n);
  std::vector<int> truth(n);

  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = preds[i].idh_prob[1];
    truth[i] = static_cast<int>(labels[i].idh);
  }
  write_roc_points(out, "idh", scores, truth);

  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = preds[i].codel_prob[1];
    truth[i] = static_cast<int>(labels[i].codel);
  }
  write_roc_points(out, "codel", scores, truth);

  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = preds[i].path_prob[c];
      truth[i] = static_cast<int>(labels[i].pathology) == c ? 1 : 0;
    }
    write_roc_points(out, "path_ovr" + std::to_string(c), scores, truth);
  }
}

void write_confusion_csv(std::ostream& out, const MetricsReport& report) {
  const std::pair<const char*, const TaskMetrics*> blocks[] = {
      {"idh", &report.idh}, {"codel", &report.codel}, {"path", &report.path}};
  bool first = true;
  for (const auto& [task, m] : blocks) {
    if (!first) out << '\n';
    first = false;
    const int k = static_cast<int>(m->confusion.rows());
    out << "task," << task << '\n';
    out << "truth\\pred";
    for (int c = 0; c < k; ++c) out << ',' << c;
    out << '\n';
    for (int r = 0; r < k; ++r) {
      out << r;
      for (int c = 0; c < k; ++c)
        out << ',' << static_cast<long long>(m->confusion(r, c));
      out << '\n';
    }
  }
}

}  // namespace gmenet
