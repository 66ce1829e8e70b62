#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "gmenet/metrics.hpp"
#include "gmenet/random.hpp"

using namespace gmenet;

namespace {

// O(n^2) concordance oracle: ties in score earn half credit.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double conc = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) conc += 1.0;
      else if (s[i] == s[j]) conc += 0.5;
    }
  }
  return conc / pairs;
}

PredictionSet pred3(double p_idh1, double p_codel1, int path_class) {
  RowVecX idh(2), codel(2), path(3);
  // Logit pairs that softmax back to the requested probabilities.
  idh << std::log(1.0 - p_idh1), std::log(p_idh1);
  codel << std::log(1.0 - p_codel1), std::log(p_codel1);
  path << -4.0, -4.0, -4.0;
  path(path_class) = 4.0;
  return make_prediction(idh, codel, path);
}

LabelSet labels3(int idh, int codel, int path) {
  LabelSet l;
  l.idh = static_cast<Idh>(idh);
  l.codel = static_cast<Codel>(codel);
  l.pathology = static_cast<Pathology>(path);
  return l;
}

}  // namespace

TEST_CASE("roc_auc: textbook four-sample case") {
  const auto auc = roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1});
  REQUIRE(auc.has_value());
  CHECK(*auc == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("roc_auc: perfect, inverted, and constant scores") {
  CHECK(*roc_auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
  CHECK(*roc_auc({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}) == 0.0);
  CHECK(*roc_auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == 0.5);
}

TEST_CASE("roc_auc: single-class labels have no curve") {
  CHECK(!roc_auc({0.1, 0.9}, {1, 1}).has_value());
  CHECK(!roc_auc({0.1, 0.9}, {0, 0}).has_value());
}

TEST_CASE("roc_auc: rejects labels outside {0,1} and length mismatch") {
  CHECK_THROWS_AS(roc_auc({0.1, 0.9}, {0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(roc_auc({0.1}, {0, 1}), std::invalid_argument);
}

TEST_CASE("roc_auc: matches the pairwise oracle on 100 random tied cases") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng() % 49;
    std::vector<double> s(n);
    std::vector<int> y(n);
    // Scores from a small discrete grid force heavy ties.
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 7) / 6.0;
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 0;
    y[1] = 1;  // both classes present
    const auto auc = roc_auc(s, y);
    REQUIRE(auc.has_value());
    CHECK(std::abs(*auc - pairwise_auc(s, y)) < 1e-12);
  }
}

TEST_CASE("compute_metrics: hand-tallied binary confusion and rates") {
  // idh truth/pred: (1,1) (1,0) (0,0) (0,0) (0,1) -> TP=1 FN=1 TN=2 FP=1.
  std::vector<PredictionSet> preds = {
      pred3(0.9, 0.9, 0), pred3(0.2, 0.8, 1), pred3(0.1, 0.3, 2),
      pred3(0.4, 0.2, 2), pred3(0.7, 0.1, 2)};
  std::vector<LabelSet> labels = {labels3(1, 1, 0), labels3(1, 1, 1),
                                  labels3(0, 0, 2), labels3(0, 0, 2),
                                  labels3(0, 0, 2)};
  MetricsReport r = compute_metrics(preds, labels);

  CHECK(r.n == 5);
  CHECK(r.idh.confusion(1, 1) == 1.0);
  CHECK(r.idh.confusion(1, 0) == 1.0);
  CHECK(r.idh.confusion(0, 0) == 2.0);
  CHECK(r.idh.confusion(0, 1) == 1.0);
  CHECK(r.idh.acc == doctest::Approx(3.0 / 5.0));
  CHECK(r.idh.sen == doctest::Approx(0.5));        // TP/(TP+FN)
  CHECK(r.idh.spe == doctest::Approx(2.0 / 3.0));  // TN/(TN+FP)
  REQUIRE(r.idh.auc.has_value());
  CHECK(*r.idh.auc ==
        doctest::Approx(pairwise_auc({0.9, 0.2, 0.1, 0.4, 0.7},
                                     {1, 1, 0, 0, 0})).epsilon(1e-14));

  // Pathology is all-correct here.
  CHECK(r.path.acc == 1.0);
  CHECK(r.path.sen == 1.0);
  CHECK(r.path.confusion.rows() == 3);
  CHECK(r.path.confusion.sum() == 5.0);
}

TEST_CASE("compute_metrics: confusion identities hold on random data") {
  std::mt19937_64 rng(99);
  std::vector<PredictionSet> preds;
  std::vector<LabelSet> labels;
  std::vector<int> idh_count(2, 0), path_count(3, 0);
  for (int i = 0; i < 60; ++i) {
    const int idh = static_cast<int>(rng() % 2);
    const int path = static_cast<int>(rng() % 3);
    preds.push_back(pred3(0.1 + 0.8 * static_cast<double>(rng() % 10) / 9.0,
                          0.5, static_cast<int>(rng() % 3)));
    labels.push_back(labels3(idh, static_cast<int>(rng() % 2), path));
    ++idh_count[static_cast<std::size_t>(idh)];
    ++path_count[static_cast<std::size_t>(path)];
  }
  MetricsReport r = compute_metrics(preds, labels);

  // Row sums recover the ground-truth class counts; the trace recovers ACC.
  for (int k = 0; k < 2; ++k)
    CHECK(r.idh.confusion.row(k).sum() == static_cast<double>(idh_count[k]));
  for (int k = 0; k < 3; ++k)
    CHECK(r.path.confusion.row(k).sum() == static_cast<double>(path_count[k]));
  CHECK(r.idh.confusion.sum() == 60.0);
  CHECK(r.idh.acc ==
        doctest::Approx(r.idh.confusion.trace() / 60.0).epsilon(1e-14));
  CHECK(r.path.acc ==
        doctest::Approx(r.path.confusion.trace() / 60.0).epsilon(1e-14));
  // Micro recall over all classes equals accuracy.
  CHECK(r.path.sen == doctest::Approx(r.path.acc).epsilon(1e-14));
}

TEST_CASE("compute_metrics: degenerate denominators fall to zero") {
  // All ground truth positive: no negatives, so specificity has an empty
  // denominator and the AUC has no curve.
  std::vector<PredictionSet> preds = {pred3(0.9, 0.5, 2), pred3(0.8, 0.5, 2)};
  std::vector<LabelSet> labels = {labels3(1, 0, 2), labels3(1, 0, 2)};
  MetricsReport r = compute_metrics(preds, labels);
  CHECK(r.idh.spe == 0.0);
  CHECK(r.idh.sen == 1.0);
  CHECK(!r.idh.auc.has_value());
  CHECK(!r.codel.auc.has_value());
  CHECK(!r.path.auc.has_value());
  CHECK(!r.mean_auc().has_value());
}

TEST_CASE("mean_auc: averages only the defined task curves") {
  std::vector<PredictionSet> preds = {pred3(0.9, 0.5, 2), pred3(0.2, 0.5, 2),
                                      pred3(0.7, 0.5, 2)};
  // codel is single-class; idh has both.
  std::vector<LabelSet> labels = {labels3(1, 0, 2), labels3(0, 0, 2),
                                  labels3(1, 0, 2)};
  MetricsReport r = compute_metrics(preds, labels);
  REQUIRE(r.idh.auc.has_value());
  CHECK(!r.codel.auc.has_value());
  REQUIRE(r.mean_auc().has_value());
  CHECK(*r.mean_auc() == doctest::Approx(*r.idh.auc).epsilon(1e-14));
}

TEST_CASE("csv_num: fixed six decimals") {
  CHECK(csv_num(0.0) == "0.000000");
  CHECK(csv_num(1.0) == "1.000000");
  CHECK(csv_num(2.0 / 3.0) == "0.666667");
  CHECK(csv_num(0.1234564) == "0.123456");
}

TEST_CASE("metrics csv: three task rows, absent auc becomes empty") {
  std::vector<PredictionSet> preds = {pred3(0.9, 0.5, 2), pred3(0.8, 0.5, 2)};
  std::vector<LabelSet> labels = {labels3(1, 0, 2), labels3(1, 0, 2)};
  MetricsReport r = compute_metrics(preds, labels);

  std::ostringstream out;
  out << kMetricsCsvHeader << '\n';
  write_metrics_rows(out, "internal", r);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "split,task,acc,auc,spe,sen,n");
  std::getline(in, line);
  CHECK(line == "internal,idh,1.000000,,0.000000,1.000000,2");
  std::getline(in, line);
  CHECK(line.rfind("internal,codel,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("internal,path,", 0) == 0);
  CHECK(!std::getline(in, line));
}

TEST_CASE("roc csv: curves start at the origin sentinel") {
  std::vector<PredictionSet> preds = {pred3(0.9, 0.2, 0), pred3(0.1, 0.7, 1),
                                      pred3(0.6, 0.4, 2)};
  std::vector<LabelSet> labels = {labels3(1, 0, 0), labels3(0, 1, 1),
                                  labels3(1, 0, 2)};
  std::ostringstream out;
  write_roc_csv(out, preds, labels);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "task,threshold,fpr,tpr");
  std::getline(in, line);
  CHECK(line == "idh,inf,0.000000,0.000000");
  // Every later row keeps the four-field shape.
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 3);
  }
}

TEST_CASE("confusion csv: one block per task with truth rows") {
  std::vector<PredictionSet> preds = {pred3(0.9, 0.2, 0), pred3(0.1, 0.7, 1)};
  std::vector<LabelSet> labels = {labels3(1, 0, 0), labels3(0, 1, 1)};
  std::ostringstream out;
  write_confusion_csv(out, compute_metrics(preds, labels));
  const std::string text = out.str();
  CHECK(text.find("task,idh\n") != std::string::npos);
  CHECK(text.find("task,codel\n") != std::string::npos);
  CHECK(text.find("task,path\n") != std::string::npos);
  CHECK(text.find("truth\\pred,0,1\n") != std::string::npos);
  CHECK(text.find("truth\\pred,0,1,2\n") != std::string::npos);
}
