#include "gmenet/losses.hpp"

#include <cmath>

#include "gmenet/check.hpp"
#include "gmenet/nn.hpp"

namespace gmenet {

namespace {

int argmax(const RowVecX& v) {
  Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

PredictionSet make_prediction(const RowVecX& idh_logits,
                              const RowVecX& codel_logits,
                              const RowVecX& path_logits) {
  require(idh_logits.size() == 2 && codel_logits.size() == 2 &&
              path_logits.size() == 3,
          "prediction: logit arity mismatch");
  PredictionSet p;
  p.idh_logits = idh_logits;
  p.codel_logits = codel_logits;
  p.path_logits = path_logits;
  p.idh_prob = softmax(idh_logits);
  p.codel_prob = softmax(codel_logits);
  p.path_prob = softmax(path_logits);
  p.idh_pred = argmax(p.idh_prob);
  p.codel_pred = argmax(p.codel_prob);
  p.path_pred = argmax(p.path_prob);
  return p;
}

void ClassCounts::validate() const {
  require(idh.size() == 2 && codel.size() == 2 && path.size() == 3,
          "class counts: arity mismatch");
  for (const auto* task : {&idh, &codel, &path})
    for (double c : *task)
      require(c > 0.0,
              "class counts: a class has zero training samples (enable count "
              "smoothing or fix the split)");
}

ClassCounts count_labels(const std::vector<LabelSet>& labels, bool smooth) {
  ClassCounts counts;
  counts.idh.assign(2, smooth ? 1.0 : 0.0);
  counts.codel.assign(2, smooth ? 1.0 : 0.0);
  counts.path.assign(3, smooth ? 1.0 : 0.0);
  for (const LabelSet& l : labels) {
    counts.idh[static_cast<std::size_t>(l.idh)] += 1.0;
    counts.codel[static_cast<std::size_t>(l.codel)] += 1.0;
    counts.path[static_cast<std::size_t>(l.pathology)] += 1.0;
  }
  return counts;
}

double balanced_softmax_loss(const RowVecX& logits, int label,
                             const std::vector<double>& counts,
                             RowVecX* dlogits) {
  require(static_cast<std::size_t>(logits.size()) == counts.size(),
          "balanced softmax: counts arity mismatch");
  require(label >= 0 && label < logits.size(),
          "balanced softmax: label out of range");
  RowVecX shifted(logits.size());
  for (Index j = 0; j < logits.size(); ++j) {
    const double c = counts[static_cast<std::size_t>(j)];
    require(c > 0.0, "balanced softmax: nonpositive class count");
    shifted(j) = logits(j) + std::log(c);
  }
  RowVecX p = softmax(shifted);
  const double loss = -std::log(p(label));
  if (dlogits) {
    *dlogits = p;
    (*dlogits)(label) -= 1.0;
  }
  return loss;
}

double total_loss(const PredictionSet& pred, const LabelSet& labels,
                  const ClassCounts& counts, TotalLossGrads* grads) {
  double loss = 0.0;
  loss += balanced_softmax_loss(pred.idh_logits,
                                static_cast<int>(labels.idh), counts.idh,
                                grads ? &grads->idh : nullptr);
  loss += balanced_softmax_loss(pred.codel_logits,
                                static_cast<int>(labels.codel), counts.codel,
                                grads ? &grads->codel : nullptr);
  loss += balanced_softmax_loss(pred.path_logits,
                                static_cast<int>(labels.pathology),
                                counts.path, grads ? &grads->path : nullptr);
  return loss;
}

}  // namespace gmenet
