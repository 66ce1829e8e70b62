#pragma once

#include <array>
#include <vector>

#include "gmenet/data.hpp"
#include "gmenet/types.hpp"

namespace gmenet {

// Per-task logits with derived (plain softmax) probabilities and argmax
// predictions. Tasks: idh (2 classes), codel (2), pathology (3).
struct PredictionSet {
  RowVecX idh_logits, codel_logits, path_logits;
  RowVecX idh_prob, codel_prob, path_prob;
  int idh_pred = 0, codel_pred = 0, path_pred = 0;
};

PredictionSet make_prediction(const RowVecX& idh_logits,
                              const RowVecX& codel_logits,
                              const RowVecX& path_logits);

// Training-set label frequencies per task.
struct ClassCounts {
  std::vector<double> idh;    // size 2
  std::vector<double> codel;  // size 2
  std::vector<double> path;   // size 3

  void validate() const;  // positive counts everywhere
};

ClassCounts count_labels(const std::vector<LabelSet>& labels,
                         bool smooth = false);

// Balanced softmax: cross-entropy on logits shifted by log class counts.
// Inference probabilities stay plain softmax; only the loss is rebalanced.
double balanced_softmax_loss(const RowVecX& logits, int label,
                             const std::vector<double>& counts,
                             RowVecX* dlogits = nullptr);

struct TotalLossGrads {
  RowVecX idh, codel, path;
};

// Unweighted sum of the three balanced-softmax task losses.
double total_loss(const PredictionSet& pred, const LabelSet& labels,
                  const ClassCounts& counts,
                  TotalLossGrads* grads = nullptr);

}  // namespace gmenet
