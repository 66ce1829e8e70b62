#pragma once

#include <map>
#include <string>

#include "gmenet/param_store.hpp"
#include "gmenet/types.hpp"

namespace gmenet {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // decoupled, applied as p -= lr*wd*p
};

// Frozen parameters are skipped entirely: no decay, no moment updates.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  const AdamWConfig& config() const { return cfg_; }

  // Applies one update from the gradients currently stored in `ps`.
  void step(ParamStore& ps);

 private:
  struct Moments {
    MatX m;
    MatX v;
  };
  AdamWConfig cfg_;
  std::map<std::string, Moments> state_;
  long t_ = 0;
};

}  // namespace gmenet
