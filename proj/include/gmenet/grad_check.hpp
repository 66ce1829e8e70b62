#pragma once

#include <functional>
#include <string>

#include "gmenet/param_store.hpp"

namespace gmenet {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  Index worst_row = 0;
  Index worst_col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;

  std::string describe() const;
};

// Central finite differences against the analytic gradients already stored in
// `params` (the caller runs one forward+backward before calling this).
// `computation` re-evaluates the scalar loss from the current parameter
// values without touching the stored gradients. Frozen parameters are
// skipped. Relative error per entry: |a - n| / max(1, |a|, |n|).
GradCheckReport grad_check(const std::function<double()>& computation,
                           ParamStore& params, double eps = 1e-5);

}  // namespace gmenet
