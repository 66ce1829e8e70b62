#include "gmenet/grad_check.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gmenet {

std::string GradCheckReport::describe() const {
  std::ostringstream os;
  os << "max rel err " << max_rel_err << " over " << checked << " entries";
  if (!worst_param.empty()) {
    os << " (worst: " << worst_param << "[" << worst_row << "," << worst_col
       << "] analytic " << analytic << " vs numeric " << numeric << ")";
  }
  return os.str();
}

GradCheckReport grad_check(const std::function<double()>& computation,
                           ParamStore& params, double eps) {
  GradCheckReport report;
  for (auto& [name, p] : params) {
    if (p.frozen) continue;
    for (Index i = 0; i < p.value.rows(); ++i) {
      for (Index j = 0; j < p.value.cols(); ++j) {
        const double saved = p.value(i, j);
        p.value(i, j) = saved + eps;
        const double lp = computation();
        p.value(i, j) = saved - eps;
        const double lm = computation();
        p.value(i, j) = saved;
        if (!std::isfinite(lp) || !std::isfinite(lm)) {
          throw std::runtime_error("grad_check: non-finite loss at param '" +
                                   name + "'");
        }
        const double numeric = (lp - lm) / (2.0 * eps);
        const double analytic = p.grad(i, j);
        const double denom =
            std::max({1.0, std::abs(numeric), std::abs(analytic)});
        const double rel = std::abs(numeric - analytic) / denom;
        ++report.checked;
        if (rel > report.max_rel_err) {
          report.max_rel_err = rel;
          report.worst_param = name;
          report.worst_row = i;
          report.worst_col = j;
          report.analytic = analytic;
          report.numeric = numeric;
        }
      }
    }
  }
  return report;
}

}  // namespace gmenet
