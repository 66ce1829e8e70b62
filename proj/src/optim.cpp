#include "gmenet/optim.hpp"

#include <cmath>

namespace gmenet {

void AdamW::step(ParamStore& ps) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

  for (auto& [name, param] : ps) {
    if (param.frozen) continue;
    auto& mom = state_[name];
    if (mom.m.size() == 0) {
      mom.m = MatX::Zero(param.value.rows(), param.value.cols());
      mom.v = MatX::Zero(param.value.rows(), param.value.cols());
    }
    mom.m = cfg_.beta1 * mom.m + (1.0 - cfg_.beta1) * param.grad;
    mom.v.array() = cfg_.beta2 * mom.v.array() +
                    (1.0 - cfg_.beta2) * param.grad.array().square();
    const MatX m_hat = mom.m / bc1;
    const MatX v_hat = mom.v / bc2;
    param.value.array() -=
        cfg_.lr * m_hat.array() / (v_hat.array().sqrt() + cfg_.eps);
    param.value -= cfg_.lr * cfg_.weight_decay * param.value;
  }
}

}  // namespace gmenet
