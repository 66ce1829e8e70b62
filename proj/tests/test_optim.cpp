#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gmenet/optim.hpp"
#include "gmenet/param_store.hpp"
#include "gmenet/random.hpp"

using namespace gmenet;

TEST_CASE("adamw: first step with unit gradient") {
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  ParamStore ps;
  ps.create("p", 1, 1).value(0, 0) = 1.0;
  ps.at("p").grad(0, 0) = 1.0;

  AdamW opt(cfg);
  opt.step(ps);
  // Bias correction makes the first update lr * g / (|g| + eps).
  const double expect = 1.0 - 0.1 * (1.0 / (1.0 + cfg.eps));
  CHECK(ps.at("p").value(0, 0) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("adamw: zero gradient leaves only decoupled decay") {
  AdamWConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.5;
  ParamStore ps;
  ps.create("p", 1, 2).value << 2.0, -4.0;

  AdamW opt(cfg);
  opt.step(ps);
  const double shrink = 1.0 - cfg.lr * cfg.weight_decay;
  CHECK(ps.at("p").value(0, 0) == doctest::Approx(2.0 * shrink).epsilon(1e-14));
  CHECK(ps.at("p").value(0, 1) ==
        doctest::Approx(-4.0 * shrink).epsilon(1e-14));
}

TEST_CASE("adamw: frozen parameters neither move nor decay") {
  ParamStore ps;
  ps.create("a.w", 2, 2).value.setConstant(3.0);
  ps.create("b.w", 2, 2).value.setConstant(3.0);
  ps.at("a.w").grad.setConstant(1.0);
  ps.at("b.w").grad.setConstant(1.0);
  ps.freeze_group("a.");

  AdamW opt;
  opt.step(ps);
  CHECK(ps.at("a.w").value == MatX::Constant(2, 2, 3.0));
  CHECK(ps.at("b.w").value != MatX::Constant(2, 2, 3.0));
}

TEST_CASE("adamw: matches a hand-rolled reference over several steps") {
  AdamWConfig cfg;
  cfg.lr = 0.05;
  cfg.weight_decay = 0.1;
  ParamStore ps;
  Rng rng(4);
  ps.create("w", 2, 3).value = gaussian_matrix(2, 3, rng, 1.0);
  MatX ref = ps.at("w").value;
  MatX m = MatX::Zero(2, 3), v = MatX::Zero(2, 3);

  AdamW opt(cfg);
  for (int t = 1; t <= 7; ++t) {
    const MatX g = gaussian_matrix(2, 3, rng, 1.0);
    ps.at("w").grad = g;
    opt.step(ps);

    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.array().square().matrix();
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    const MatX update =
        (m.array() / bc1) /
        ((v.array() / bc2).sqrt() + cfg.eps);
    ref -= cfg.lr * update.matrix();
    ref -= cfg.lr * cfg.weight_decay * ref;

    CHECK((ps.at("w").value - ref).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("adamw: drives a quadratic to its minimum") {
  AdamWConfig cfg;
  cfg.lr = 0.05;
  cfg.weight_decay = 0.0;
  ParamStore ps;
  ps.create("p", 1, 1).value(0, 0) = -5.0;

  AdamW opt(cfg);
  for (int t = 0; t < 600; ++t) {
    ps.zero_grads();
    ps.at("p").grad(0, 0) = 2.0 * (ps.at("p").value(0, 0) - 3.0);
    opt.step(ps);
  }
  CHECK(ps.at("p").value(0, 0) == doctest::Approx(3.0).epsilon(1e-4));
}
