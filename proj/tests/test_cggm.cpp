#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "gmenet/cggm.hpp"
#include "gmenet/grad_check.hpp"
#include "gmenet/optim.hpp"
#include "gmenet/param_store.hpp"
#include "gmenet/random.hpp"

using namespace gmenet;

namespace {

constexpr Index kD = 8;   // d_model
constexpr Index kT = 4;   // tokens
constexpr int kHeads = 2;

struct Fixture {
  ParamStore ps;
  Cggm cggm;
  RowVecX f_fl, f_t1c;

  explicit Fixture(std::uint64_t seed) {
    Rng rng(seed);
    cggm = make_cggm(ps, "cg.", kD, kT, kHeads, rng);
    f_fl = gaussian_row(kD, rng, 1.0);
    f_t1c = gaussian_row(kD, rng, 1.0);
  }
};

}  // namespace

TEST_CASE("cggm: direction lookup") {
  Fixture fx(1);
  CHECK(&fx.cggm.toward(Sequence::T1c) == &fx.cggm.fl_to_t1c);
  CHECK(&fx.cggm.toward(Sequence::FL) == &fx.cggm.t1c_to_fl);
}

TEST_CASE("cggm: imputed feature has model width") {
  Fixture fx(2);
  RowVecX f_cs = cggm_impute(fx.f_fl, fx.cggm.fl_to_t1c, fx.cggm.att);
  CHECK(f_cs.size() == kD);
}

TEST_CASE("cggm: zero source makes all token outputs identical") {
  // Zero tokens zero the keys, so attention is uniform over identical
  // bias-only values; every query then reads the same vector.
  Fixture fx(3);
  CggmCache cache;
  cggm_impute(RowVecX::Zero(kD), fx.cggm.fl_to_t1c, fx.cggm.att, &cache);
  const Index d = kD / kT;
  for (Index t = 1; t < kT; ++t)
    CHECK((cache.f_cs.segment(t * d, d) - cache.f_cs.segment(0, d))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
}

TEST_CASE("cggm: attention rows are distributions") {
  Fixture fx(4);
  CggmCache cache;
  cggm_impute(fx.f_fl, fx.cggm.fl_to_t1c, fx.cggm.att, &cache);
  REQUIRE(cache.att.attn.size() == static_cast<std::size_t>(kHeads));
  for (const MatX& head : cache.att.attn) {
    REQUIRE(head.rows() == kT);
    for (Index r = 0; r < head.rows(); ++r) {
      CHECK(std::abs(head.row(r).sum() - 1.0) <= 1e-12);
      CHECK(head.row(r).minCoeff() > 0.0);
    }
  }
}

TEST_CASE("cggm: gate stays strictly inside (0,1) and scales f_cs") {
  Fixture fx(5);
  Rng rng(50);
  for (int t = 0; t < 20; ++t) {
    CggmCache cache;
    RowVecX f_u = gaussian_row(kD, rng, 3.0);
    RowVecX f_m = cggm_impute_gate(f_u, fx.cggm.fl_to_t1c, fx.cggm.att,
                                   &cache);
    for (Index j = 0; j < kD; ++j) {
      CHECK(cache.alpha(j) > 0.0);
      CHECK(cache.alpha(j) < 1.0);
      CHECK(f_m(j) == doctest::Approx(cache.alpha(j) * cache.f_cs(j))
                          .epsilon(1e-14));
    }
  }
}

TEST_CASE("cggm: impute_gate equals impute then gate") {
  Fixture fx(6);
  RowVecX composed =
      cggm_impute_gate(fx.f_fl, fx.cggm.fl_to_t1c, fx.cggm.att);
  RowVecX f_cs = cggm_impute(fx.f_fl, fx.cggm.fl_to_t1c, fx.cggm.att);
  RowVecX staged = cggm_gate(f_cs, fx.f_fl, fx.cggm.fl_to_t1c);
  CHECK((composed - staged).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("cggm: cycle reconstruction uses the reverse direction") {
  Fixture fx(7);
  RowVecX f_m =
      cggm_impute_gate(fx.f_fl, fx.cggm.fl_to_t1c, fx.cggm.att);
  RowVecX cycled =
      cggm_cycle_reconstruct(f_m, fx.cggm.t1c_to_fl, fx.cggm.att);
  RowVecX direct = cggm_impute_gate(f_m, fx.cggm.t1c_to_fl, fx.cggm.att);
  CHECK((cycled - direct).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("recon loss: two-logit KL oracle") {
  // softmax([0,0]) = [1/2,1/2]; softmax([2 ln 3, 0]) = [9/10, 1/10];
  // KL = 0.5 ln(5/9) + 0.5 ln 5 = ln(5/3).
  RowVecX f_m_true(2), f_m_hat(2), zero(2);
  f_m_true << 0.0, 0.0;
  f_m_hat << 2.0 * std::log(3.0), 0.0;
  zero.setZero();
  ReconLoss l = recon_loss(f_m_hat, f_m_true, zero, zero);
  CHECK(l.kl == doctest::Approx(std::log(5.0 / 3.0)).epsilon(1e-14));
  const double mse = f_m_hat.squaredNorm() / 2.0;
  CHECK(l.mse == doctest::Approx(mse).epsilon(1e-14));
  CHECK(l.cycle == 0.0);
  CHECK(l.total == doctest::Approx(l.mse + l.kl + l.cycle).epsilon(1e-14));
}

TEST_CASE("recon loss: identical vectors cost nothing") {
  Rng rng(8);
  RowVecX a = gaussian_row(kD, rng, 1.0), b = gaussian_row(kD, rng, 1.0);
  ReconLoss l = recon_loss(a, a, b, b);
  CHECK(l.mse == 0.0);
  CHECK(std::abs(l.kl) < 1e-14);
  CHECK(l.cycle == 0.0);
}

TEST_CASE("recon loss: gradients match finite differences") {
  ParamStore ps;
  Rng rng(9);
  ps.create("f_m_hat", 1, kD).value = gaussian_row(kD, rng, 1.0);
  ps.create("f_u_hat", 1, kD).value = gaussian_row(kD, rng, 1.0);
  const RowVecX f_m_true = gaussian_row(kD, rng, 1.0);
  const RowVecX f_u_true = gaussian_row(kD, rng, 1.0);

  auto forward = [&] {
    return recon_loss(ps.at("f_m_hat").value.row(0), f_m_true,
                      ps.at("f_u_hat").value.row(0), f_u_true)
        .total;
  };
  RowVecX dm, du;
  recon_loss(ps.at("f_m_hat").value.row(0), f_m_true,
             ps.at("f_u_hat").value.row(0), f_u_true, &dm, &du);
  ps.at("f_m_hat").grad = dm;
  ps.at("f_u_hat").grad = du;

  auto report = grad_check(forward, ps);
  CHECK(report.max_rel_err < 1e-7);
}

TEST_CASE("draw_masks: probability one still never masks both sides") {
  Rng rng(10);
  auto masks = draw_masks(500, 1.0, rng);
  std::size_t fl = 0, t1c = 0;
  for (const MaskDraw& m : masks) {
    CHECK(!(m.fl && m.t1c));
    CHECK((m.fl || m.t1c));  // the coin flip keeps one side
    fl += m.fl;
    t1c += m.t1c;
  }
  CHECK(fl > 100);
  CHECK(t1c > 100);
}

TEST_CASE("draw_masks: probability zero masks nothing") {
  Rng rng(11);
  for (const MaskDraw& m : draw_masks(100, 0.0, rng)) {
    CHECK(!m.fl);
    CHECK(!m.t1c);
  }
}

TEST_CASE("masked step: single contribution equals a hand-built loss") {
  Fixture fx(12);
  FeaturePair pair{fx.f_fl, fx.f_t1c};
  std::vector<MaskDraw> masks(1);
  masks[0].t1c = true;  // synthesize T1c from FL, cycle back to FL

  fx.ps.zero_grads();
  ReconLoss got = cggm_masked_step(fx.cggm, {pair}, masks);

  RowVecX f_m_hat =
      cggm_impute_gate(fx.f_fl, fx.cggm.fl_to_t1c, fx.cggm.att);
  RowVecX f_u_hat =
      cggm_cycle_reconstruct(f_m_hat, fx.cggm.t1c_to_fl, fx.cggm.att);
  ReconLoss expect = recon_loss(f_m_hat, fx.f_t1c, f_u_hat, fx.f_fl);
  CHECK(got.total == doctest::Approx(expect.total).epsilon(1e-14));
  CHECK(got.mse == doctest::Approx(expect.mse).epsilon(1e-14));
  CHECK(got.cycle == doctest::Approx(expect.cycle).epsilon(1e-14));
}

TEST_CASE("masked step: no masked side yields a zero loss and no grads") {
  Fixture fx(13);
  FeaturePair pair{fx.f_fl, fx.f_t1c};
  fx.ps.zero_grads();
  ReconLoss l = cggm_masked_step(fx.cggm, {pair}, std::vector<MaskDraw>(1));
  CHECK(l.total == 0.0);
  for (const auto& [name, p] : fx.ps)
    CHECK(p.grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("masked step: gradients match finite differences") {
  Fixture fx(14);
  std::vector<FeaturePair> batch;
  Rng rng(140);
  for (int i = 0; i < 2; ++i)
    batch.push_back(FeaturePair{gaussian_row(kD, rng, 1.0), gaussian_row(kD, rng, 1.0)});
  std::vector<MaskDraw> masks(2);
  masks[0].fl = true;
  masks[1].t1c = true;

  auto forward = [&] {
    // Forward-only replica: impute + cycle + reconstruction loss per
    // contribution, averaged.
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const bool fl = masks[i].fl;
      const RowVecX& src = fl ? batch[i].f_t1c : batch[i].f_fl;
      const RowVecX& tgt = fl ? batch[i].f_fl : batch[i].f_t1c;
      const CggmDirection& synth =
          fl ? fx.cggm.t1c_to_fl : fx.cggm.fl_to_t1c;
      const CggmDirection& back =
          fl ? fx.cggm.fl_to_t1c : fx.cggm.t1c_to_fl;
      RowVecX f_m_hat = cggm_impute_gate(src, synth, fx.cggm.att);
      RowVecX f_u_hat = cggm_cycle_reconstruct(f_m_hat, back, fx.cggm.att);
      total += recon_loss(f_m_hat, tgt, f_u_hat, src).total;
    }
    return total / static_cast<double>(batch.size());
  };
  fx.ps.zero_grads();
  cggm_masked_step(fx.cggm, batch, masks);

  auto report = grad_check(forward, fx.ps);
  CHECK(report.checked == fx.ps.scalar_count());
  CHECK(report.max_rel_err < 1e-5);
}

TEST_CASE("complete_pair: fills exactly the absent side") {
  Fixture fx(15);
  FeaturePair missing_t1c{fx.f_fl, RowVecX{}};
  complete_pair(missing_t1c, fx.cggm);
  CHECK(missing_t1c.t1c_synth);
  CHECK(!missing_t1c.fl_synth);
  RowVecX expect =
      cggm_impute_gate(fx.f_fl, fx.cggm.fl_to_t1c, fx.cggm.att);
  CHECK((missing_t1c.f_t1c - expect).cwiseAbs().maxCoeff() == 0.0);

  FeaturePair done{fx.f_fl, fx.f_t1c};
  complete_pair(done, fx.cggm);
  CHECK(!done.fl_synth);
  CHECK(!done.t1c_synth);

  FeaturePair empty;
  CHECK_THROWS_AS(complete_pair(empty, fx.cggm), std::invalid_argument);
}

TEST_CASE("pretraining: reconstruction loss drops below 0.7x over 300 steps") {
  // Coupled synthetic latents: both sides are affine views of a shared
  // vector, so each side predicts the other. Mask redraws make single-step
  // losses noisy, so compare 10-step window averages. Averaged over three
  // seeds the late window must fall below 0.7x the early one.
  constexpr int kSteps = 300, kWindow = 10;
  double initial_sum = 0.0, final_sum = 0.0;
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    Rng rng(seed);
    const MatX view_fl = gaussian_matrix(kD, kD, rng, 1.0 / std::sqrt(kD));
    const MatX view_t1c = gaussian_matrix(kD, kD, rng, 1.0 / std::sqrt(kD));
    std::vector<FeaturePair> pool;
    for (int i = 0; i < 64; ++i) {
      RowVecX z = gaussian_row(kD, rng, 1.0);
      pool.push_back(FeaturePair{z * view_fl + 0.1 * gaussian_row(kD, rng, 1.0),
                      z * view_t1c + 0.1 * gaussian_row(kD, rng, 1.0)});
    }

    ParamStore ps;
    Rng init(seed * 7 + 1);
    Cggm cggm = make_cggm(ps, "cg.", kD, kT, kHeads, init);
    AdamWConfig oc;
    oc.lr = 1e-2;
    oc.weight_decay = 0.0;
    AdamW opt(oc);
    Rng mask_rng(seed * 13 + 5);
    for (int step = 0; step < kSteps; ++step) {
      ps.zero_grads();
      ReconLoss l = cggm_pretrain_step(cggm, pool, 0.5, mask_rng);
      opt.step(ps);
      if (step < kWindow) initial_sum += l.total / kWindow;
      if (step >= kSteps - kWindow) final_sum += l.total / kWindow;
    }
  }
  CHECK(final_sum / 3.0 < 0.7 * (initial_sum / 3.0));
}
