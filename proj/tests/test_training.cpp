#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "npr/model.hpp"
#include "npr/problems.hpp"
#include "npr/rng.hpp"
#include "npr/tape.hpp"
#include "npr/threads.hpp"
#include "npr/training.hpp"
#include "oracles.hpp"

using npr::AdamConfig;
using npr::AdamState;
using npr::ConstraintConfig;
using npr::ICSample;
using npr::IcFamilyKind;
using npr::Jet2;
using npr::LossWeights;
using npr::ModelKind;
using npr::ParamVector;
using npr::Rng;
using npr::TrainConfig;
using npr::TrainResult;

namespace {

ICSample sine_ic(double amp, double omega) {
  ICSample ic;
  ic.terms = {{amp, omega, 0.0, false}};
  return ic;
}

TrainConfig tiny_npr_config() {
  TrainConfig tc;
  tc.model.kind = ModelKind::npr;
  tc.model.npr = npr::make_hypernet_spec(6, 6, 2, 8, 2);
  tc.d_enc = 6;
  tc.problem.equation = npr::Equation::heat;
  tc.problem.kappa = 0.05;
  tc.ics.kind = IcFamilyKind::fourier;
  tc.ics.fourier_modes = 2;
  tc.ics.fourier_amp = 1.0;
  tc.batch_pde = 10;
  tc.n_steps = 3;
  tc.seed = 42;
  tc.progress_every = 1;
  return tc;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("adam: first and second step against hand-computed values") {
    AdamState st(2);
    ParamVector p = {1.0, 2.0};
    const ParamVector g1 = {0.5, -1.0};
    st.apply(p, g1, 0.1);

    // t=1: m = 0.1 g, v = 0.001 g^2; mhat = g, vhat = g^2
    const double want0 = 1.0 - 0.1 * 0.5 / (std::sqrt(0.25) + 1e-8);
    const double want1 = 2.0 + 0.1 * 1.0 / (std::sqrt(1.0) + 1e-8);
    CHECK(p[0] == doctest::Approx(want0).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(want1).epsilon(1e-15));
    CHECK(st.t == 1);

    const ParamVector g2 = {-0.25, 0.0};
    st.apply(p, g2, 0.1);
    // recompute the textbook recursion locally
    double m0 = 0.9 * (0.1 * 0.5) + 0.1 * -0.25;
    double v0 = 0.999 * (0.001 * 0.25) + 0.001 * 0.0625;
    double mhat = m0 / (1.0 - 0.81), vhat = v0 / (1.0 - 0.999 * 0.999);
    CHECK(p[0] == doctest::Approx(want0 - 0.1 * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-14));
    double m1 = 0.9 * (0.1 * -1.0);
    double v1 = 0.999 * 0.001;
    mhat = m1 / (1.0 - 0.81);
    vhat = v1 / (1.0 - 0.999 * 0.999);
    CHECK(p[1] == doctest::Approx(want1 - 0.1 * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-14));
  }

  TEST_CASE("adam: zero gradient on a fresh state leaves parameters alone") {
    AdamState st(3);
    ParamVector p = {1.0, -2.0, 0.5};
    const ParamVector before = p;
    st.apply(p, ParamVector(3, 0.0), 0.5);
    CHECK(p == before);
    // size mismatch is rejected
    ParamVector short_grad = {1.0};
    CHECK_THROWS_AS(st.apply(p, short_grad, 0.1), npr::ConfigError);
  }

  TEST_CASE("learning-rate schedule: frozen values") {
    CHECK(npr::lr_at(0, 1000, 1e-3, 0.1) == doctest::Approx(1e-5).epsilon(1e-15));
    CHECK(npr::lr_at(49, 1000, 1e-3, 0.1) == doctest::Approx(5e-4).epsilon(1e-15));
    CHECK(npr::lr_at(99, 1000, 1e-3, 0.1) == doctest::Approx(1e-3).epsilon(1e-15));
    CHECK(npr::lr_at(100, 1000, 1e-3, 0.1) == doctest::Approx(1e-3).epsilon(1e-15));
    CHECK(npr::lr_at(550, 1000, 1e-3, 0.1) == doctest::Approx(5e-4).epsilon(1e-15));
    CHECK(npr::lr_at(999, 1000, 1e-3, 0.1) == doctest::Approx(1e-3 / 900.0).epsilon(1e-15));
    // no warmup: peak at step 0, linear decay after
    CHECK(npr::lr_at(0, 100, 2e-3, 0.0) == doctest::Approx(2e-3).epsilon(1e-15));
    CHECK(npr::lr_at(1, 100, 2e-3, 0.0) == doctest::Approx(2e-3 * 99.0 / 99.0).epsilon(1e-15));
    // all warmup: never decays
    CHECK(npr::lr_at(99, 100, 2e-3, 1.0) == doctest::Approx(2e-3).epsilon(1e-15));
    CHECK_THROWS_AS((void)npr::lr_at(-1, 100, 1e-3, 0.1), npr::ConfigError);
    CHECK_THROWS_AS((void)npr::lr_at(100, 100, 1e-3, 0.1), npr::ConfigError);
    // schedule is continuous: steepest slope is peak/warm, so a stride of k
    // steps can move the rate by at most k * peak / warm
    for (long long n : {64LL, 1000LL, 65536LL}) {
      const long long stride = std::max<long long>(1, n / 512);
      const double warm = std::max(1.0, std::round(0.1 * static_cast<double>(n)));
      const double bound = 1e-3 * static_cast<double>(stride) / warm;
      double prev = npr::lr_at(0, n, 1e-3, 0.1);
      for (long long s = 1; s < n; s += stride) {
        const double cur = npr::lr_at(s, n, 1e-3, 0.1);
        CHECK(std::abs(cur - prev) <= bound * 1.001);
        prev = cur;
      }
    }
  }

  TEST_CASE("loss-weight balancing equalizes weighted gradient norms") {
    const LossWeights w = npr::update_loss_weights({}, 2.0, 6.0, 3.0, true, true);
    CHECK(w.pde * 2.0 == doctest::Approx(11.0).epsilon(1e-15));
    CHECK(w.ic * 6.0 == doctest::Approx(11.0).epsilon(1e-15));
    CHECK(w.bc * 3.0 == doctest::Approx(11.0).epsilon(1e-15));

    // inactive terms are excluded from the budget and keep their weight
    const LossWeights prev{1.0, 1.0, 7.5};
    const LossWeights w2 = npr::update_loss_weights(prev, 2.0, 6.0, 999.0, true, false);
    CHECK(w2.pde == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(w2.ic == doctest::Approx(8.0 / 6.0).epsilon(1e-15));
    CHECK(w2.bc == 7.5);

    // zero-norm guard: that term keeps its previous weight
    const LossWeights w3 = npr::update_loss_weights(prev, 2.0, 0.0, 1.0, true, true);
    CHECK(w3.ic == 1.0);
    CHECK(w3.pde == doctest::Approx(3.0 / 2.0).epsilon(1e-15));
    CHECK(w3.bc == doctest::Approx(3.0 / 1.0).epsilon(1e-15));

    // all-zero (or non-finite) measurements change nothing
    CHECK(npr::update_loss_weights(prev, 0.0, 0.0, 0.0, true, true).bc == 7.5);
    const double nan = std::nan("");
    CHECK(npr::update_loss_weights(prev, nan, 1.0, 1.0, true, true).bc == 7.5);

    // single active term collapses to weight 1
    const LossWeights w4 = npr::update_loss_weights({}, 3.7, 0.0, 0.0, false, false);
    CHECK(w4.pde == 1.0);
  }

  TEST_CASE("ic family dispatch and the fixed family's stream silence") {
    npr::IcFamily fam;
    fam.kind = IcFamilyKind::affine;
    fam.affine_a_low = -0.5;
    fam.affine_a_high = -0.5;
    fam.affine_b_low = 2.0;
    fam.affine_b_high = 2.0;
    Rng rng(5);
    const ICSample aff = npr::draw_ic(fam, rng);
    CHECK(aff.slope == -0.5);
    CHECK(aff.intercept == 2.0);

    npr::IcFamily fx;
    fx.kind = IcFamilyKind::fixed;
    fx.fixed = sine_ic(1.0, std::numbers::pi);
    Rng a(9), b(9);
    (void)npr::draw_ic(fx, a);
    CHECK(a.next_u64() == b.next_u64());  // fixed family consumes no draws
  }

  TEST_CASE("dense recorder matches plain jet evaluation and finite differences") {
    const npr::MlpSpec spec{2, 1, 2, 8, npr::Activation::sin};
    Rng rng(77);
    ParamVector p(dense_param_count(spec));
    for (double& v : p) v = rng.next_uniform(-0.8, 0.8);
    const ICSample ic = sine_ic(1.0, std::numbers::pi);
    ConstraintConfig cc;

    for (int i = 0; i < 8; ++i) {
      const double t = rng.next_unit();
      const double x = rng.next_unit();
      npr::Tape tape;
      const npr::VarRange pv = tape.leaves(p);
      const npr::ModelDerivs d = record_dense_derivs(tape, spec, pv, t, x, cc, ic);
      const Jet2 tj = npr::dense_eval<Jet2>(spec, p, Jet2::seed(t), Jet2::constant(x), cc, ic);
      const Jet2 xj = npr::dense_eval<Jet2>(spec, p, Jet2::constant(t), Jet2::seed(x), cc, ic);
      CHECK(oracle::close_rel(tape.value(d.u), xj.val, 1e-12, 1e-13));
      CHECK(oracle::close_rel(tape.value(d.u_t), tj.d1, 1e-12, 1e-13));
      CHECK(oracle::close_rel(tape.value(d.u_x), xj.d1, 1e-12, 1e-13));
      CHECK(oracle::close_rel(tape.value(d.u_xx), xj.d2, 1e-12, 1e-13));

      npr::Tape vtape;
      const npr::VarRange vv = vtape.leaves(p);
      const npr::Var u = record_dense_value(vtape, spec, vv, t, x, cc, ic);
      CHECK(oracle::close_rel(vtape.value(u),
                              npr::dense_eval<double>(spec, p, t, x, cc, ic), 1e-13, 1e-14));
    }

    // gradient of u_t + u_xx over all parameters
    const double t = 0.3, x = 0.7;
    npr::Tape tape;
    const npr::VarRange pv = tape.leaves(p);
    const npr::ModelDerivs d = record_dense_derivs(tape, spec, pv, t, x, cc, ic);
    tape.backward(tape.add(d.u_t, d.u_xx));
    const auto f = [&](const std::vector<double>& q) {
      const Jet2 tj = npr::dense_eval<Jet2>(spec, q, Jet2::seed(t), Jet2::constant(x), cc, ic);
      const Jet2 xj = npr::dense_eval<Jet2>(spec, q, Jet2::constant(t), Jet2::seed(x), cc, ic);
      return tj.d1 + xj.d2;
    };
    const std::vector<double> fd = oracle::fd_gradient_central(f, p, 1e-5);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (!oracle::close_rel(tape.adjoint(pv[i]), fd[i], 1e-4, 1e-7)) ++bad;
    CHECK(bad == 0);
  }

  TEST_CASE("model dispatch: counts, init determinism, value agreement") {
    npr::ModelSpec ms;
    ms.kind = ModelKind::npr;
    ms.npr = npr::make_hypernet_spec(6, 6, 2, 8, 2);
    CHECK(model_param_count(ms) == dense_param_count(ms.npr.hyper));
    const ParamVector a = init_model_params(ms, 7);
    const ParamVector b = init_model_params(ms, 7);
    CHECK(a == b);
    CHECK(init_model_params(ms, 8) != a);

    const ICSample ic = sine_ic(0.5, 2.0 * std::numbers::pi);
    const std::vector<double> sensors = npr::discretize(ic, 6);
    ConstraintConfig cc;
    CHECK(model_eval(ms, a, sensors, 0.4, 0.6, cc, ic) ==
          npr_eval(ms.npr, a, sensors, 0.4, 0.6, cc, ic));

    npr::ModelSpec ds;
    ds.kind = ModelKind::dense_pinn;
    ds.dense = npr::MlpSpec{2, 1, 2, 8, npr::Activation::sin};
    const ParamVector dp = init_model_params(ds, 3);
    CHECK(dp.size() == dense_param_count(ds.dense));
    CHECK(model_eval(ds, dp, {}, 0.2, 0.3, cc, ic) ==
          npr::dense_eval<double>(ds.dense, dp, 0.2, 0.3, cc, ic));

    npr::ModelSpec os;
    os.kind = ModelKind::deeponet;
    os.deeponet = npr::make_deeponet_spec(6, 7, 5, 3, 2);
    const ParamVector op = init_model_params(os, 4);
    CHECK(op.size() == deeponet_total_params(os.deeponet));
    CHECK(model_eval(os, op, sensors, 0.5, 0.5, cc, ic) ==
          npr::deeponet_eval<double>(os.deeponet, op, sensors, 0.5, 0.5, cc, ic));
  }

  TEST_CASE("zero steps returns the initialized parameters untouched") {
    TrainConfig tc = tiny_npr_config();
    tc.n_steps = 0;
    const TrainResult r = train(tc);
    CHECK(r.params == init_model_params(tc.model, tc.seed));
    CHECK(r.steps_done == 0);
    CHECK(r.history.empty());
  }

  TEST_CASE("first-step loss equals an element-by-element reconstruction") {
    TrainConfig tc = tiny_npr_config();
    tc.n_steps = 1;
    const TrainResult r = train(tc);
    REQUIRE(r.history.size() == 1);
    const double got = r.history.front().loss_pde;

    // replay the batch draws and recompute the mean residual with plain jets
    const ParamVector phi = init_model_params(tc.model, tc.seed);
    ConstraintConfig cc;  // heat: both ends pinned, t_final 1
    double sum = 0.0;
    for (int e = 0; e < tc.batch_pde; ++e) {
      Rng es(npr::derive_stream(tc.seed, npr::rng_tag::train, 0, static_cast<std::uint64_t>(e)));
      const ICSample ic = npr::draw_ic(tc.ics, es);
      const std::vector<double> sensors = npr::discretize(ic, tc.d_enc);
      const double t = es.next_uniform(0.0, tc.problem.t_final);
      const double x = es.next_unit();
      const ParamVector theta = decode_theta(tc.model.npr, phi, sensors);
      const Jet2 tj = npr::target_eval<Jet2>(tc.model.npr.target, theta, Jet2::seed(t),
                                             Jet2::constant(x), cc, ic);
      const Jet2 xj = npr::target_eval<Jet2>(tc.model.npr.target, theta, Jet2::constant(t),
                                             Jet2::seed(x), cc, ic);
      sum += std::abs(tj.d1 - tc.problem.kappa * xj.d2);
    }
    CHECK(oracle::close_rel(got, sum / tc.batch_pde, 1e-11, 1e-13));

    // hard-constrained run has only the residual term: its weight stays 1
    CHECK(r.history.front().weights.pde == 1.0);
    CHECK(r.history.front().loss_ic == 0.0);
    CHECK(r.history.front().loss_bc == 0.0);
    CHECK(r.history.front().loss_total ==
          doctest::Approx(r.history.front().loss_pde).epsilon(1e-15));
    REQUIRE(!r.refreshes.empty());
    CHECK(r.refreshes.front().g_pde > 0.0);
  }

  TEST_CASE("squared-loss path matches the same reconstruction") {
    TrainConfig tc = tiny_npr_config();
    tc.n_steps = 1;
    tc.batch_pde = 4;
    tc.loss = npr::LossKind::mse;
    const TrainResult r = train(tc);
    const ParamVector phi = init_model_params(tc.model, tc.seed);
    ConstraintConfig cc;
    double sum = 0.0;
    for (int e = 0; e < tc.batch_pde; ++e) {
      Rng es(npr::derive_stream(tc.seed, npr::rng_tag::train, 0, static_cast<std::uint64_t>(e)));
      const ICSample ic = npr::draw_ic(tc.ics, es);
      const std::vector<double> sensors = npr::discretize(ic, tc.d_enc);
      const double t = es.next_uniform(0.0, 1.0);
      const double x = es.next_unit();
      const ParamVector theta = decode_theta(tc.model.npr, phi, sensors);
      const Jet2 tj = npr::target_eval<Jet2>(tc.model.npr.target, theta, Jet2::seed(t),
                                             Jet2::constant(x), cc, ic);
      const Jet2 xj = npr::target_eval<Jet2>(tc.model.npr.target, theta, Jet2::constant(t),
                                             Jet2::seed(x), cc, ic);
      const double res = tj.d1 - 0.05 * xj.d2;
      sum += res * res;
    }
    CHECK(oracle::close_rel(r.history.front().loss_pde, sum / tc.batch_pde, 1e-11, 1e-13));
  }

  TEST_CASE("training is reproducible and invariant to the worker count") {
    TrainConfig tc = tiny_npr_config();
    tc.n_steps = 4;
    const TrainResult r1 = train(tc);
    const TrainResult r2 = train(tc);
    CHECK(r1.params == r2.params);  // bit-identical

    setenv("NPR_THREADS", "4", 1);
    const TrainResult r4 = train(tc);
    setenv("NPR_THREADS", "2", 1);
    const TrainResult r5 = train(tc);
    unsetenv("NPR_THREADS");
    CHECK(r1.params == r4.params);
    CHECK(r1.params == r5.params);

    TrainConfig other = tc;
    other.seed = 43;
    CHECK(train(other).params != r1.params);
  }

  TEST_CASE("soft-constraint run balances the active terms") {
    TrainConfig tc = tiny_npr_config();
    tc.constraints.hardcode_ic = false;
    tc.constraints.hardcode_bc = false;
    tc.batch_ic = 6;
    tc.batch_bc = 6;
    tc.n_steps = 2;
    tc.weight_update_every = 1;
    const TrainResult r = train(tc);

    REQUIRE(r.refreshes.size() == 2);
    for (const npr::RefreshStats& rs : r.refreshes) {
      // after a refresh every active term pulls with the same magnitude
      REQUIRE(rs.g_pde > 0.0);
      REQUIRE(rs.g_ic > 0.0);
      REQUIRE(rs.g_bc > 0.0);
      const double m = rs.weights.pde * rs.g_pde;
      CHECK(rs.weights.ic * rs.g_ic == doctest::Approx(m).epsilon(1e-10));
      CHECK(rs.weights.bc * rs.g_bc == doctest::Approx(m).epsilon(1e-10));
    }
    // soft losses are measured and folded into the total
    const npr::StepStats& row = r.history.front();
    CHECK(row.loss_ic > 0.0);
    CHECK(row.loss_bc > 0.0);
    CHECK(row.loss_total == doctest::Approx(row.weights.pde * row.loss_pde +
                                            row.weights.ic * row.loss_ic +
                                            row.weights.bc * row.loss_bc)
                                .epsilon(1e-14));
  }

  TEST_CASE("a short single-instance run reduces the residual loss") {
    TrainConfig tc;
    tc.model.kind = ModelKind::dense_pinn;
    tc.model.dense = npr::MlpSpec{2, 1, 2, 16, npr::Activation::sin};
    tc.problem.equation = npr::Equation::heat;
    tc.problem.kappa = 0.05;
    tc.ics.kind = IcFamilyKind::fixed;
    tc.ics.fixed = sine_ic(1.0, std::numbers::pi);
    tc.batch_pde = 24;
    tc.n_steps = 120;
    tc.lr_peak = 3e-3;
    tc.seed = 11;
    tc.progress_every = 1;
    const TrainResult r = train(tc);
    REQUIRE(r.history.size() == 120);
    const double first = r.history.front().loss_pde;
    const double last = r.history.back().loss_pde;
    CHECK(last < 0.5 * first);
    CHECK(std::isfinite(last));
  }

  TEST_CASE("divergence is reported with the step index") {
    TrainConfig tc = tiny_npr_config();
    tc.problem.equation = npr::Equation::burgers;  // u u_x squares the blow-up
    tc.ics.kind = IcFamilyKind::affine;
    tc.lr_peak = 1e300;
    tc.warmup_frac = 0.0;
    tc.n_steps = 10;
    tc.batch_pde = 4;
    CHECK_THROWS_WITH_AS(train(tc, {}), doctest::Contains("step"), npr::NumericError);
  }

  TEST_CASE("config validation rejects inconsistent setups") {
    TrainConfig tc = tiny_npr_config();
    tc.d_enc = 5;  // hyper expects 6 sensors
    CHECK_THROWS_AS(train(tc), npr::ConfigError);

    TrainConfig tc2 = tiny_npr_config();
    tc2.model.kind = ModelKind::dense_pinn;
    tc2.ics.kind = IcFamilyKind::fourier;  // a dense net cannot span a family
    CHECK_THROWS_AS(train(tc2), npr::ConfigError);

    TrainConfig tc3 = tiny_npr_config();
    tc3.warmup_frac = 1.5;
    CHECK_THROWS_AS(train(tc3), npr::ConfigError);

    TrainConfig tc4 = tiny_npr_config();
    tc4.constraints.hardcode_ic = false;
    tc4.batch_ic = 0;
    CHECK_THROWS_AS(train(tc4), npr::ConfigError);
  }

  TEST_CASE("progress rows land in the csv with the documented header") {
    TrainConfig tc = tiny_npr_config();
    tc.n_steps = 3;
    tc.progress_every = 1;
    std::vector<npr::StepStats> seen;
    const TrainResult r = train(tc, [&](const npr::StepStats& s) { seen.push_back(s); });
    CHECK(seen.size() == r.history.size());
    REQUIRE(r.history.size() == 3);
    CHECK(r.history.back().step == 2);

    const auto path = std::filesystem::temp_directory_path() / "npr_progress_test.csv";
    npr::write_progress_csv(path.string(), r.history);
    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    CHECK(header ==
          "step, lr, lambda_pde, lambda_ic, lambda_bc, loss_pde, loss_ic, loss_bc, loss_total");
    int rows = 0;
    for (std::string line; std::getline(f, line);)
      if (!line.empty()) ++rows;
    CHECK(rows == 3);
    f.close();
    std::filesystem::remove(path);
  }
}
