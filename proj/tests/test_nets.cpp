#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "doctest.h"
#include "npr/deeponet.hpp"
#include "npr/mlp.hpp"
#include "npr/model.hpp"
#include "npr/problems.hpp"
#include "npr/rng.hpp"
#include "npr/tape.hpp"
#include "oracles.hpp"

using npr::Activation;
using npr::ConstraintConfig;
using npr::DeepONetSpec;
using npr::HypernetSpec;
using npr::ICSample;
using npr::Jet2;
using npr::LowRankMlpSpec;
using npr::MlpSpec;
using npr::ParamVector;
using npr::Rng;
using npr::Tape;
using npr::Var;
using npr::VarRange;

namespace {

// Independent count: a stack of affine stages, each d_out * (d_in + 1).
std::size_t stack_count(int d_in, int d_out, int n_hidden, int d_hidden) {
  std::size_t n = static_cast<std::size_t>(d_hidden) * (d_in + 1);
  for (int i = 1; i < n_hidden; ++i) n += static_cast<std::size_t>(d_hidden) * (d_hidden + 1);
  n += static_cast<std::size_t>(d_out) * (d_hidden + 1);
  return n;
}

// Materialize every factored transition W_i = A_i B_i into a dense parameter
// vector with the same canonical layout, using nothing but the layout refs.
ParamVector densify(const LowRankMlpSpec& spec, const ParamVector& lr) {
  const npr::LowRankLayout lay = lowrank_layout(spec);
  MlpSpec dense = spec.base;
  ParamVector out(dense_param_count(dense), 0.0);
  const std::vector<npr::DenseStageRef> dlay = dense_layout(dense);
  const int h = spec.base.d_hidden;
  const int r = spec.rank;

  auto copy_stage = [&](const npr::DenseStageRef& src, const npr::DenseStageRef& dst) {
    std::copy_n(lr.begin() + static_cast<std::ptrdiff_t>(src.w),
                static_cast<std::size_t>(src.d_out) * src.d_in,
                out.begin() + static_cast<std::ptrdiff_t>(dst.w));
    std::copy_n(lr.begin() + static_cast<std::ptrdiff_t>(src.b), src.d_out,
                out.begin() + static_cast<std::ptrdiff_t>(dst.b));
  };
  copy_stage(lay.input, dlay.front());
  for (std::size_t s = 0; s < lay.hidden.size(); ++s) {
    const npr::FactoredStageRef& f = lay.hidden[s];
    const npr::DenseStageRef& d = dlay[s + 1];
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < h; ++j) {
        double acc = 0.0;
        for (int k = 0; k < r; ++k)
          acc += lr[f.a + static_cast<std::size_t>(i) * r + k] *
                 lr[f.b_mat + static_cast<std::size_t>(k) * h + j];
        out[d.w + static_cast<std::size_t>(i) * h + j] = acc;
      }
    std::copy_n(lr.begin() + static_cast<std::ptrdiff_t>(f.bias), h,
                out.begin() + static_cast<std::ptrdiff_t>(d.b));
  }
  copy_stage(lay.output, dlay.back());
  return out;
}

ParamVector random_params(std::size_t n, Rng& rng, double bound = 1.0) {
  ParamVector p(n);
  for (double& v : p) v = rng.next_uniform(-bound, bound);
  return p;
}

ICSample test_ic() {
  ICSample ic;
  ic.kind = npr::IcKind::fourier;
  ic.intercept = 0.3;
  ic.slope = -0.2;
  ic.terms = {{0.7, 2.0 * 3.141592653589793, 0.0, false},
              {-0.4, 4.0 * 3.141592653589793, 0.0, true}};
  return ic;
}

// Small pipeline used by all recorder tests: cheap enough for finite
// differences over every hyper parameter.
HypernetSpec small_spec() { return npr::make_hypernet_spec(6, 6, 2, 8, 2); }

}  // namespace

TEST_SUITE("nets") {
  TEST_CASE("dense parameter counts match the stage-sum oracle") {
    const MlpSpec a{2, 1, 4, 32, Activation::sin};
    CHECK(dense_param_count(a) == 3297);
    CHECK(dense_param_count(a) == stack_count(2, 1, 4, 32));

    const MlpSpec b{1, 1, 1, 1, Activation::sin};
    CHECK(dense_param_count(b) == 4);

    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
      MlpSpec s;
      s.d_input = 1 + static_cast<int>(rng.next_u64() % 40);
      s.d_output = 1 + static_cast<int>(rng.next_u64() % 40);
      s.n_hidden = 1 + static_cast<int>(rng.next_u64() % 5);
      s.d_hidden = 1 + static_cast<int>(rng.next_u64() % 70);
      CHECK(dense_param_count(s) == stack_count(s.d_input, s.d_output, s.n_hidden, s.d_hidden));
    }
  }

  TEST_CASE("low-rank parameter counts: frozen table") {
    // hand-derived closed form for d_in=2, d_out=1, n_hidden=4:
    //   width 32: 225 + 192 r     width 64: 449 + 384 r
    auto count = [](int d_hidden, int rank) {
      LowRankMlpSpec s;
      s.base = MlpSpec{2, 1, 4, d_hidden, Activation::sin};
      s.rank = rank;
      return lowrank_param_count(s);
    };
    CHECK(count(32, 4) == 993);
    CHECK(count(32, 8) == 1761);
    CHECK(count(32, 16) == 3297);
    CHECK(count(64, 4) == 1985);
    CHECK(count(64, 8) == 3521);
    CHECK(count(64, 16) == 6593);
    // rank large enough to cost more than the dense matrix it replaces is
    // still counted honestly
    CHECK(count(32, 16) == dense_param_count(MlpSpec{2, 1, 4, 32, Activation::sin}));
  }

  TEST_CASE("hypernetwork sizes for the standard configurations") {
    // hyper is always 32 -> 64 x 4 -> p: 14592 + 65 p
    const struct {
      int hidden, rank;
      std::size_t total;
    } rows[] = {{32, 4, 79137},   {32, 8, 129057},  {32, 16, 228897},
                {64, 4, 143617},  {64, 8, 243457},  {64, 16, 443137}};
    for (const auto& r : rows) {
      const HypernetSpec spec = npr::make_hypernet_spec(32, r.hidden, r.rank);
      CHECK(spec.hyper.d_output == static_cast<int>(lowrank_param_count(spec.target)));
      CHECK(dense_param_count(spec.hyper) == r.total);
      CHECK(dense_param_count(spec.hyper) ==
            14592 + 65 * lowrank_param_count(spec.target));
    }
  }

  TEST_CASE("layouts tile the flat vector exactly") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
      MlpSpec s;
      s.d_input = 1 + static_cast<int>(rng.next_u64() % 20);
      s.d_output = 1 + static_cast<int>(rng.next_u64() % 20);
      s.n_hidden = 1 + static_cast<int>(rng.next_u64() % 4);
      s.d_hidden = 1 + static_cast<int>(rng.next_u64() % 30);

      std::size_t cursor = 0;
      for (const npr::DenseStageRef& st : dense_layout(s)) {
        CHECK(st.w == cursor);
        cursor += static_cast<std::size_t>(st.d_out) * st.d_in;
        CHECK(st.b == cursor);
        cursor += static_cast<std::size_t>(st.d_out);
      }
      CHECK(cursor == dense_param_count(s));

      LowRankMlpSpec ls;
      ls.base = s;
      ls.base.n_hidden = std::max(2, s.n_hidden);  // at least one transition
      ls.rank = 1 + static_cast<int>(rng.next_u64() %
                                     static_cast<std::uint64_t>(std::min(8, s.d_hidden)));
      const npr::LowRankLayout lay = lowrank_layout(ls);
      cursor = 0;
      CHECK(lay.input.w == cursor);
      cursor += static_cast<std::size_t>(lay.input.d_out) * lay.input.d_in;
      CHECK(lay.input.b == cursor);
      cursor += static_cast<std::size_t>(lay.input.d_out);
      CHECK(lay.hidden.size() == static_cast<std::size_t>(ls.base.n_hidden - 1));
      for (const npr::FactoredStageRef& st : lay.hidden) {
        CHECK(st.a == cursor);
        cursor += static_cast<std::size_t>(st.d_hidden) * st.rank;
        CHECK(st.b_mat == cursor);
        cursor += static_cast<std::size_t>(st.rank) * st.d_hidden;
        CHECK(st.bias == cursor);
        cursor += static_cast<std::size_t>(st.d_hidden);
      }
      CHECK(lay.output.w == cursor);
      cursor += static_cast<std::size_t>(lay.output.d_out) * lay.output.d_in;
      CHECK(lay.output.b == cursor);
      cursor += static_cast<std::size_t>(lay.output.d_out);
      CHECK(cursor == lowrank_param_count(ls));
    }
  }

  TEST_CASE("init: bounds per stage, zero biases, determinism, read-out scaling") {
    const MlpSpec s{3, 2, 3, 16, Activation::sin};
    Rng r1(99), r2(99);
    const ParamVector p1 = init_dense(s, r1);
    const ParamVector p2 = init_dense(s, r2);
    CHECK(p1 == p2);  // same stream, same parameters

    const std::vector<npr::DenseStageRef> lay = dense_layout(s);
    for (const npr::DenseStageRef& st : lay) {
      const double bound = std::sqrt(6.0 / (st.d_in + st.d_out)) + 1e-15;
      bool any_nonzero = false;
      for (std::size_t k = 0; k < static_cast<std::size_t>(st.d_out) * st.d_in; ++k) {
        CHECK(std::abs(p1[st.w + k]) <= bound);
        any_nonzero |= p1[st.w + k] != 0.0;
      }
      CHECK(any_nonzero);
      for (int k = 0; k < st.d_out; ++k) CHECK(p1[st.b + k] == 0.0);
    }

    Rng r3(99);
    const ParamVector scaled = init_dense(s, r3, 0.01);
    const npr::DenseStageRef& out = lay.back();
    for (std::size_t k = 0; k < out.w; ++k) CHECK(scaled[k] == p1[k]);
    for (std::size_t k = 0; k < static_cast<std::size_t>(out.d_out) * out.d_in; ++k)
      CHECK(scaled[out.w + k] == doctest::Approx(0.01 * p1[out.w + k]).epsilon(1e-14));

    LowRankMlpSpec ls;
    ls.base = MlpSpec{2, 1, 3, 8, Activation::sin};
    ls.rank = 3;
    Rng r4(5), r5(5);
    CHECK(init_lowrank(ls, r4) == init_lowrank(ls, r5));
    Rng r6(5);
    const ParamVector lp = init_lowrank(ls, r6);
    const npr::LowRankLayout lay2 = lowrank_layout(ls);
    for (const npr::FactoredStageRef& st : lay2.hidden) {
      const double ba = std::sqrt(6.0 / (st.rank + st.d_hidden)) + 1e-15;
      for (std::size_t k = 0; k < static_cast<std::size_t>(st.d_hidden) * st.rank; ++k)
        CHECK(std::abs(lp[st.a + k]) <= ba);
      for (std::size_t k = 0; k < static_cast<std::size_t>(st.rank) * st.d_hidden; ++k)
        CHECK(std::abs(lp[st.b_mat + k]) <= ba);
      for (int k = 0; k < st.d_hidden; ++k) CHECK(lp[st.bias + k] == 0.0);
    }
  }

  TEST_CASE("forward with all-zero parameters is identically zero") {
    for (Activation act : {Activation::sin, Activation::tanh, Activation::relu}) {
      const MlpSpec s{2, 3, 2, 5, act};
      const ParamVector zeros(dense_param_count(s), 0.0);
      const std::vector<double> in = {0.7, -1.3};
      for (double v : npr::forward_dense<double>(s, zeros, in)) CHECK(v == 0.0);

      LowRankMlpSpec ls;
      ls.base = s;
      ls.rank = 2;
      const ParamVector lzeros(lowrank_param_count(ls), 0.0);
      for (double v : npr::forward_lowrank<double>(ls, lzeros, in)) CHECK(v == 0.0);
    }
  }

  TEST_CASE("forward rejects mismatched parameter and input lengths") {
    const MlpSpec s{2, 1, 2, 4, Activation::sin};
    const ParamVector p(dense_param_count(s), 0.0);
    const std::vector<double> in = {0.0, 0.0};
    const std::vector<double> bad_in = {0.0};
    ParamVector bad_p = p;
    bad_p.push_back(0.0);
    CHECK_THROWS_AS((void)npr::forward_dense<double>(s, bad_p, in), npr::ConfigError);
    CHECK_THROWS_AS((void)npr::forward_dense<double>(s, p, bad_in), npr::ConfigError);
  }

  TEST_CASE("single-neuron net computes w2 sin(w1 x + b1) + b2") {
    const MlpSpec s{1, 1, 1, 1, Activation::sin};
    const ParamVector p = {1.5, 0.25, -2.0, 0.5};  // w1, b1, w2, b2
    const std::vector<double> in = {0.8};
    const double got = npr::forward_dense<double>(s, p, in)[0];
    CHECK(got == doctest::Approx(-2.0 * std::sin(1.5 * 0.8 + 0.25) + 0.5).epsilon(1e-15));
  }

  TEST_CASE("low-rank forward equals the densified network") {
    Rng rng(23);
    for (int trial = 0; trial < 60; ++trial) {
      LowRankMlpSpec ls;
      ls.base.d_input = 1 + static_cast<int>(rng.next_u64() % 4);
      ls.base.d_output = 1 + static_cast<int>(rng.next_u64() % 3);
      ls.base.n_hidden = 2 + static_cast<int>(rng.next_u64() % 3);
      ls.base.d_hidden = 2 + static_cast<int>(rng.next_u64() % 12);
      ls.rank = 1 + static_cast<int>(rng.next_u64() % ls.base.d_hidden);
      ls.base.activation = trial % 3 == 0   ? Activation::tanh
                           : trial % 3 == 1 ? Activation::relu
                                            : Activation::sin;
      const ParamVector lr = random_params(lowrank_param_count(ls), rng);
      const ParamVector dp = densify(ls, lr);
      std::vector<double> in(static_cast<std::size_t>(ls.base.d_input));
      for (double& v : in) v = rng.next_uniform(-2.0, 2.0);

      const std::vector<double> a = npr::forward_lowrank<double>(ls, lr, in);
      const std::vector<double> b = npr::forward_dense<double>(ls.base, dp, in);
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(oracle::close_rel(a[i], b[i], 1e-12, 1e-12));

      if (trial < 10) {  // jets agree too, all three slots
        std::vector<Jet2> jin(in.size());
        for (std::size_t i = 0; i < in.size(); ++i)
          jin[i] = i == 0 ? Jet2::seed(in[i]) : Jet2::constant(in[i]);
        const std::vector<Jet2> ja = npr::forward_lowrank<Jet2>(ls, lr, jin);
        const std::vector<Jet2> jb = npr::forward_dense<Jet2>(ls.base, dp, jin);
        for (std::size_t i = 0; i < ja.size(); ++i) {
          CHECK(oracle::close_rel(ja[i].val, jb[i].val, 1e-12, 1e-12));
          CHECK(oracle::close_rel(ja[i].d1, jb[i].d1, 1e-12, 1e-12));
          CHECK(oracle::close_rel(ja[i].d2, jb[i].d2, 1e-12, 1e-12));
        }
      }
    }
  }

  TEST_CASE("time blend: frozen values and endpoint exactness") {
    // (t/T) raw + ((T-t)/T) u0
    CHECK(npr::hard_ic(2.0, 4.0, 0.25, 1.0) == doctest::Approx(3.5).epsilon(1e-15));
    CHECK(npr::hard_ic(-1.0, 0.5, 1.5, 2.0) == doctest::Approx(-0.625).epsilon(1e-15));
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
      const double raw = rng.next_uniform(-5.0, 5.0);
      const double u0 = rng.next_uniform(-5.0, 5.0);
      const double T = rng.next_uniform(0.1, 3.0);
      CHECK(npr::hard_ic(raw, u0, 0.0, T) == u0);  // exact, not approximate
      CHECK(npr::hard_ic(raw, u0, T, T) == raw);
    }
  }

  TEST_CASE("boundary pinning blend: frozen values") {
    CHECK(npr::hard_bc(1.0, 3.0, 0.5) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(npr::hard_bc(7.0, -2.0, 0.0) == 7.0);
    CHECK(npr::hard_bc(7.0, -2.0, 1.0) == -2.0);
  }

  TEST_CASE("spatial boundary blends are exact at the ends") {
    Rng rng(31);
    for (int i = 0; i < 200; ++i) {
      const double raw = rng.next_uniform(-10.0, 10.0);
      const double l = rng.next_uniform(-3.0, 3.0);
      const double r = rng.next_uniform(-3.0, 3.0);
      CHECK(npr::bc_blend_both_ends(raw, 0.0, l, r) == l);
      CHECK(std::abs(npr::bc_blend_both_ends(raw, 1.0, l, r) - r) <= 1e-13);
      CHECK(npr::bc_blend_left(raw, 0.0, l) == l);
      CHECK(npr::bc_blend_left(raw, 1.0, l) == raw);
      // interior: midpoint identity raw/4 + (l+r)/2
      CHECK(npr::bc_blend_both_ends(raw, 0.5, l, r) ==
            doctest::Approx(0.25 * raw + 0.5 * (l + r)).epsilon(1e-14));
    }
  }

  TEST_CASE("constrained wrapper recovers u0 exactly at t=0 and stays on the boundary") {
    Rng rng(41);
    const ICSample ic = test_ic();
    for (int i = 0; i < 300; ++i) {
      ConstraintConfig cfg;
      cfg.t_final = rng.next_uniform(0.5, 2.0);
      cfg.bc_kind = (i % 2 == 0) ? npr::BcKind::dirichlet_both_ends : npr::BcKind::dirichlet_left;
      const double raw = rng.next_uniform(-8.0, 8.0);
      const double x = rng.next_unit();
      CHECK(npr::apply_hard_constraints(raw, 0.0, x, cfg, ic) == npr::eval_ic(ic, x));
      const double t = rng.next_uniform(0.0, cfg.t_final);
      CHECK(std::abs(npr::apply_hard_constraints(raw, t, 0.0, cfg, ic) - npr::eval_ic(ic, 0.0)) <=
            1e-13);
      if (cfg.bc_kind == npr::BcKind::dirichlet_both_ends)
        CHECK(std::abs(npr::apply_hard_constraints(raw, t, 1.0, cfg, ic) - npr::eval_ic(ic, 1.0)) <=
              1e-13);
    }
  }

  TEST_CASE("pipeline value equals a step-by-step composition written out locally") {
    const HypernetSpec spec = small_spec();
    Rng rng(57);
    const ParamVector phi = random_params(dense_param_count(spec.hyper), rng, 0.4);
    const ICSample ic = test_ic();
    const std::vector<double> sensors = npr::discretize(ic, spec.hyper.d_input);
    ConstraintConfig cfg;

    for (int i = 0; i < 20; ++i) {
      const double t = rng.next_unit();
      const double x = rng.next_unit();
      const double got = npr::npr_eval(spec, phi, sensors, t, x, cfg, ic);

      const ParamVector theta = npr::decode_theta(spec, phi, sensors);
      const std::vector<double> in = {t, x};
      const double raw = npr::forward_lowrank<double>(spec.target, theta, in)[0];
      // blends written out by hand, independent of the library helpers
      const double l = npr::eval_ic(ic, 0.0);
      const double r = npr::eval_ic(ic, 1.0);
      const double bc = raw * x * (1.0 - x) + (r - l) * x + l;
      const double want = t / cfg.t_final * bc + (cfg.t_final - t) / cfg.t_final * npr::eval_ic(ic, x);
      CHECK(oracle::close_rel(got, want, 1e-13, 1e-14));
    }
  }

  TEST_CASE("theta decode is one dense hyper forward") {
    const HypernetSpec spec = small_spec();
    Rng rng(58);
    const ParamVector phi = random_params(dense_param_count(spec.hyper), rng, 0.4);
    const std::vector<double> sensors = npr::discretize(test_ic(), spec.hyper.d_input);
    const ParamVector theta = npr::decode_theta(spec, phi, sensors);
    const std::vector<double> want = npr::forward_dense<double>(spec.hyper, phi, sensors);
    REQUIRE(theta.size() == want.size());
    CHECK(theta.size() == lowrank_param_count(spec.target));
    for (std::size_t i = 0; i < theta.size(); ++i) CHECK(theta[i] == want[i]);
  }

  TEST_CASE("tape recording of a dense net matches the plain forward") {
    const MlpSpec s{3, 2, 2, 5, Activation::sin};
    Rng rng(61);
    const ParamVector p = random_params(dense_param_count(s), rng, 0.8);
    const std::vector<double> in = {0.3, -0.9, 1.2};

    Tape tape;
    const VarRange pv = tape.leaves(p);
    const VarRange iv = tape.constants(in);
    const VarRange out = record_mlp(tape, s, pv, iv, true);
    const std::vector<double> want = npr::forward_dense<double>(s, p, in);
    REQUIRE(static_cast<std::size_t>(out.count) == want.size());
    for (std::size_t i = 0; i < want.size(); ++i)
      CHECK(oracle::close_rel(tape.value(out[i]), want[i], 1e-14, 1e-15));

    // gradient of out[0] w.r.t. the parameters vs central differences
    tape.backward(out[0]);
    std::vector<double> at = p;
    const auto f = [&](const std::vector<double>& q) {
      return npr::forward_dense<double>(s, q, in)[0];
    };
    const std::vector<double> fd = oracle::fd_gradient_central(f, at);
    for (std::size_t i = 0; i < p.size(); ++i)
      CHECK(oracle::close_rel(tape.adjoint(pv[i]), fd[i], 1e-5, 1e-8));
  }

  TEST_CASE("recorded derivative passes match plain jet evaluation") {
    const HypernetSpec spec = small_spec();
    Rng rng(71);
    const ParamVector phi = random_params(dense_param_count(spec.hyper), rng, 0.4);
    const ICSample ic = test_ic();
    const std::vector<double> sensors = npr::discretize(ic, spec.hyper.d_input);
    ConstraintConfig cfg;

    for (int i = 0; i < 12; ++i) {
      const double t = rng.next_unit();
      const double x = rng.next_unit();

      Tape tape;
      const VarRange pv = tape.leaves(phi);
      const npr::ModelDerivs d = record_npr_derivs(tape, spec, pv, sensors, t, x, cfg, ic);

      const ParamVector theta = npr::decode_theta(spec, phi, sensors);
      const Jet2 tj = npr::target_eval<Jet2>(spec.target, theta, Jet2::seed(t),
                                             Jet2::constant(x), cfg, ic);
      const Jet2 xj = npr::target_eval<Jet2>(spec.target, theta, Jet2::constant(t),
                                             Jet2::seed(x), cfg, ic);
      CHECK(oracle::close_rel(tape.value(d.u), xj.val, 1e-12, 1e-13));
      CHECK(oracle::close_rel(tape.value(d.u_t), tj.d1, 1e-12, 1e-13));
      CHECK(oracle::close_rel(tape.value(d.u_x), xj.d1, 1e-12, 1e-13));
      CHECK(oracle::close_rel(tape.value(d.u_xx), xj.d2, 1e-12, 1e-13));
      CHECK(oracle::close_rel(tape.value(d.u),
                              npr::npr_eval(spec, phi, sensors, t, x, cfg, ic), 1e-12, 1e-13));

      Tape vtape;
      const VarRange vv = vtape.leaves(phi);
      const Var u = record_npr_value(vtape, spec, vv, sensors, t, x, cfg, ic);
      CHECK(oracle::close_rel(vtape.value(u), xj.val, 1e-12, 1e-13));
    }
  }

  TEST_CASE("recorded derivative coefficients match finite differences in t and x") {
    const HypernetSpec spec = small_spec();
    Rng rng(73);
    const ParamVector phi = random_params(dense_param_count(spec.hyper), rng, 0.4);
    const ICSample ic = test_ic();
    const std::vector<double> sensors = npr::discretize(ic, spec.hyper.d_input);
    ConstraintConfig cfg;

    const auto u_at = [&](double t, double x) {
      return npr::npr_eval(spec, phi, sensors, t, x, cfg, ic);
    };
    for (int i = 0; i < 8; ++i) {
      const double t = rng.next_uniform(0.1, 0.9);
      const double x = rng.next_uniform(0.1, 0.9);
      Tape tape;
      const VarRange pv = tape.leaves(phi);
      const npr::ModelDerivs d = record_npr_derivs(tape, spec, pv, sensors, t, x, cfg, ic);
      CHECK(oracle::close_rel(tape.value(d.u_t),
                              oracle::central_d1([&](double s) { return u_at(s, x); }, t), 1e-5,
                              1e-7));
      CHECK(oracle::close_rel(tape.value(d.u_x),
                              oracle::central_d1([&](double s) { return u_at(t, s); }, x), 1e-5,
                              1e-7));
      CHECK(oracle::close_rel(tape.value(d.u_xx),
                              oracle::central_d2([&](double s) { return u_at(t, s); }, x), 1e-3,
                              1e-5));
    }
  }

  TEST_CASE("parameter gradients through the full pipeline match finite differences") {
    const HypernetSpec spec = small_spec();
    Rng rng(79);
    const ParamVector phi = random_params(dense_param_count(spec.hyper), rng, 0.4);
    const ICSample ic = test_ic();
    const std::vector<double> sensors = npr::discretize(ic, spec.hyper.d_input);
    ConstraintConfig cfg;
    const double t = 0.37, x = 0.58;

    // objective touching every output: u_t + 2 u_xx + 0.5 u + 0.25 u_x
    Tape tape;
    const VarRange pv = tape.leaves(phi);
    const npr::ModelDerivs d = record_npr_derivs(tape, spec, pv, sensors, t, x, cfg, ic);
    const Var obj = tape.add(tape.add(tape.axpb(d.u_t, 1.0, 0.0), tape.axpb(d.u_xx, 2.0, 0.0)),
                             tape.add(tape.axpb(d.u, 0.5, 0.0), tape.axpb(d.u_x, 0.25, 0.0)));
    tape.backward(obj);

    const auto f = [&](const std::vector<double>& q) {
      const ParamVector theta = npr::decode_theta(spec, q, sensors);
      const Jet2 tj = npr::target_eval<Jet2>(spec.target, theta, Jet2::seed(t),
                                             Jet2::constant(x), cfg, ic);
      const Jet2 xj = npr::target_eval<Jet2>(spec.target, theta, Jet2::constant(t),
                                             Jet2::seed(x), cfg, ic);
      return tj.d1 + 2.0 * xj.d2 + 0.5 * xj.val + 0.25 * xj.d1;
    };
    CHECK(f(phi) == doctest::Approx(tape.value(obj)).epsilon(1e-11));
    const std::vector<double> fd = oracle::fd_gradient_central(f, phi, 1e-5);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < phi.size(); ++i)
      if (!oracle::close_rel(tape.adjoint(pv[i]), fd[i], 1e-4, 1e-7)) ++bad;
    CHECK(bad == 0);
  }

  TEST_CASE("operator-net parameter counts: frozen table") {
    const DeepONetSpec heat = npr::make_deeponet_spec(32, 64, 32);
    const auto [ht, hb] = deeponet_param_counts(heat);
    CHECK(ht == 4320);
    CHECK(hb == 16672);
    CHECK(deeponet_total_params(heat) == 20992);

    const DeepONetSpec burgers = npr::make_deeponet_spec(32, 128, 64);
    const auto [bt, bb] = deeponet_param_counts(burgers);
    CHECK(bt == 14752);
    CHECK(bb == 57888);

    const DeepONetSpec tiny = npr::make_deeponet_spec(1, 1, 1, 1, 1);
    const auto [tt, tb] = deeponet_param_counts(tiny);
    CHECK(tb == 4);  // 1 -> 1 -> 1
    CHECK(tt == 5);  // (t, x) -> 1 -> 1
  }

  TEST_CASE("operator-net value equals branch–trunk composition written out locally") {
    const DeepONetSpec spec = npr::make_deeponet_spec(6, 7, 5, 3, 2);
    Rng rng(83);
    const ParamVector p = random_params(deeponet_total_params(spec), rng, 0.5);
    const ICSample ic = test_ic();
    const std::vector<double> sensors = npr::discretize(ic, spec.branch.d_input);
    ConstraintConfig cfg;
    cfg.bc_kind = npr::BcKind::dirichlet_left;

    const auto [n_trunk, n_branch] = deeponet_param_counts(spec);
    for (int i = 0; i < 15; ++i) {
      const double t = rng.next_unit();
      const double x = rng.next_unit();
      const double got = npr::deeponet_eval<double>(spec, p, sensors, t, x, cfg, ic);

      const std::span<const double> ps(p);
      const std::vector<double> lat =
          npr::forward_dense<double>(spec.branch, ps.subspan(0, n_branch), sensors);
      const std::vector<double> in = {t, x};
      const std::vector<double> tr =
          npr::forward_dense<double>(spec.trunk, ps.subspan(n_branch, n_trunk), in);
      double raw = 0.0;
      for (std::size_t k = 0; k < lat.size(); ++k) raw += lat[k] * tr[k];
      const double l = npr::eval_ic(ic, 0.0);
      const double bc = x * raw + (1.0 - x) * l;
      const double want = t * bc + (1.0 - t) * npr::eval_ic(ic, x);
      CHECK(oracle::close_rel(got, want, 1e-13, 1e-14));
      CHECK(npr::deeponet_eval<double>(spec, p, sensors, 0.0, x, cfg, ic) ==
            npr::eval_ic(ic, x));
    }
  }

  TEST_CASE("operator-net recording matches plain jets and finite differences") {
    const DeepONetSpec spec = npr::make_deeponet_spec(6, 7, 5, 3, 2);
    Rng rng(89);
    const ParamVector p = random_params(deeponet_total_params(spec), rng, 0.5);
    const ICSample ic = test_ic();
    const std::vector<double> sensors = npr::discretize(ic, spec.branch.d_input);
    ConstraintConfig cfg;

    for (int i = 0; i < 10; ++i) {
      const double t = rng.next_unit();
      const double x = rng.next_unit();
      Tape tape;
      const VarRange pv = tape.leaves(p);
      const npr::ModelDerivs d = record_deeponet_derivs(tape, spec, pv, sensors, t, x, cfg, ic);

      const Jet2 tj = npr::deeponet_eval<Jet2>(spec, p, sensors, Jet2::seed(t),
                                               Jet2::constant(x), cfg, ic);
      const Jet2 xj = npr::deeponet_eval<Jet2>(spec, p, sensors, Jet2::constant(t),
                                               Jet2::seed(x), cfg, ic);
      CHECK(oracle::close_rel(tape.value(d.u), xj.val, 1e-12, 1e-13));
      CHECK(oracle::close_rel(tape.value(d.u_t), tj.d1, 1e-12, 1e-13));
      CHECK(oracle::close_rel(tape.value(d.u_x), xj.d1, 1e-12, 1e-13));
      CHECK(oracle::close_rel(tape.value(d.u_xx), xj.d2, 1e-12, 1e-13));

      Tape vtape;
      const VarRange vv = vtape.leaves(p);
      const Var u = record_deeponet_value(vtape, spec, vv, sensors, t, x, cfg, ic);
      CHECK(oracle::close_rel(vtape.value(u), xj.val, 1e-12, 1e-13));
    }

    // gradient of u_t + u_xx over every parameter vs finite differences
    const double t = 0.41, x = 0.66;
    Tape tape;
    const VarRange pv = tape.leaves(p);
    const npr::ModelDerivs d = record_deeponet_derivs(tape, spec, pv, sensors, t, x, cfg, ic);
    tape.backward(tape.add(d.u_t, d.u_xx));
    const auto f = [&](const std::vector<double>& q) {
      const Jet2 tj = npr::deeponet_eval<Jet2>(spec, q, sensors, Jet2::seed(t),
                                               Jet2::constant(x), cfg, ic);
      const Jet2 xj = npr::deeponet_eval<Jet2>(spec, q, sensors, Jet2::constant(t),
                                               Jet2::seed(x), cfg, ic);
      return tj.d1 + xj.d2;
    };
    const std::vector<double> fd = oracle::fd_gradient_central(f, p, 1e-5);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (!oracle::close_rel(tape.adjoint(pv[i]), fd[i], 1e-4, 1e-7)) ++bad;
    CHECK(bad == 0);
  }

  TEST_CASE("spec validation rejects nonsense") {
    MlpSpec bad;
    bad.d_hidden = 0;
    CHECK_THROWS_AS(npr::validate(bad), npr::ConfigError);
    LowRankMlpSpec lbad;
    lbad.rank = 0;
    CHECK_THROWS_AS(npr::validate(lbad), npr::ConfigError);
    LowRankMlpSpec lbad2;
    lbad2.rank = lbad2.base.d_hidden + 1;  // factor wider than the matrix
    CHECK_THROWS_AS(npr::validate(lbad2), npr::ConfigError);
  }
}
