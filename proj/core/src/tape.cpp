#include "npr/tape.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>

namespace npr {

Tape::Tape() { reserve(std::size_t{1} << 12); }

void Tape::reserve(std::size_t n) {
  nodes_.reserve(n);
  val_.reserve(n);
  d1_.reserve(n);
  d2_.reserve(n);
  av_.reserve(n);
  a1_.reserve(n);
  a2_.reserve(n);
}

Var Tape::push(const Node& n, const Jet2& p) {
  const VarId id = static_cast<VarId>(nodes_.size());
  nodes_.push_back(n);
  val_.push_back(p.val);
  d1_.push_back(p.d1);
  d2_.push_back(p.d2);
  // Adjoint slots start clean so rolled-back arena slots can be reused
  // without a separate clearing pass.
  av_.push_back(0.0);
  a1_.push_back(0.0);
  a2_.push_back(0.0);
  return Var{id};
}

bool Tape::is_jet(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].jet != 0; }

// ---- leaves & constants -----------------------------------------------------

Var Tape::leaf(double v) { return push(Node{Op::kLeaf, 0}, Jet2::constant(v)); }

VarRange Tape::leaves(std::span<const double> v) {
  VarRange r{static_cast<VarId>(nodes_.size()), static_cast<std::int32_t>(v.size())};
  for (double x : v) leaf(x);
  return r;
}

Var Tape::constant(double v) { return push(Node{Op::kConstR, 0}, Jet2::constant(v)); }

VarRange Tape::constants(std::span<const double> v) {
  VarRange r{static_cast<VarId>(nodes_.size()), static_cast<std::int32_t>(v.size())};
  for (double x : v) constant(x);
  return r;
}

Var Tape::constant_jet(const Jet2& k) { return push(Node{Op::kConstJ, 1}, k); }

Var Tape::seeded(double v) { return push(Node{Op::kSeed, 1}, Jet2::seed(v)); }

// ---- elementary ops ---------------------------------------------------------

Var Tape::add(Var a, Var b) {
  Node n{Op::kAdd, static_cast<std::uint8_t>(is_jet(a) || is_jet(b)), a.id, b.id};
  return push(n, payload(a) + payload(b));
}

Var Tape::sub(Var a, Var b) {
  Node n{Op::kSub, static_cast<std::uint8_t>(is_jet(a) || is_jet(b)), a.id, b.id};
  return push(n, payload(a) - payload(b));
}

Var Tape::mul(Var a, Var b) {
  Node n{Op::kMul, static_cast<std::uint8_t>(is_jet(a) || is_jet(b)), a.id, b.id};
  return push(n, payload(a) * payload(b));
}

Var Tape::div(Var a, Var b) {
  Node n{Op::kDiv, static_cast<std::uint8_t>(is_jet(a) || is_jet(b)), a.id, b.id};
  return push(n, payload(a) / payload(b));  // throws NumericError on value(b)==0
}

Var Tape::axpb(Var x, double a, double b) {
  Node n{Op::kAxpb, static_cast<std::uint8_t>(is_jet(x)), x.id};
  n.k0 = a;
  n.k1 = b;
  return push(n, payload(x) * a + b);
}

Var Tape::unary_transcendental(Op op, Var v, double f0, double f1, double f2, double f3) {
  (void)f3;  // recomputed in backward from the stored payloads
  Node n{op, static_cast<std::uint8_t>(is_jet(v)), v.id};
  n.k0 = f1;
  return push(n, jet_chain(f0, f1, f2, payload(v)));
}

Var Tape::sin(Var v) {
  const double s = std::sin(value(v)), c = std::cos(value(v));
  return unary_transcendental(Op::kSin, v, s, c, -s, -c);
}

Var Tape::cos(Var v) {
  const double s = std::sin(value(v)), c = std::cos(value(v));
  return unary_transcendental(Op::kCos, v, c, -s, -c, s);
}

Var Tape::exp(Var v) {
  const double e = std::exp(value(v));
  return unary_transcendental(Op::kExp, v, e, e, e, e);
}

Var Tape::tanh(Var v) {
  const double t = std::tanh(value(v));
  const double sech2 = 1.0 - t * t;
  return unary_transcendental(Op::kTanh, v, t, sech2, -2.0 * t * sech2, 0.0);
}

Var Tape::pow_int(Var v, int n) {
  const double x = value(v);
  if (n < 0 && x == 0.0) throw NumericError("pow_int: zero base with negative exponent");
  Node node{Op::kPowInt, static_cast<std::uint8_t>(is_jet(v)), v.id};
  node.d = n;
  const double f1 = n == 0 ? 0.0 : n * std::pow(x, n - 1);
  node.k0 = f1;
  const double f0 = n == 0 ? 1.0 : std::pow(x, n);
  const double f2 = (n == 0 || n == 1) ? 0.0 : static_cast<double>(n) * (n - 1) * std::pow(x, n - 2);
  return push(node, jet_chain(f0, f1, f2, payload(v)));
}

Var Tape::abs(Var v) {
  const double x = value(v);
  const double s = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
  Node n{Op::kAbs, static_cast<std::uint8_t>(is_jet(v)), v.id};
  n.k0 = s;
  const Jet2 p = payload(v);
  return push(n, Jet2{std::abs(x), s * p.d1, s * p.d2});
}

Var Tape::mul_const_jet(Var x, const Jet2& k) {
  Node n{Op::kMulKJet, 1, x.id};
  n.k0 = k.val;
  n.k1 = k.d1;
  n.k2 = k.d2;
  return push(n, payload(x) * k);
}

Var Tape::add_const_jet(Var x, const Jet2& k) {
  Node n{Op::kAddKJet, 1, x.id};
  n.k0 = k.val;
  n.k1 = k.d1;
  n.k2 = k.d2;
  return push(n, payload(x) + k);
}

// ---- extraction -------------------------------------------------------------

Var Tape::extract_val(Var v) {
  return push(Node{Op::kExtVal, 0, v.id}, Jet2::constant(value(v)));
}

Var Tape::extract_d1(Var v) {
  return push(Node{Op::kExtD1, 0, v.id}, Jet2::constant(payload(v).d1));
}

Var Tape::extract_d2(Var v) {
  return push(Node{Op::kExtD2, 0, v.id}, Jet2::constant(payload(v).d2));
}

// ---- fused affine -----------------------------------------------------------

Var Tape::affine(VarRange w, VarRange x, Var bias) {
  bool jet = false;
  for (std::int32_t j = 0; j < x.count && !jet; ++j) jet = is_jet(x[j]);
  return jet ? affine_jet(w, x, bias) : affine_real(w, x, bias, false);
}

Var Tape::affine_real(VarRange w, VarRange x, Var bias, bool x_is_constant) {
  assert(w.count == x.count);
  const double* wv = val_.data() + w.first;
  const double* xv = val_.data() + x.first;
  double acc = bias.valid() ? val_[static_cast<std::size_t>(bias.id)] : 0.0;
  for (std::int32_t j = 0; j < w.count; ++j) acc += wv[j] * xv[j];
  Node n{x_is_constant ? Op::kAffRRCX : Op::kAffRR, 0, w.first, x.first, bias.id, w.count};
  return push(n, Jet2::constant(acc));
}

Var Tape::affine_jet(VarRange w, VarRange x, Var bias) {
  assert(w.count == x.count);
  const double* wv = val_.data() + w.first;
  const double* xv = val_.data() + x.first;
  const double* x1 = d1_.data() + x.first;
  const double* x2 = d2_.data() + x.first;
  double acc = bias.valid() ? val_[static_cast<std::size_t>(bias.id)] : 0.0;
  double acc1 = 0.0, acc2 = 0.0;
  for (std::int32_t j = 0; j < w.count; ++j) {
    acc += wv[j] * xv[j];
    acc1 += wv[j] * x1[j];
    acc2 += wv[j] * x2[j];
  }
  Node n{Op::kAffJR, 1, w.first, x.first, bias.id, w.count};
  return push(n, Jet2{acc, acc1, acc2});
}

// ---- adjoint bookkeeping ----------------------------------------------------

void Tape::copy_adjoints(VarRange r, std::span<double> out) const {
  std::copy_n(av_.data() + r.first, r.count, out.data());
}

void Tape::accumulate_adjoints(VarRange r, std::span<double> out) const {
  const double* a = av_.data() + r.first;
  for (std::int32_t j = 0; j < r.count; ++j) out[static_cast<std::size_t>(j)] += a[j];
}

void Tape::clear_adjoints(VarRange r) {
  std::fill_n(av_.data() + r.first, r.count, 0.0);
  std::fill_n(a1_.data() + r.first, r.count, 0.0);
  std::fill_n(a2_.data() + r.first, r.count, 0.0);
}

void Tape::set_values(VarRange r, std::span<const double> v) {
  assert(static_cast<std::size_t>(r.count) == v.size());
  std::copy_n(v.data(), r.count, val_.data() + r.first);
}

void Tape::rollback(std::size_t m) {
  nodes_.resize(m);
  val_.resize(m);
  d1_.resize(m);
  d2_.resize(m);
  av_.resize(m);
  a1_.resize(m);
  a2_.resize(m);
}

void Tape::reset() { rollback(0); }

// ---- reverse pass -----------------------------------------------------------

namespace {
// Adjoint of multiplying by the jet p, transposed: routes the cotangent
// triple (gv, g1, g2) of the product into the other factor.
inline void corr_accum(double gv, double g1, double g2, const Jet2& p,
                       double& ov, double& o1, double& o2) {
  ov += gv * p.val + g1 * p.d1 + g2 * p.d2;
  o1 += g1 * p.val + 2.0 * g2 * p.d1;
  o2 += g2 * p.val;
}
}  // namespace

void Tape::backward(Var loss, double seed, std::size_t stop) {
  const double lv = value(loss);
  if (!std::isfinite(lv)) {
    throw NumericError("backward: non-finite loss value " + std::to_string(lv));
  }
  av_[static_cast<std::size_t>(loss.id)] += seed;

  for (std::int64_t i = loss.id; i >= static_cast<std::int64_t>(stop); --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    const double gv = av_[static_cast<std::size_t>(i)];
    if (n.jet == 0) {
      if (gv == 0.0) continue;
      if (n.op == Op::kLeaf) continue;  // leaves keep accumulating across calls
      av_[static_cast<std::size_t>(i)] = 0.0;  // consumed; keeps repeat passes clean
      switch (n.op) {
        case Op::kConstR:
          break;
        case Op::kAdd:
          av_[n.a] += gv;
          av_[n.b] += gv;
          break;
        case Op::kSub:
          av_[n.a] += gv;
          av_[n.b] -= gv;
          break;
        case Op::kMul:
          av_[n.a] += gv * val_[n.b];
          av_[n.b] += gv * val_[n.a];
          break;
        case Op::kDiv: {
          const double rb = 1.0 / val_[n.b];
          av_[n.a] += gv * rb;
          av_[n.b] -= gv * val_[static_cast<std::size_t>(i)] * rb;
          break;
        }
        case Op::kAxpb:
          av_[n.a] += gv * n.k0;
          break;
        case Op::kAbs:
        case Op::kSin:
        case Op::kCos:
        case Op::kExp:
        case Op::kTanh:
        case Op::kPowInt:
          av_[n.a] += gv * n.k0;  // k0 caches f'(v)
          break;
        case Op::kExtVal:
          av_[n.a] += gv;
          break;
        case Op::kExtD1:
          a1_[n.a] += gv;
          break;
        case Op::kExtD2:
          a2_[n.a] += gv;
          break;
        case Op::kAffRR:
        case Op::kAffRRCX: {
          const std::int32_t len = n.d;
          double* aw = av_.data() + n.a;
          const double* xv = val_.data() + n.b;
          for (std::int32_t j = 0; j < len; ++j) aw[j] += gv * xv[j];
          if (n.op == Op::kAffRR) {
            double* ax = av_.data() + n.b;
            const double* wv = val_.data() + n.a;
            for (std::int32_t j = 0; j < len; ++j) ax[j] += gv * wv[j];
          }
          if (n.c >= 0) av_[n.c] += gv;
          break;
        }
        default:
          assert(false && "real payload node with jet-only op");
      }
      continue;
    }

    // jet payload: the cotangent is a triple
    const double g1 = a1_[static_cast<std::size_t>(i)];
    const double g2 = a2_[static_cast<std::size_t>(i)];
    if (gv == 0.0 && g1 == 0.0 && g2 == 0.0) continue;
    av_[static_cast<std::size_t>(i)] = 0.0;  // jet nodes are never leaves
    a1_[static_cast<std::size_t>(i)] = 0.0;
    a2_[static_cast<std::size_t>(i)] = 0.0;
    switch (n.op) {
      case Op::kConstJ:
      case Op::kSeed:
        break;
      case Op::kAdd:
        av_[n.a] += gv; a1_[n.a] += g1; a2_[n.a] += g2;
        av_[n.b] += gv; a1_[n.b] += g1; a2_[n.b] += g2;
        break;
      case Op::kSub:
        av_[n.a] += gv; a1_[n.a] += g1; a2_[n.a] += g2;
        av_[n.b] -= gv; a1_[n.b] -= g1; a2_[n.b] -= g2;
        break;
      case Op::kMul:
        corr_accum(gv, g1, g2, payload(Var{n.b}), av_[n.a], a1_[n.a], a2_[n.a]);
        corr_accum(gv, g1, g2, payload(Var{n.a}), av_[n.b], a1_[n.b], a2_[n.b]);
        break;
      case Op::kDiv: {
        const Jet2 b = payload(Var{n.b});
        const double rv = 1.0 / b.val;
        const Jet2 r{rv, -b.d1 * rv * rv, -b.d2 * rv * rv + 2.0 * b.d1 * b.d1 * rv * rv * rv};
        corr_accum(gv, g1, g2, r, av_[n.a], a1_[n.a], a2_[n.a]);
        const Jet2 pb = -(payload(Var{static_cast<VarId>(i)}) * r);
        corr_accum(gv, g1, g2, pb, av_[n.b], a1_[n.b], a2_[n.b]);
        break;
      }
      case Op::kAxpb:
        av_[n.a] += gv * n.k0; a1_[n.a] += g1 * n.k0; a2_[n.a] += g2 * n.k0;
        break;
      case Op::kAbs:
        av_[n.a] += gv * n.k0; a1_[n.a] += g1 * n.k0; a2_[n.a] += g2 * n.k0;
        break;
      case Op::kSin:
      case Op::kCos: {
        // For both: f' = k0, f'' = -value, f''' = -k0.
        const double f1 = n.k0, f2 = -val_[static_cast<std::size_t>(i)], f3 = -n.k0;
        const double u1 = d1_[n.a], u2 = d2_[n.a];
        const Jet2 p{f1, f2 * u1, f2 * u2 + f3 * u1 * u1};
        corr_accum(gv, g1, g2, p, av_[n.a], a1_[n.a], a2_[n.a]);
        break;
      }
      case Op::kExp: {
        const double e = val_[static_cast<std::size_t>(i)];
        const double u1 = d1_[n.a], u2 = d2_[n.a];
        const Jet2 p{e, e * u1, e * (u2 + u1 * u1)};
        corr_accum(gv, g1, g2, p, av_[n.a], a1_[n.a], a2_[n.a]);
        break;
      }
      case Op::kTanh: {
        const double t = val_[static_cast<std::size_t>(i)];
        const double f1 = 1.0 - t * t;
        const double f2 = -2.0 * t * f1;
        const double f3 = -2.0 * f1 * (1.0 - 3.0 * t * t);
        const double u1 = d1_[n.a], u2 = d2_[n.a];
        const Jet2 p{f1, f2 * u1, f2 * u2 + f3 * u1 * u1};
        corr_accum(gv, g1, g2, p, av_[n.a], a1_[n.a], a2_[n.a]);
        break;
      }
      case Op::kPowInt: {
        const int m = n.d;
        const double x = val_[n.a];
        const double f1 = n.k0;
        const double f2 = (m == 0 || m == 1) ? 0.0 : static_cast<double>(m) * (m - 1) * std::pow(x, m - 2);
        const double f3 = (m == 0 || m == 1 || m == 2)
                              ? 0.0
                              : static_cast<double>(m) * (m - 1) * (m - 2) * std::pow(x, m - 3);
        const double u1 = d1_[n.a], u2 = d2_[n.a];
        const Jet2 p{f1, f2 * u1, f2 * u2 + f3 * u1 * u1};
        corr_accum(gv, g1, g2, p, av_[n.a], a1_[n.a], a2_[n.a]);
        break;
      }
      case Op::kMulKJet: {
        const Jet2 k{n.k0, n.k1, n.k2};
        corr_accum(gv, g1, g2, k, av_[n.a], a1_[n.a], a2_[n.a]);
        break;
      }
      case Op::kAddKJet:
        av_[n.a] += gv; a1_[n.a] += g1; a2_[n.a] += g2;
        break;
      case Op::kAffJR: {
        const std::int32_t len = n.d;
        double* aw = av_.data() + n.a;
        double* axv = av_.data() + n.b;
        double* ax1 = a1_.data() + n.b;
        double* ax2 = a2_.data() + n.b;
        const double* wv = val_.data() + n.a;
        const double* xv = val_.data() + n.b;
        const double* x1 = d1_.data() + n.b;
        const double* x2 = d2_.data() + n.b;
        for (std::int32_t j = 0; j < len; ++j) {
          aw[j] += gv * xv[j] + g1 * x1[j] + g2 * x2[j];
          const double w = wv[j];
          axv[j] += gv * w;
          ax1[j] += g1 * w;
          ax2[j] += g2 * w;
        }
        if (n.c >= 0) av_[n.c] += gv;
        break;
      }
      default:
        assert(false && "jet payload node with real-only op");
    }
  }
}

}  // namespace npr
