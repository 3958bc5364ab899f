#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "npr/jet.hpp"

namespace npr {

using VarId = std::int32_t;

/// Handle to a tape variable.
struct Var {
  VarId id = -1;
  constexpr bool valid() const { return id >= 0; }
};

/// A contiguous run of tape variables (e.g. a weight matrix, a layer output).
struct VarRange {
  VarId first = 0;
  std::int32_t count = 0;
  Var operator[](std::int32_t i) const { return Var{first + i}; }
};

/// Reverse-mode tape recording scalar operations over variables whose payload
/// is either a plain real or a second-order jet (Jet2).  One implementation
/// serves both: residual losses record jet sections downstream of seeded t/x
/// coordinates, data losses record plain real sections, and coefficient
/// extraction bridges the two while staying differentiable — the adjoint of an
/// extraction routes into the matching jet slot of its operand.
///
/// Values are computed eagerly at record time (define-by-run); backward() then
/// accumulates adjoints of a scalar loss into every differentiable leaf.
/// Adjoint slots are zeroed when a node is pushed, and backward() consumes
/// (re-zeroes) every interior adjoint it visits, so a section that is rolled
/// back and re-recorded (the per-batch-element pattern) needs no extra
/// clearing, and a retained section may be backpropped repeatedly; leaf
/// adjoints keep accumulating across calls until clear_adjoints() is called.
///
/// The tape is an arena owned by a single worker; it is not thread-safe.
class Tape {
 public:
  Tape();

  // ---- leaves, constants, seeds -------------------------------------------
  Var leaf(double v);
  VarRange leaves(std::span<const double> v);
  Var constant(double v);
  VarRange constants(std::span<const double> v);
  /// Non-differentiable jet payload (e.g. u0(x) evaluated off-tape).
  Var constant_jet(const Jet2& k);
  /// Seeded coordinate: payload (v, 1, 0), not differentiable.
  Var seeded(double v);

  // ---- elementary operations ----------------------------------------------
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);  // NumericError when value(b) == 0
  Var axpb(Var x, double a, double b);  // a*x + b
  Var neg(Var x) { return axpb(x, -1.0, 0.0); }
  Var sin(Var v);
  Var cos(Var v);
  Var exp(Var v);
  Var tanh(Var v);
  Var pow_int(Var v, int n);
  Var abs(Var v);
  Var mul_const_jet(Var x, const Jet2& k);
  Var add_const_jet(Var x, const Jet2& k);

  // ---- jet coefficient extraction (differentiable) -------------------------
  Var extract_val(Var v);
  Var extract_d1(Var v);
  Var extract_d2(Var v);

  // ---- fused affine nodes ---------------------------------------------------
  /// out = dot(w, x) + bias.  Weights must be real-payload variables; x may be
  /// real or jet.  Pass an invalid bias Var for no bias.  Scans x for jet
  /// payloads; the *_real / *_jet variants skip the scan.
  Var affine(VarRange w, VarRange x, Var bias);
  Var affine_real(VarRange w, VarRange x, Var bias, bool x_is_constant = false);
  Var affine_jet(VarRange w, VarRange x, Var bias);

  // ---- inspection -----------------------------------------------------------
  double value(Var v) const { return val_[static_cast<std::size_t>(v.id)]; }
  Jet2 payload(Var v) const {
    const auto i = static_cast<std::size_t>(v.id);
    return {val_[i], d1_[i], d2_[i]};
  }
  bool is_jet(Var v) const;
  std::size_t size() const { return val_.size(); }

  // ---- reverse pass ----------------------------------------------------------
  /// Accumulate seed * d(loss)/d(leaf) into leaf adjoints.  Only nodes with
  /// id >= stop are traversed; everything the section depends on below stop
  /// must be a leaf or constant.  NumericError if value(loss) is not finite.
  void backward(Var loss, double seed = 1.0, std::size_t stop = 0);

  double adjoint(Var v) const { return av_[static_cast<std::size_t>(v.id)]; }
  void copy_adjoints(VarRange r, std::span<double> out) const;
  void accumulate_adjoints(VarRange r, std::span<double> out) const;  // out += adj
  void clear_adjoints(VarRange r);

  /// Overwrite leaf/constant values in place (layout and graph unchanged).
  void set_values(VarRange r, std::span<const double> v);

  // ---- arena management ------------------------------------------------------
  std::size_t mark() const { return val_.size(); }
  void rollback(std::size_t m);
  void reset();
  void reserve(std::size_t n);

 private:
  enum class Op : std::uint8_t {
    kLeaf, kConstR, kConstJ, kSeed,
    kAdd, kSub, kMul, kDiv, kAxpb, kAbs,
    kSin, kCos, kExp, kTanh, kPowInt,
    kMulKJet, kAddKJet,
    kExtVal, kExtD1, kExtD2,
    kAffRR, kAffRRCX, kAffJR,
  };

  struct Node {
    Op op;
    std::uint8_t jet;  // payload kind of this variable
    std::int32_t a = -1, b = -1, c = -1, d = 0;
    double k0 = 0.0, k1 = 0.0, k2 = 0.0;
  };

  Var push(const Node& n, const Jet2& payload);
  Var unary_transcendental(Op op, Var v, double f0, double f1, double f2, double f3);

  std::vector<Node> nodes_;
  std::vector<double> val_, d1_, d2_;  // payload (d1/d2 stay 0 for real vars)
  std::vector<double> av_, a1_, a2_;   // adjoint triples
};

/// Expression-style wrapper so formulas (residuals, constraint blends) can be
/// written once and instantiated over Jet2 / double / tape variables alike.
struct TVar {
  Tape* tape = nullptr;
  Var v;
};

inline TVar operator+(TVar a, TVar b) { return {a.tape, a.tape->add(a.v, b.v)}; }
inline TVar operator-(TVar a, TVar b) { return {a.tape, a.tape->sub(a.v, b.v)}; }
inline TVar operator*(TVar a, TVar b) { return {a.tape, a.tape->mul(a.v, b.v)}; }
inline TVar operator/(TVar a, TVar b) { return {a.tape, a.tape->div(a.v, b.v)}; }
inline TVar operator*(TVar a, double c) { return {a.tape, a.tape->axpb(a.v, c, 0.0)}; }
inline TVar operator*(double c, TVar a) { return a * c; }
inline TVar operator+(TVar a, double c) { return {a.tape, a.tape->axpb(a.v, 1.0, c)}; }
inline TVar operator+(double c, TVar a) { return a + c; }
inline TVar operator-(TVar a, double c) { return a + (-c); }
inline TVar operator-(double c, TVar a) { return {a.tape, a.tape->axpb(a.v, -1.0, c)}; }
inline TVar operator-(TVar a) { return {a.tape, a.tape->neg(a.v)}; }
inline TVar sin(TVar a) { return {a.tape, a.tape->sin(a.v)}; }
inline TVar cos(TVar a) { return {a.tape, a.tape->cos(a.v)}; }
inline TVar exp(TVar a) { return {a.tape, a.tape->exp(a.v)}; }
inline TVar tanh(TVar a) { return {a.tape, a.tape->tanh(a.v)}; }
inline TVar abs(TVar a) { return {a.tape, a.tape->abs(a.v)}; }
inline TVar pow_int(TVar a, int n) { return {a.tape, a.tape->pow_int(a.v, n)}; }

}  // namespace npr
