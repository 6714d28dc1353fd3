#pragma once

namespace equinav {

/// One step of the classical fourth-order commutator-free Lie group method
/// for dX/dt = X * f(s, X), s in [0, 1] being the normalized step time.
///
/// `field(s, X)` returns a tangent vector, `exp_map` maps tangents to group
/// elements and `mul` composes two group elements.
template <class Element, class Field, class ExpMap, class Mul>
Element cf4_step(const Element& x0, double h, Field&& field, ExpMap&& exp_map, Mul&& mul) {
  const auto f1 = (h * field(0.0, x0)).eval();
  const Element y2 = mul(x0, exp_map((0.5 * f1).eval()));
  const auto f2 = (h * field(0.5, y2)).eval();
  const Element y3 = mul(x0, exp_map((0.5 * f2).eval()));
  const auto f3 = (h * field(0.5, y3)).eval();
  const Element y4 = mul(y2, exp_map((f3 - 0.5 * f1).eval()));
  const auto f4 = (h * field(1.0, y4)).eval();
  const auto a = ((3.0 * f1 + 2.0 * f2 + 2.0 * f3 - f4) / 12.0).eval();
  const auto b = ((-f1 + 2.0 * f2 + 2.0 * f3 + 3.0 * f4) / 12.0).eval();
  return mul(mul(x0, exp_map(a)), exp_map(b));
}

}  // namespace equinav
