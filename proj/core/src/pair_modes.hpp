#pragma once

#include <cmath>

#include "brownent/model.hpp"

// Normal-mode bookkeeping for the harmonic pair, shared by the closed-form
// propagation and the exact stepper.
namespace brownent::detail {

/// (1 - exp(-k t)) / k, continuous through k = 0 (where it equals t).
inline double relax(double k, double t) {
  if (k == 0.0) return t;
  return -std::expm1(-k * t) / k;
}

struct PairModes {
  double rate_plus;   // a + g
  double rate_minus;  // a - g
  double diff_plus;   // noise intensity of r+: (T1 + T2) / 2
  double diff_minus;  // noise intensity of r-: (T1 + T2) / 2
  double diff_cross;  // cross intensity <xi+ xi->: (T1 - T2) / 2
};

inline PairModes pair_modes(const PairParams& p) {
  const double t1 = p.temp1();
  const double t2 = p.temp2();
  return {p.a + p.g, p.a - p.g, 0.5 * (t1 + t2), 0.5 * (t1 + t2), 0.5 * (t1 - t2)};
}

/// Mode covariance: var_plus = <r+^2>, var_minus = <r-^2>, cross = <r+ r->.
struct ModeCovariance {
  double var_plus;
  double var_minus;
  double cross;
};

inline ModeCovariance to_modes(const Covariance2& c) {
  return {(c.s11 + c.s22 + 2.0 * c.s12) / 4.0, (c.s11 + c.s22 - 2.0 * c.s12) / 4.0,
          (c.s11 - c.s22) / 4.0};
}

inline Covariance2 from_modes(const ModeCovariance& m) {
  return {m.var_plus + m.var_minus + 2.0 * m.cross, m.var_plus - m.var_minus,
          m.var_plus + m.var_minus - 2.0 * m.cross};
}

/// Covariance accumulated from the noise alone over an interval dt.
inline ModeCovariance mode_noise(const PairModes& m, double dt) {
  return {m.diff_plus * relax(2.0 * m.rate_plus, dt), m.diff_minus * relax(2.0 * m.rate_minus, dt),
          m.diff_cross * relax(m.rate_plus + m.rate_minus, dt)};
}

}  // namespace brownent::detail
