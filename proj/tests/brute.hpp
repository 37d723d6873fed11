#pragma once

// Reference computations for tests: plain recursion over the tree, no memo,
// no closed forms.

#include <cmath>
#include <functional>
#include <vector>

#include "vgb/tree.hpp"

namespace brute {

/// V*(y) as an explicit sum over every completion of y.
inline double value(const vgb::BaseModel& m, const vgb::TiltSpec& tilt, vgb::Seq y) {
  if (static_cast<int>(y.size()) == m.horizon())
    return tilt(y);
  const auto p = m.conditional(y);
  double v = 0.0;
  for (int a = 0; a < m.alphabet_size(); ++a) {
    if (p[static_cast<std::size_t>(a)] == 0.0)
      continue;
    y.push_back(a);
    v += p[static_cast<std::size_t>(a)] * value(m, tilt, y);
    y.pop_back();
  }
  return v;
}

/// Leaves with positive pi_ref mass and their probabilities; `keep` prunes
/// prefixes.
inline void leaves(const vgb::BaseModel& m, vgb::Seq& y, double p,
                   const std::function<bool(const vgb::Seq&)>& keep,
                   const std::function<void(const vgb::Seq&, double)>& visit) {
  if (!keep(y))
    return;
  if (static_cast<int>(y.size()) == m.horizon()) {
    visit(y, p);
    return;
  }
  const auto q = m.conditional(y);
  for (int a = 0; a < m.alphabet_size(); ++a) {
    if (q[static_cast<std::size_t>(a)] == 0.0)
      continue;
    y.push_back(a);
    leaves(m, y, p * q[static_cast<std::size_t>(a)], keep, visit);
    y.pop_back();
  }
}

} // namespace brute
