#pragma once

#include "spopf/path.hpp"
#include "spopf/types.hpp"

namespace spopf {

struct PathMetrics {
  double path_diff_pct = 0.0;
  double obj_fun_gap_pct = 0.0;
};

/// Number of composite sampling points for the arclength integrals.
inline constexpr Index kArcSamples = 1001;

/// Compare the piece-wise linear path against the straight line joining its
/// endpoints, both reparameterized to constant speed on [0,1]:
///   path-diff% = (int ||p'(t) - L'(t)|| dt) / (int ||L'(t)|| dt) * 100
///   obj-fun-gap% = (len(p) - len(L)) / len(L) * 100.
PathMetrics path_metrics(const PathDiscretization& disc);

}  // namespace spopf
