#include "spopf/metrics.hpp"

#include <cmath>
#include <vector>

namespace spopf {

PathMetrics path_metrics(const PathDiscretization& disc) {
  PathMetrics out;
  const Index K = disc.K();
  const Matrix d = disc.differences();

  std::vector<double> seg_len(static_cast<size_t>(K + 1));
  double len_p = 0.0;
  for (Index k = 0; k <= K; ++k) {
    seg_len[static_cast<size_t>(k)] = d.col(k).norm();
    len_p += seg_len[static_cast<size_t>(k)];
  }
  const Vector chord = disc.u1() - disc.u0();
  const double len_l = chord.norm();
  out.obj_fun_gap_pct = (len_p - len_l) / len_l * 100.0;

  // cumulative arclength fractions of the corner points
  std::vector<double> frac(static_cast<size_t>(K + 2), 0.0);
  for (Index k = 0; k <= K; ++k)
    frac[static_cast<size_t>(k + 1)] = frac[static_cast<size_t>(k)] + seg_len[static_cast<size_t>(k)] / len_p;
  frac.back() = 1.0;

  // constant-speed velocities: p'(t) = len_p * unit tangent, L'(t) = chord
  double acc = 0.0;
  Index seg = 0;
  for (Index j = 0; j < kArcSamples; ++j) {
    const double tau = (static_cast<double>(j) + 0.5) / static_cast<double>(kArcSamples);
    while (seg < K && tau > frac[static_cast<size_t>(seg + 1)]) ++seg;
    // zero-length segments carry no arclength; borrow the nearest real one
    Index k = seg;
    while (k < K && seg_len[static_cast<size_t>(k)] == 0.0) ++k;
    while (k > 0 && seg_len[static_cast<size_t>(k)] == 0.0) --k;
    const Vector vel = d.col(k) * (len_p / seg_len[static_cast<size_t>(k)]);
    acc += (vel - chord).norm();
  }
  out.path_diff_pct = (acc / static_cast<double>(kArcSamples)) / len_l * 100.0;
  return out;
}

}  // namespace spopf
