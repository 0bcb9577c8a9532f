#pragma once

#include <utility>
#include <vector>

#include "lfe/chain.hpp"

namespace lfe {

/// The glued map: inside the band 2^(i-1) <= |a| <= 2^i,
///   phi(a) = ((2^i - |a|)/2^(i-1)) s_i(a) + ((|a| - 2^(i-1))/2^(i-1)) s_(i+1)(a).
/// Both weights are exact doubles (the subtractions are exact for |a| within
/// the band) and sum to exactly 1, and the two band formulas agree exactly at
/// band boundaries. The basepoint maps to 0.
struct GluedMap {
  EmbeddedNet net;
  ScaleChain chain;  // post-selection

  SparseVector phi(PointId a) const;
  /// Weights (w_i, w_{i+1}) with band index i for a nonzero radius r.
  static std::pair<double, double> band_weights(double r, int band);
};

/// phi paired with the radius, in the 1-sum of the model space with a line:
/// |(x, t)| = |x| + |t|.
struct AugmentedMap {
  GluedMap glued;

  std::pair<SparseVector, double> phi_tilde(PointId a) const;
  double dist(PointId a, PointId b) const;
};

/// Piecewise-linear 1-Lipschitz path through fresh unit directions with
/// breakpoints at powers of 3: t p_1 on [0, 3], then each segment [3^k, 3^(k+1)]
/// advances along p_(k+1). Every p_i is a fresh basis vector beyond all
/// supports recorded so far, so dist(p_i, F_i) = 1 exactly.
struct TauPath {
  NormSpec ns;
  std::vector<SparseVector> directions;              // p_1 .. p_(kmax+1)
  std::vector<std::vector<SparseVector>> span_sets;  // F_i spanning vectors
  std::vector<std::size_t> tset_sizes;               // |T_i| actually spanned

  int kmax() const { return static_cast<int>(directions.size()) - 1; }
  double t_limit() const;  // 3^(kmax+1)

  /// Throws OutOfRange for t < 0 or beyond the last breakpoint.
  SparseVector value(double t) const;
};

/// Builds T_i = { phi(u) : |u| <= 3^(i+1) }, the spans F_i and the fresh
/// directions p_i for i = 1..kmax+1. Throws OutOfRange when the chain cannot
/// evaluate phi on the required points.
TauPath build_tau(const GluedMap& glued, int kmax);

/// phi_hat(a) = tau(|a|) + phi(a), a single vector in the model space.
struct HatMap {
  GluedMap glued;
  TauPath tau;

  SparseVector phi_hat(PointId a) const;
  double dist(PointId a, PointId b) const;
};

}  // namespace lfe
