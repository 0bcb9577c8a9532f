#include "lfe/glue.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lfe/errors.hpp"

namespace lfe {

std::pair<double, double> GluedMap::band_weights(double r, int band) {
  // Both subtractions are exact by Sterbenz's lemma because r lies within a
  // factor of two of each band edge, and the divisor is a power of two, so
  // the weights are exact doubles summing to exactly 1. Radii can sit an ulp
  // outside the band after rescaling by an irrational factor; clamping keeps
  // the weights in [0, 1] without disturbing in-band values.
  const double lower = std::ldexp(1.0, band - 1);
  const double upper = std::ldexp(1.0, band);
  const double clamped = std::min(std::max(r, lower), upper);
  const double w_low = (upper - clamped) / lower;
  const double w_high = (clamped - lower) / lower;
  return {w_low, w_high};
}

SparseVector GluedMap::phi(PointId a) const {
  const SparseVector& v = net.vec(a);
  const double r = norm(v, net.ns);
  if (r == 0.0) return SparseVector{};
  const int band = net.band_of(r);
  if (band + 1 > chain.length()) {
    throw OutOfRange("phi: chain has no map " + std::to_string(band + 1) +
                     " for |a| = " + std::to_string(r));
  }
  const auto [w_low, w_high] = band_weights(r, band);
  return convex_combine(w_low, chain.at(band, a), w_high, chain.at(band + 1, a));
}

std::pair<SparseVector, double> AugmentedMap::phi_tilde(PointId a) const {
  const SparseVector& v = glued.net.vec(a);
  return {glued.phi(a), norm(v, glued.net.ns)};
}

double AugmentedMap::dist(PointId a, PointId b) const {
  const auto [pa, ra] = phi_tilde(a);
  const auto [pb, rb] = phi_tilde(b);
  return norm(pa - pb, glued.net.ns) + std::fabs(ra - rb);
}

double TauPath::t_limit() const {
  return std::pow(3.0, kmax() + 1);
}

SparseVector TauPath::value(double t) const {
  if (t < 0.0) throw OutOfRange("tau: negative argument");
  if (t > t_limit() * (1.0 + 1e-12)) {
    throw OutOfRange("tau: argument " + std::to_string(t) + " beyond breakpoint " +
                     std::to_string(t_limit()));
  }
  // Segment k covers [3^k, 3^(k+1)] and advances along p_(k+1).
  int k = 0;
  double lower = 1.0;  // 3^0; the first segment actually starts at 0
  while (t > 3.0 * lower && k < kmax()) {
    lower *= 3.0;
    ++k;
  }
  const double seg_start = (k == 0) ? 0.0 : lower;
  SparseVector out;
  double prev_edge = 0.0;
  double edge = 3.0;
  for (int j = 1; j <= k; ++j) {
    out = out + (edge - prev_edge) * directions[static_cast<std::size_t>(j - 1)];
    prev_edge = edge;
    edge *= 3.0;
  }
  if (t > seg_start) {
    out = out + (t - seg_start) * directions[static_cast<std::size_t>(k)];
  }
  return out;
}

TauPath build_tau(const GluedMap& glued, int kmax) {
  if (kmax < 1) throw Error("build_tau: kmax must be >= 1");
  TauPath tau;
  tau.ns = glued.net.ns;

  // phi images sorted by the radius they belong to, so T_i is a prefix.
  struct Image {
    double r;
    PointId id;
    SparseVector value;
  };
  std::vector<Image> images;
  images.reserve(glued.net.points.size());
  for (const auto& [id, v] : glued.net.points) {
    images.push_back({norm(v, glued.net.ns), id, glued.phi(id)});
  }
  std::sort(images.begin(), images.end(), [](const Image& x, const Image& y) {
    if (x.r != y.r) return x.r < y.r;
    return x.id < y.id;
  });

  // Fresh directions advance strictly, so every p_i is disjoint from every
  // span set built before or after it.
  std::vector<SparseVector> occupied;
  occupied.reserve(images.size());
  for (const Image& im : images) occupied.push_back(im.value);
  for (const auto& [id, v] : glued.net.points) occupied.push_back(v);

  double t_radius = 9.0;  // 3^(i+1) for i = 1
  for (int i = 1; i <= kmax + 1; ++i) {
    std::vector<SparseVector> span;
    std::size_t tcount = 0;
    for (const Image& im : images) {
      if (im.r <= t_radius * (1.0 + 1e-12)) {
        span.push_back(im.value);
        ++tcount;
      }
    }
    for (const SparseVector& p : tau.directions) span.push_back(p);
    const SparseVector p = fresh_direction(occupied);
    occupied.push_back(p);
    tau.directions.push_back(p);
    tau.span_sets.push_back(std::move(span));
    tau.tset_sizes.push_back(tcount);
    t_radius *= 3.0;
  }
  return tau;
}

SparseVector HatMap::phi_hat(PointId a) const {
  const SparseVector& v = glued.net.vec(a);
  return tau.value(norm(v, glued.net.ns)) + glued.phi(a);
}

double HatMap::dist(PointId a, PointId b) const {
  return norm(phi_hat(a) - phi_hat(b), glued.net.ns);
}

}  // namespace lfe
