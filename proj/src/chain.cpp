#include "lfe/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "lfe/errors.hpp"
#include "lfe/logging.hpp"

namespace lfe {

const SparseVector& EmbeddedNet::vec(PointId a) const {
  auto it = points.find(a);
  if (it == points.end()) throw OutOfRange("net: unknown point id " + std::to_string(a));
  return it->second;
}

std::vector<PointId> EmbeddedNet::ids() const {
  std::vector<PointId> out;
  out.reserve(points.size());
  for (const auto& [id, vec] : points) out.push_back(id);
  return out;
}

int EmbeddedNet::band_of(double r) const {
  if (r == 0.0) return 0;
  int band = 1;
  double edge = 2.0;
  while (r > edge * (1.0 + 1e-12)) {
    edge *= 2.0;
    ++band;
  }
  return band;
}

int EmbeddedNet::max_band() const {
  int best = 1;
  for (const auto& [id, v] : points) {
    if (id == basepoint) continue;
    best = std::max(best, band_of(norm(v, ns)));
  }
  return best;
}

std::vector<PointId> EmbeddedNet::subnet(int i) const {
  std::vector<PointId> out;
  for (const auto& [id, v] : points) {
    if (id == basepoint || band_of(norm(v, ns)) <= i) out.push_back(id);
  }
  return out;  // map iteration is id-sorted
}

EmbeddedNet rescale_min_norm(EmbeddedNet net) {
  double min_nonzero = std::numeric_limits<double>::infinity();
  for (const auto& [id, v] : net.points) {
    const double r = norm(v, net.ns);
    if (r > 0.0) min_nonzero = std::min(min_nonzero, r);
  }
  if (!std::isfinite(min_nonzero) || min_nonzero == 1.0) return net;
  const double factor = 1.0 / min_nonzero;
  for (auto& [id, v] : net.points) v = factor * v;
  net.scale *= factor;
  return net;
}

EmbeddedNet make_coordinate_net(const LocallyFiniteSpace& space, const NormSpec& ns) {
  const std::vector<int>* probe = space.coords(space.points().front());
  if (probe == nullptr) {
    throw ConfigError("coordinate net requires a lattice space");
  }
  EmbeddedNet net;
  net.ns = ns;
  net.basepoint = space.basepoint();
  for (PointId id : space.points()) {
    const std::vector<int>& c = *space.coords(id);
    std::vector<SparseVector::Entry> entries;
    for (std::size_t d = 0; d < c.size(); ++d) {
      if (c[d] != 0) entries.emplace_back(static_cast<SparseVector::Index>(d),
                                          static_cast<double>(c[d]));
    }
    net.points.emplace(id, SparseVector::from_entries(std::move(entries)));
  }
  return net;
}

std::map<PointId, SparseVector> frechet_embed(
    const std::vector<PointId>& pivots,
    const std::function<double(PointId, PointId)>& dist) {
  if (pivots.empty()) throw Error("frechet_embed: need at least one point");
  std::map<PointId, SparseVector> out;
  for (PointId a : pivots) {
    std::vector<double> row(pivots.size());
    for (std::size_t k = 0; k < pivots.size(); ++k) row[k] = dist(a, pivots[k]);
    out.emplace(a, SparseVector::from_dense(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coordinatewise limit detection.
//
// Values of one coordinate across the family are examined over the last
// `window` surviving indices; an index whose vector omits the coordinate
// contributes an exact zero. Three accepting rules, tried in order:
//   flat      — tail oscillation within tol; the limit is the last value.
//   fit       — least squares v = L + beta/i over the tail; accepted when the
//               residual stays within tol * max(1, |L|). Families approaching
//               their limit at rate 1/i are recovered exactly.
//   escaping  — the nonzero samples are confined to a contiguous span of at
//               most half the window, exact zeros everywhere else; the limit
//               is 0 and the span's magnitude is recorded as a transient
//               residual. This reads a support block passing through the
//               window as the subsequence that omits those indices.
// A coordinate accepted by no rule marks for removal the tail index whose
// value sits farthest from the window's final value (ties toward the smaller
// index); thinning drops the smallest marked index across all points and the
// scan repeats. NoConvergence once fewer than two indices remain.
// ---------------------------------------------------------------------------

namespace {

struct CoordDetect {
  bool accepted = false;
  double limit = 0.0;
  double residual = 0.0;
  bool transient = false;
  int drop_candidate = 0;  // tail index to thin when rejected
};

CoordDetect detect_coordinate(const std::vector<std::pair<int, double>>& samples,
                              const std::vector<int>& tail, double tol) {
  CoordDetect result;
  if (tail.empty()) return result;
  std::vector<double> values(tail.size(), 0.0);
  {
    std::size_t s = 0;
    for (std::size_t t = 0; t < tail.size(); ++t) {
      while (s < samples.size() && samples[s].first < tail[t]) ++s;
      if (s < samples.size() && samples[s].first == tail[t]) values[t] = samples[s].second;
    }
  }

  double lo = values[0];
  double hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo <= tol) {
    result.accepted = true;
    result.limit = values.back();
    result.residual = hi - lo;
    return result;
  }

  if (tail.size() >= 3) {
    double mean_x = 0.0;
    double mean_v = 0.0;
    for (std::size_t t = 0; t < tail.size(); ++t) {
      mean_x += 1.0 / tail[t];
      mean_v += values[t];
    }
    mean_x /= static_cast<double>(tail.size());
    mean_v /= static_cast<double>(tail.size());
    double sxx = 0.0;
    double sxv = 0.0;
    for (std::size_t t = 0; t < tail.size(); ++t) {
      const double dx = 1.0 / tail[t] - mean_x;
      sxx += dx * dx;
      sxv += dx * (values[t] - mean_v);
    }
    if (sxx > 1e-300) {
      const double beta = sxv / sxx;
      const double limit = mean_v - beta * mean_x;
      double residual = 0.0;
      for (std::size_t t = 0; t < tail.size(); ++t) {
        residual = std::max(residual,
                            std::fabs(values[t] - (limit + beta / tail[t])));
      }
      if (residual <= tol * std::max(1.0, std::fabs(limit))) {
        result.accepted = true;
        result.limit = limit;
        result.residual = residual;
        return result;
      }
    }
  }

  std::size_t first_nz = values.size();
  std::size_t last_nz = 0;
  double peak = 0.0;
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (values[t] != 0.0) {
      first_nz = std::min(first_nz, t);
      last_nz = t;
      peak = std::max(peak, std::fabs(values[t]));
    }
  }
  if (first_nz < values.size() &&
      last_nz - first_nz + 1 <= values.size() / 2) {
    result.accepted = true;
    result.limit = 0.0;
    result.residual = peak;
    result.transient = true;
    return result;
  }

  const double last = values.back();
  std::size_t worst = 0;
  double worst_dev = -1.0;
  for (std::size_t t = 0; t < values.size(); ++t) {
    const double dev = std::fabs(values[t] - last);
    if (dev > worst_dev) {  // strict, so ties keep the smaller index
      worst_dev = dev;
      worst = t;
    }
  }
  result.drop_candidate = tail[worst];
  return result;
}

struct FamilyLimits {
  std::map<PointId, SparseVector> limits;
  std::map<PointId, double> residuals;
  std::vector<int> surviving;
  double max_residual = 0.0;
  long transient_coords = 0;
  bool window_truncated = false;
};

// eval(i, a) returns the family member i at point a, or nullptr when the
// point is outside member i's domain. first_index(a) is the smallest i where
// a is covered.
FamilyLimits detect_family_limits(
    const std::vector<PointId>& ids,
    const std::function<const SparseVector*(int, PointId)>& eval,
    const std::function<int(PointId)>& first_index, int horizon, double tol,
    int window, const char* what) {
  FamilyLimits out;
  for (int i = 1; i <= horizon; ++i) out.surviving.push_back(i);

  // Per point: coordinate -> (index, value) samples in index order.
  struct PointSeries {
    std::map<SparseVector::Index, std::vector<std::pair<int, double>>> coords;
    int first = 1;
  };
  std::map<PointId, PointSeries> series;
  for (PointId a : ids) {
    PointSeries ps;
    ps.first = first_index(a);
    for (int i = ps.first; i <= horizon; ++i) {
      const SparseVector* v = eval(i, a);
      if (v == nullptr) continue;
      for (const auto& [idx, val] : v->entries()) {
        ps.coords[idx].emplace_back(i, val);
      }
    }
    series.emplace(a, std::move(ps));
  }

  while (true) {
    out.limits.clear();
    out.residuals.clear();
    out.max_residual = 0.0;
    out.transient_coords = 0;
    out.window_truncated = false;
    int drop = 0;
    PointId drop_point = 0;

    for (PointId a : ids) {
      const PointSeries& ps = series.at(a);
      std::vector<int> tail;
      for (int i : out.surviving) {
        if (i >= ps.first) tail.push_back(i);
      }
      if (tail.empty()) {
        throw NoConvergence(std::string(what) + ": no surviving index covers point " +
                            std::to_string(a));
      }
      if (tail.size() > static_cast<std::size_t>(window)) {
        tail.erase(tail.begin(), tail.end() - window);
      } else if (tail.size() < static_cast<std::size_t>(window)) {
        out.window_truncated = true;
      }

      std::vector<SparseVector::Entry> limit_entries;
      double point_residual = 0.0;
      for (const auto& [idx, samples] : ps.coords) {
        const CoordDetect det = detect_coordinate(samples, tail, tol);
        if (!det.accepted) {
          if (drop == 0 || det.drop_candidate < drop) {
            drop = det.drop_candidate;
            drop_point = a;
          }
          continue;
        }
        point_residual = std::max(point_residual, det.residual);
        if (det.transient) ++out.transient_coords;
        if (det.limit != 0.0) limit_entries.emplace_back(idx, det.limit);
      }
      out.max_residual = std::max(out.max_residual, point_residual);
      out.residuals.emplace(a, point_residual);
      out.limits.emplace(a, SparseVector::from_entries(std::move(limit_entries)));
    }

    if (drop == 0) return out;
    log_debug(std::string(what) + ": thinning drops index " + std::to_string(drop) +
              " (point " + std::to_string(drop_point) + ")");
    std::erase(out.surviving, drop);
    if (out.surviving.size() < 2) {
      throw NoConvergence(std::string(what) + ": thinning exhausted the horizon at point " +
                          std::to_string(drop_point));
    }
  }
}

}  // namespace

EmbeddedNet lift_space(const LocallyFiniteSpace& space,
                       const std::vector<PieceMap>& pieces, double C,
                       const NormSpec& ns, const LiftOptions& opts) {
  if (pieces.empty()) throw Error("lift_space: no pieces");
  if (C < 1.0) throw Error("lift_space: C must be >= 1");
  const int horizon = static_cast<int>(pieces.size());
  const PointId origin = space.basepoint();

  for (int i = 1; i <= horizon; ++i) {
    const PieceMap& f = pieces[static_cast<std::size_t>(i - 1)];
    auto it = f.find(origin);
    if (it == f.end() || !it->second.is_zero()) {
      throw NonUniform("lift_space: piece " + std::to_string(i) +
                       " does not map the basepoint to 0");
    }
  }

  if (opts.check_uniform) {
    for (int i = 1; i <= horizon; ++i) {
      const PieceMap& f = pieces[static_cast<std::size_t>(i - 1)];
      std::vector<PointId> domain;
      domain.reserve(f.size());
      for (const auto& [id, v] : f) domain.push_back(id);
      for (std::size_t x = 0; x < domain.size(); ++x) {
        for (std::size_t y = x + 1; y < domain.size(); ++y) {
          const double d = space.dist(domain[x], domain[y]);
          const double image = norm(f.at(domain[x]) - f.at(domain[y]), ns);
          if (image < d * (1.0 - opts.c_slack) ||
              image > C * d * (1.0 + opts.c_slack)) {
            std::ostringstream msg;
            msg << "lift_space: piece " << i << " violates the declared bound on ("
                << domain[x] << ", " << domain[y] << "): d=" << d
                << " image=" << image << " C=" << C;
            throw NonUniform(msg.str());
          }
        }
      }
    }
  }

  std::vector<PointId> ids = space.points();
  auto first_index = [&](PointId a) {
    for (int i = 1; i <= horizon; ++i) {
      if (pieces[static_cast<std::size_t>(i - 1)].contains(a)) return i;
    }
    return horizon;  // never covered; detection will fail loudly below
  };
  auto eval = [&](int i, PointId a) -> const SparseVector* {
    const PieceMap& f = pieces[static_cast<std::size_t>(i - 1)];
    auto it = f.find(a);
    return it == f.end() ? nullptr : &it->second;
  };

  EmbeddedNet net;
  net.ns = ns;
  net.basepoint = origin;

  bool detected = false;
  std::string failure;
  try {
    FamilyLimits fl = detect_family_limits(ids, eval, first_index, horizon,
                                           opts.tol, opts.window, "lift_space");
    net.points = std::move(fl.limits);
    detected = true;

    // The limit map must still be an embedding: compare against the source
    // metric on every pair.
    for (std::size_t x = 0; x < ids.size() && detected; ++x) {
      for (std::size_t y = x + 1; y < ids.size(); ++y) {
        const double d = space.dist(ids[x], ids[y]);
        const double image = norm(net.vec(ids[x]) - net.vec(ids[y]), ns);
        if (image <= 0.0) {
          failure = "limit map collapses points " + std::to_string(ids[x]) + " and " +
                    std::to_string(ids[y]) + " (zero image difference)";
          detected = false;
          break;
        }
        if (image < d * (1.0 - 1e-6) || image > (C + opts.c_slack) * d * (1.0 + 1e-6)) {
          failure = "limit map is not bilipschitz within the declared bound on (" +
                    std::to_string(ids[x]) + ", " + std::to_string(ids[y]) + ")";
          detected = false;
          break;
        }
      }
    }
  } catch (const NoConvergence& e) {
    failure = e.what();
  }

  if (!detected) {
    if (!opts.fix_last) {
      throw NoConvergence("lift_space: " + failure);
    }
    log_info("lift_space: falling back to the last piece (" + failure + ")");
    net.points.clear();
    const PieceMap& last = pieces.back();
    for (PointId a : ids) {
      auto it = last.find(a);
      if (it == last.end()) {
        throw NoConvergence("lift_space: fix_last piece does not cover point " +
                            std::to_string(a));
      }
      net.points.emplace(a, it->second);
    }
  }
  return net;
}

const SparseVector& ScaleChain::at(int i, PointId a) const {
  if (i < 1 || i > length()) {
    throw OutOfRange("chain: index " + std::to_string(i) + " outside 1.." +
                     std::to_string(length()));
  }
  const auto& map = maps[static_cast<std::size_t>(i - 1)];
  auto it = map.find(a);
  if (it == map.end()) {
    throw OutOfRange("chain: s_" + std::to_string(i) + " undefined at point " +
                     std::to_string(a));
  }
  return it->second;
}

ChainCheck validate_chain(const ScaleChain& chain, const EmbeddedNet& net,
                          double rel_slack) {
  ChainCheck check;
  check.worst_lower = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= chain.length(); ++i) {
    const auto& map = chain.maps[static_cast<std::size_t>(i - 1)];
    auto base = map.find(net.basepoint);
    if (base == map.end() || !base->second.is_zero()) {
      check.ok = false;
      check.violations.push_back({i, net.basepoint, net.basepoint, "zero", 0.0});
    }
    const double envelope = 1.0 + 1.0 / i;
    std::vector<PointId> domain;
    domain.reserve(map.size());
    for (const auto& [id, v] : map) domain.push_back(id);
    for (std::size_t x = 0; x < domain.size(); ++x) {
      for (std::size_t y = x + 1; y < domain.size(); ++y) {
        const double d = net.dist(domain[x], domain[y]);
        if (d == 0.0) continue;
        const double image = norm(map.at(domain[x]) - map.at(domain[y]), net.ns);
        const double ratio = image / d;
        check.worst_lower = std::min(check.worst_lower, ratio);
        check.worst_upper = std::max(check.worst_upper, ratio / envelope);
        ++check.pairs_checked;
        if (ratio < 1.0 - rel_slack) {
          check.ok = false;
          check.violations.push_back({i, domain[x], domain[y], "lower", ratio});
        }
        if (ratio > envelope * (1.0 + rel_slack)) {
          check.ok = false;
          check.violations.push_back({i, domain[x], domain[y], "upper", ratio});
        }
      }
    }
  }
  if (!std::isfinite(check.worst_lower)) check.worst_lower = 1.0;
  return check;
}

const SparseVector& WeakLimitTable::limit(PointId a) const {
  auto it = m.find(a);
  if (it == m.end()) throw OutOfRange("weak limits: unknown point " + std::to_string(a));
  return it->second;
}

WeakLimitTable weak_limit(const ScaleChain& chain, const EmbeddedNet& net,
                          int horizon, double tol, int window) {
  if (horizon < 1) throw Error("weak_limit: horizon must be >= 1");
  horizon = std::min(horizon, chain.length());
  const std::vector<PointId> ids = net.ids();

  auto first_index = [&](PointId a) {
    const int band = net.band_of(norm(net.vec(a), net.ns));
    return std::max(band, 1);
  };
  auto eval = [&](int i, PointId a) -> const SparseVector* {
    const auto& map = chain.maps[static_cast<std::size_t>(i - 1)];
    auto it = map.find(a);
    return it == map.end() ? nullptr : &it->second;
  };

  FamilyLimits fl = detect_family_limits(ids, eval, first_index, horizon, tol,
                                         window, "weak_limit");
  WeakLimitTable wlt;
  wlt.m = std::move(fl.limits);
  wlt.residuals = std::move(fl.residuals);
  wlt.surviving = std::move(fl.surviving);
  wlt.max_residual = fl.max_residual;
  wlt.transient_coords = fl.transient_coords;
  wlt.window_truncated = fl.window_truncated;

  // Weak limits never expand distances beyond the first valid envelope.
  for (std::size_t x = 0; x < ids.size() && wlt.lipschitz_ok; ++x) {
    for (std::size_t y = x + 1; y < ids.size(); ++y) {
      const int i0 = std::max(first_index(ids[x]), first_index(ids[y]));
      const double bound = (1.0 + 1.0 / std::max(i0, 1)) * net.dist(ids[x], ids[y]);
      if (norm(wlt.limit(ids[x]) - wlt.limit(ids[y]), net.ns) > bound + 1e-9) {
        wlt.lipschitz_ok = false;
        break;
      }
    }
  }
  return wlt;
}

// ---------------------------------------------------------------------------
// Subsequence selection.
// ---------------------------------------------------------------------------

namespace {

struct PairContext {
  PointId a = 0;
  PointId b = 0;
  int band = 1;  // smallest subnet index containing both
  double dist = 0.0;
  double m_dist = 0.0;
  SparseVector m_diff;
  int limit_index = -1;  // position in certificate.limit, -1 when m(a)=m(b)
};

SparseVector deviation(const ScaleChain& chain, int index, const PairContext& pc) {
  return (chain.at(index, pc.a) - chain.at(index, pc.b)) - pc.m_diff;
}

}  // namespace

std::pair<ScaleChain, SelectionCertificate> select_subsequence(
    const ScaleChain& chain, const EmbeddedNet& net, const WeakLimitTable& wlt,
    const SelectionConstants& consts, int horizon) {
  horizon = std::min(horizon, chain.length());
  const int need = consts.keep > 0 ? consts.keep : net.max_band() + 2;

  std::vector<PointId> ids = net.ids();
  std::vector<PairContext> pairs;
  SelectionCertificate cert;
  for (std::size_t x = 0; x < ids.size(); ++x) {
    for (std::size_t y = x + 1; y < ids.size(); ++y) {
      PairContext pc;
      pc.a = ids[x];
      pc.b = ids[y];
      pc.band = std::max({net.band_of(net.radius(pc.a)), net.band_of(net.radius(pc.b)), 1});
      pc.dist = net.dist(pc.a, pc.b);
      pc.m_diff = wlt.limit(pc.a) - wlt.limit(pc.b);
      pc.m_dist = norm(pc.m_diff, net.ns);
      if (!pc.m_diff.is_zero()) {
        LimitFunctional lf;
        lf.a = pc.a;
        lf.b = pc.b;
        lf.f = norming_functional(pc.m_diff, net.ns);
        lf.attained = pairing(lf.f, pc.m_diff) / pc.m_dist;
        pc.limit_index = static_cast<int>(cert.limit.size());
        cert.limit.push_back(std::move(lf));
      }
      pairs.push_back(std::move(pc));
    }
  }

  // Greedy admission: candidate original indices in increasing order; an
  // index joins the subsequence unless it violates a pairing bound against a
  // functional already fixed. Constraints only apply once the prospective new
  // index covers the pair's band, which matches the renumbered chain's
  // domains.
  std::vector<DevFunctional> dev_funcs;
  std::vector<std::vector<std::pair<int, std::size_t>>> dev_by_pair(pairs.size());
  std::vector<int> kept;
  std::string last_reason = "no candidates";

  for (int cand = 1; cand <= horizon && static_cast<int>(kept.size()) < need; ++cand) {
    const int new_t = static_cast<int>(kept.size()) + 1;
    bool ok = true;
    for (std::size_t pi = 0; pi < pairs.size() && ok; ++pi) {
      const PairContext& pc = pairs[pi];
      if (pc.band > new_t) continue;
      if (pc.limit_index < 0 && dev_by_pair[pi].empty()) continue;
      const SparseVector dev = deviation(chain, cand, pc);
      if (pc.limit_index >= 0) {
        const double pr = std::fabs(pairing(cert.limit[static_cast<std::size_t>(pc.limit_index)].f, dev));
        if (pr > consts.limit_bound * pc.m_dist + consts.slack) {
          std::ostringstream msg;
          msg << "limit functional bound fails at index " << cand << " on pair ("
              << pc.a << ", " << pc.b << "): " << pr << " > "
              << consts.limit_bound * pc.m_dist;
          last_reason = msg.str();
          ok = false;
          break;
        }
      }
      for (const auto& [prev_j, fi] : dev_by_pair[pi]) {
        const double pr = std::fabs(pairing(dev_funcs[fi].f, dev));
        if (pr > consts.dev_bound * pc.dist + consts.slack) {
          std::ostringstream msg;
          msg << "deviation functional of map " << prev_j << " rejects index " << cand
              << " on pair (" << pc.a << ", " << pc.b << "): " << pr << " > "
              << consts.dev_bound * pc.dist;
          last_reason = msg.str();
          ok = false;
          break;
        }
      }
    }
    if (!ok) continue;

    kept.push_back(cand);
    for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
      const PairContext& pc = pairs[pi];
      if (pc.band > new_t) continue;
      const SparseVector dev = deviation(chain, cand, pc);
      if (dev.is_zero()) continue;
      DevFunctional df;
      df.j = new_t;
      df.a = pc.a;
      df.b = pc.b;
      df.f = norming_functional(dev, net.ns);
      df.attained = pairing(df.f, dev) / norm(dev, net.ns);
      dev_by_pair[pi].emplace_back(new_t, dev_funcs.size());
      dev_funcs.push_back(std::move(df));
    }
  }

  if (static_cast<int>(kept.size()) < need) {
    throw HorizonExhausted("select_subsequence: kept " + std::to_string(kept.size()) +
                           " of " + std::to_string(need) + " needed maps within horizon " +
                           std::to_string(horizon) + "; last obstruction: " + last_reason);
  }

  // Renumbered chain: new s_t is the kept map restricted to N_t. The envelope
  // only tightens because the new index never exceeds the original.
  ScaleChain out;
  out.ns = chain.ns;
  out.C = chain.C;
  for (int t = 1; t <= need; ++t) {
    const int orig = kept[static_cast<std::size_t>(t - 1)];
    const auto& source = chain.maps[static_cast<std::size_t>(orig - 1)];
    std::map<PointId, SparseVector> restricted;
    for (PointId a : net.subnet(t)) {
      auto it = source.find(a);
      if (it == source.end()) {
        throw OutOfRange("select_subsequence: map " + std::to_string(orig) +
                         " does not cover subnet " + std::to_string(t));
      }
      restricted.emplace(a, it->second);
    }
    out.maps.push_back(std::move(restricted));
  }

  cert.surviving = kept;
  cert.dev = std::move(dev_funcs);

  // Record the measured margins on the final subsequence.
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const PairContext& pc = pairs[pi];
    std::vector<SparseVector> devs(static_cast<std::size_t>(need) + 1);
    for (int k = pc.band; k <= need; ++k) {
      devs[static_cast<std::size_t>(k)] = deviation(out, k, pc);
    }
    for (const auto& [new_j, fi] : dev_by_pair[pi]) {
      DevFunctional& df = cert.dev[fi];
      for (int k = new_j + 1; k <= need; ++k) {
        df.later_max = std::max(
            df.later_max, std::fabs(pairing(df.f, devs[static_cast<std::size_t>(k)])));
      }
    }
    if (pc.limit_index >= 0) {
      LimitFunctional& lf = cert.limit[static_cast<std::size_t>(pc.limit_index)];
      for (int k = pc.band; k <= need; ++k) {
        lf.dev_max = std::max(
            lf.dev_max, std::fabs(pairing(lf.f, devs[static_cast<std::size_t>(k)])));
      }
    }
  }
  return {std::move(out), std::move(cert)};
}

bool verify_certificate(const ScaleChain& chain, const EmbeddedNet& net,
                        const WeakLimitTable& wlt,
                        const SelectionCertificate& cert,
                        const SelectionConstants& consts, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why != nullptr) *why = msg;
    return false;
  };
  const NormSpec qdual{net.ns.conjugate()};

  for (const LimitFunctional& lf : cert.limit) {
    const SparseVector m_diff = wlt.limit(lf.a) - wlt.limit(lf.b);
    const double m_dist = norm(m_diff, net.ns);
    if (m_dist == 0.0) return fail("limit functional stored for equal limits");
    if (norm(lf.f.f, qdual) > 1.0 + 1e-10) return fail("limit functional dual norm > 1");
    if (pairing(lf.f, m_diff) < consts.norming * m_dist - consts.slack) {
      return fail("limit functional does not attain the norming factor");
    }
    const int band = std::max({net.band_of(net.radius(lf.a)), net.band_of(net.radius(lf.b)), 1});
    for (int k = band; k <= chain.length(); ++k) {
      const SparseVector dev =
          (chain.at(k, lf.a) - chain.at(k, lf.b)) - m_diff;
      if (std::fabs(pairing(lf.f, dev)) > consts.limit_bound * m_dist + consts.slack) {
        return fail("limit functional pairing bound fails at map " + std::to_string(k));
      }
    }
  }

  for (const DevFunctional& df : cert.dev) {
    const SparseVector m_diff = wlt.limit(df.a) - wlt.limit(df.b);
    const double d = net.dist(df.a, df.b);
    const SparseVector dev_j = (chain.at(df.j, df.a) - chain.at(df.j, df.b)) - m_diff;
    const double dev_norm = norm(dev_j, net.ns);
    if (dev_norm == 0.0) return fail("deviation functional stored for zero deviation");
    if (norm(df.f.f, qdual) > 1.0 + 1e-10) return fail("deviation functional dual norm > 1");
    if (pairing(df.f, dev_j) < consts.norming * dev_norm - consts.slack) {
      return fail("deviation functional does not attain the norming factor");
    }
    for (int k = df.j + 1; k <= chain.length(); ++k) {
      const SparseVector dev_k = (chain.at(k, df.a) - chain.at(k, df.b)) - m_diff;
      if (std::fabs(pairing(df.f, dev_k)) > consts.dev_bound * d + consts.slack) {
        return fail("deviation pairing bound fails: map " + std::to_string(df.j) +
                    " against map " + std::to_string(k));
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Synthetic chains.
// ---------------------------------------------------------------------------

SyntheticKind synthetic_kind_from_string(const std::string& s) {
  if (s == "identity") return SyntheticKind::identity;
  if (s == "shift") return SyntheticKind::shift;
  if (s == "scaled_shift") return SyntheticKind::scaled_shift;
  if (s == "jitter") return SyntheticKind::jitter;
  throw ConfigError("unknown chain kind: " + s);
}

std::string to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::identity: return "identity";
    case SyntheticKind::shift: return "shift";
    case SyntheticKind::scaled_shift: return "scaled_shift";
    case SyntheticKind::jitter: return "jitter";
  }
  return "?";
}

ScaleChain synthetic_chain(const EmbeddedNet& net, SyntheticKind kind,
                           const SyntheticParams& params) {
  if (params.length < 1) throw Error("synthetic_chain: length must be >= 1");
  SparseVector::Index block = params.blocksize;
  if (block == 0) {
    for (const auto& [id, v] : net.points) {
      if (auto top = v.max_index()) block = std::max(block, *top + 1);
    }
    block = std::max<SparseVector::Index>(block, 1);
  }

  ScaleChain chain;
  chain.ns = net.ns;

  if (kind == SyntheticKind::jitter) {
    // Per-point unit bumps in a fresh coordinate block keep the lower
    // near-isometry bound exact; only the upper envelope constrains the size.
    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> amp(0.5, 1.0);
    std::map<PointId, SparseVector> bump;
    {
      SparseVector::Index slot = block;
      for (const auto& [id, v] : net.points) {
        bump.emplace(id, amp(rng) * SparseVector::unit(slot++));
      }
    }
    const SparseVector& base_bump = bump.at(net.basepoint);
    std::map<PointId, SparseVector> perturb;
    for (const auto& [id, v] : net.points) {
      perturb.emplace(id, bump.at(id) - base_bump);
    }

    double lip = 0.0;
    const std::vector<PointId> ids = net.ids();
    for (std::size_t x = 0; x < ids.size(); ++x) {
      for (std::size_t y = x + 1; y < ids.size(); ++y) {
        const double d = net.dist(ids[x], ids[y]);
        if (d == 0.0) continue;
        lip = std::max(lip, norm(perturb.at(ids[x]) - perturb.at(ids[y]), net.ns) / d);
      }
    }
    if (lip > 0.0) {
      double feasible = std::numeric_limits<double>::infinity();
      for (int i = 1; i <= params.length; ++i) {
        double allowed;  // eps with |(u-v, eps dP)| <= (1+1/i)|u-v|
        if (net.ns.is_inf()) {
          allowed = (1.0 + 1.0 / i) / lip;
        } else {
          allowed = std::pow(std::pow(1.0 + 1.0 / i, net.ns.p) - 1.0, 1.0 / net.ns.p) / lip;
        }
        feasible = std::min(feasible, allowed * i);
      }
      if (params.epsilon_scale > feasible) {
        std::ostringstream msg;
        msg << "synthetic_chain: jitter scale " << params.epsilon_scale
            << " exceeds the feasible " << feasible
            << " for measured perturbation constant " << lip;
        throw JitterTooLarge(msg.str());
      }
    }

    for (int i = 1; i <= params.length; ++i) {
      const double eps = params.epsilon_scale / i;
      std::map<PointId, SparseVector> map;
      for (PointId a : net.subnet(i)) {
        map.emplace(a, net.vec(a) + eps * perturb.at(a));
      }
      chain.maps.push_back(std::move(map));
    }
    return chain;
  }

  for (int i = 1; i <= params.length; ++i) {
    std::map<PointId, SparseVector> map;
    for (PointId a : net.subnet(i)) {
      switch (kind) {
        case SyntheticKind::identity:
          map.emplace(a, net.vec(a));
          break;
        case SyntheticKind::shift:
          map.emplace(a, net.vec(a).shifted(static_cast<SparseVector::Index>(i) * block));
          break;
        case SyntheticKind::scaled_shift:
          map.emplace(a, (1.0 + 1.0 / (2.0 * i)) *
                             net.vec(a).shifted(static_cast<SparseVector::Index>(i) * block));
          break;
        case SyntheticKind::jitter:
          break;  // handled above
      }
    }
    chain.maps.push_back(std::move(map));
  }
  return chain;
}

}  // namespace lfe
