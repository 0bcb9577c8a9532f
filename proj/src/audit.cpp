#include "lfe/audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "lfe/errors.hpp"

namespace lfe {

std::string to_string(CaseLabel label) {
  switch (label) {
    case CaseLabel::same_band: return "same";
    case CaseLabel::adjacent_bands: return "adjacent";
    case CaseLabel::separated_bands: return "separated";
  }
  return "?";
}

std::string to_string(Case1Branch branch) {
  switch (branch) {
    case Case1Branch::none: return "-";
    case Case1Branch::limit: return "limit";
    case Case1Branch::deviation: return "deviation";
    case Case1Branch::triangle: return "triangle";
  }
  return "?";
}

CaseClassification classify_case(double norm_a, double norm_b,
                                 const EmbeddedNet& net) {
  CaseClassification out;
  if (norm_b == 0.0) {
    out.basepoint_pair = true;
    out.band_b = 1;  // the basepoint rides along in the first band
  } else {
    out.band_b = net.band_of(norm_b);
  }
  out.band_a = norm_a == 0.0 ? 1 : net.band_of(norm_a);
  if (out.band_a == out.band_b) {
    out.label = CaseLabel::same_band;
  } else if (out.band_a == out.band_b + 1) {
    out.label = CaseLabel::adjacent_bands;
  } else {
    out.label = CaseLabel::separated_bands;
  }
  return out;
}

void BranchStats::add(double margin) {
  ++count;
  worst_margin = any ? std::min(worst_margin, margin) : margin;
  any = true;
}

namespace {

struct PointData {
  PointId id;
  double radius;
  SparseVector phi;
};

PairReport measure_one(const GluedMap& glued, const WeakLimitTable& wlt,
                       const AuditConstants& consts, const PointData& pa,
                       const PointData& pb) {
  // Order so the second point has the smaller radius; ties keep id order.
  const PointData& hi = pa.radius >= pb.radius ? pa : pb;
  const PointData& lo = pa.radius >= pb.radius ? pb : pa;

  PairReport rep;
  rep.a = hi.id;
  rep.b = lo.id;
  rep.norm_a = hi.radius;
  rep.norm_b = lo.radius;
  rep.dist = glued.net.dist(hi.id, lo.id);
  if (rep.dist == 0.0) {
    throw DegenerateImage("measure_pairs: distinct points " + std::to_string(hi.id) +
                          " and " + std::to_string(lo.id) + " at net distance 0");
  }
  const CaseClassification cls = classify_case(rep.norm_a, rep.norm_b, glued.net);
  rep.label = cls.label;
  rep.band_i = cls.band_b;
  rep.band_k = cls.band_a;
  rep.basepoint_pair = cls.basepoint_pair;

  rep.m_dist = norm(wlt.limit(hi.id) - wlt.limit(lo.id), glued.net.ns);
  rep.phi_dist = norm(glued.phi(hi.id) - glued.phi(lo.id), glued.net.ns);
  const double gap = rep.norm_a - rep.norm_b;
  rep.tilde_dist = rep.phi_dist + gap;

  switch (rep.label) {
    case CaseLabel::same_band: {
      const int i = rep.band_i;
      const SparseVector m_diff = wlt.limit(hi.id) - wlt.limit(lo.id);
      const auto [w_low, w_high] = GluedMap::band_weights(rep.norm_a, i);
      const SparseVector dev_i =
          (glued.chain.at(i, hi.id) - glued.chain.at(i, lo.id)) - m_diff;
      const double weighted_dev = w_low * norm(dev_i, glued.net.ns);
      double coeff;
      double closing;
      if (rep.m_dist >= consts.mdist_threshold * rep.dist) {
        rep.branch = Case1Branch::limit;
        coeff = consts.same_limit;
        closing = consts.closing_small;
      } else if (weighted_dev >= consts.subcase_threshold * rep.dist) {
        rep.branch = Case1Branch::deviation;
        coeff = consts.same_dev;
        closing = consts.closing_small;
      } else {
        rep.branch = Case1Branch::triangle;
        coeff = consts.same_triangle;
        closing = consts.closing_large;
      }
      rep.bound = coeff * rep.dist - consts.norm_term * gap;
      rep.margin = rep.phi_dist - rep.bound;
      rep.closing_lower = std::max(rep.bound, gap);
      const double alt =
          closing == consts.closing_small ? consts.closing_large : consts.closing_small;
      const bool primary_side = gap >= closing * rep.dist;
      const bool alt_side = gap >= alt * rep.dist;
      rep.alt_threshold_flips = primary_side != alt_side;
      break;
    }
    case CaseLabel::adjacent_bands: {
      const int i = rep.band_i;
      const double edge = std::ldexp(1.0, i);        // 2^i
      const double lower = std::ldexp(1.0, i - 1);   // 2^(i-1)
      const double v_w = (2.0 * edge - rep.norm_a) / edge;
      const double w_prime = (rep.norm_b - lower) / lower;
      const SparseVector middle = v_w * glued.chain.at(i + 1, hi.id) -
                                  w_prime * glued.chain.at(i + 1, lo.id);
      rep.middle_norm = norm(middle, glued.net.ns);
      rep.bound = rep.dist - consts.adjacent_coeff * gap;
      rep.margin = rep.phi_dist - rep.bound;
      rep.closing_lower = std::max(rep.bound, gap);
      break;
    }
    case CaseLabel::separated_bands: {
      const double two_i = std::ldexp(1.0, rep.band_i);
      const double two_k = std::ldexp(1.0, rep.band_k);
      rep.envelope_ratio = 3.0 * (two_k + two_i) / (0.5 * two_k - two_i);
      rep.bound = gap;
      rep.margin = rep.tilde_dist - rep.bound;
      rep.closing_lower = gap;
      break;
    }
  }
  return rep;
}

}  // namespace

std::vector<PairReport> measure_pairs(const GluedMap& glued,
                                      const WeakLimitTable& wlt,
                                      const AuditConstants& consts, int workers) {
  std::vector<PointData> data;
  data.reserve(glued.net.points.size());
  for (const auto& [id, v] : glued.net.points) {
    data.push_back({id, norm(v, glued.net.ns), glued.phi(id)});
  }
  const std::size_t n = data.size();
  std::vector<std::pair<std::size_t, std::size_t>> index_pairs;
  index_pairs.reserve(n * (n - 1) / 2);
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t y = x + 1; y < n; ++y) index_pairs.emplace_back(x, y);
  }

  std::vector<PairReport> reports(index_pairs.size());
  workers = std::max(1, workers);
  if (workers == 1 || index_pairs.size() < 64) {
    for (std::size_t i = 0; i < index_pairs.size(); ++i) {
      reports[i] = measure_one(glued, wlt, consts, data[index_pairs[i].first],
                               data[index_pairs[i].second]);
    }
    return reports;
  }

  // Results land at their pair index, so the merge never depends on the
  // thread count.
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const std::size_t chunk = (index_pairs.size() + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::size_t begin = static_cast<std::size_t>(w) * chunk;
    const std::size_t end = std::min(begin + chunk, index_pairs.size());
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) {
          reports[i] = measure_one(glued, wlt, consts, data[index_pairs[i].first],
                                   data[index_pairs[i].second]);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return reports;
}

CaseSummary check_case_bounds(std::span<const PairReport> reports,
                              const AuditConstants& consts) {
  CaseSummary summary;
  summary.pairs = static_cast<long>(reports.size());
  auto violate = [&summary](const PairReport& rep, const std::string& what,
                            double lhs, double rhs) {
    std::ostringstream msg;
    msg << "pair (" << rep.a << ", " << rep.b << ") " << to_string(rep.label)
        << "/" << to_string(rep.branch) << ": " << what << " (" << lhs
        << " vs " << rhs << ")";
    summary.violations.push_back(msg.str());
  };

  for (const PairReport& rep : reports) {
    if (rep.basepoint_pair) ++summary.basepoint_pairs;
    if (rep.alt_threshold_flips) ++summary.alt_threshold_flips;
    switch (rep.label) {
      case CaseLabel::same_band: {
        if (rep.phi_dist < rep.bound - consts.slack) {
          violate(rep, "branch lower bound fails", rep.phi_dist, rep.bound);
        }
        switch (rep.branch) {
          case Case1Branch::limit: summary.same_limit.add(rep.margin); break;
          case Case1Branch::deviation: summary.same_dev.add(rep.margin); break;
          case Case1Branch::triangle: summary.same_triangle.add(rep.margin); break;
          case Case1Branch::none: break;
        }
        if (rep.closing_lower <= 0.0) {
          ++summary.closing_failures;
          violate(rep, "closing lower bound not positive", rep.closing_lower, 0.0);
        }
        break;
      }
      case CaseLabel::adjacent_bands: {
        if (rep.phi_dist < rep.bound - consts.slack) {
          violate(rep, "adjacent lower bound fails", rep.phi_dist, rep.bound);
        }
        summary.adjacent.add(rep.margin);
        const double middle_cap = consts.adjacent_middle * rep.dist;
        if (rep.middle_norm > middle_cap + consts.slack) {
          violate(rep, "middle-term upper bound fails", rep.middle_norm, middle_cap);
        }
        summary.adjacent_middle.add(middle_cap - rep.middle_norm);
        const double derived_cap = consts.adjacent_middle * rep.dist +
                                   consts.norm_term * (rep.norm_a - rep.norm_b);
        if (rep.phi_dist > derived_cap + consts.slack) {
          violate(rep, "derived upper envelope fails", rep.phi_dist, derived_cap);
        }
        summary.adjacent_upper_derived.add(derived_cap - rep.phi_dist);
        if (rep.closing_lower <= 0.0) {
          ++summary.closing_failures;
          violate(rep, "closing lower bound not positive", rep.closing_lower, 0.0);
        }
        break;
      }
      case CaseLabel::separated_bands: {
        if (rep.envelope_ratio > consts.separated_ratio + consts.slack) {
          violate(rep, "envelope ratio exceeds cap", rep.envelope_ratio,
                  consts.separated_ratio);
        }
        summary.separated.add(consts.separated_ratio - rep.envelope_ratio);
        const double upper = 3.0 * (rep.norm_a + rep.norm_b);
        if (rep.tilde_dist > upper + consts.slack) {
          violate(rep, "augmented distance exceeds coarse envelope", rep.tilde_dist,
                  upper);
        }
        if (rep.tilde_dist < rep.bound - consts.slack) {
          violate(rep, "augmented distance below radius gap", rep.tilde_dist, rep.bound);
        }
        const double ratio = rep.tilde_dist / rep.dist;
        if (ratio > consts.separated_ratio + consts.slack ||
            ratio < 1.0 / consts.separated_ratio - consts.slack) {
          violate(rep, "measured ratio outside envelope window", ratio,
                  consts.separated_ratio);
        }
        summary.separated_measured.add(consts.separated_ratio - ratio);
        break;
      }
    }
  }
  return summary;
}

void require_clean(const CaseSummary& summary) {
  if (!summary.ok()) throw BoundViolated(summary.violations.front());
}

void require_clean(const TauSummary& summary) {
  if (!summary.ok()) throw BoundViolated(summary.violations.front());
}

DistortionReport distortion(const MapEval& image_dist,
                            const std::vector<PointId>& points,
                            const MetricEval& source_dist) {
  if (points.size() < 2) throw Error("distortion: need at least two points");
  DistortionReport rep;
  rep.lip = 0.0;
  rep.colip = std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < points.size(); ++x) {
    for (std::size_t y = x + 1; y < points.size(); ++y) {
      const double d = source_dist(points[x], points[y]);
      if (d == 0.0) continue;
      const double image = image_dist(points[x], points[y]);
      if (image == 0.0) {
        throw DegenerateImage("distortion: points " + std::to_string(points[x]) +
                              " and " + std::to_string(points[y]) +
                              " have image distance 0");
      }
      const double ratio = image / d;
      ++rep.pairs;
      if (ratio > rep.lip) {
        rep.lip = ratio;
        rep.worst_lip = {points[x], points[y]};
      }
      if (ratio < rep.colip) {
        rep.colip = ratio;
        rep.worst_colip = {points[x], points[y]};
      }
    }
  }
  if (rep.pairs == 0) throw Error("distortion: all pairs at distance 0");
  rep.distortion = rep.lip / rep.colip;
  return rep;
}

std::string to_string(TauBranch branch) {
  switch (branch) {
    case TauBranch::same: return "same";
    case TauBranch::adjacent_a: return "adjacent_a";
    case TauBranch::adjacent_b: return "adjacent_b";
    case TauBranch::separated_a: return "separated_a";
    case TauBranch::separated_b: return "separated_b";
  }
  return "?";
}

namespace {

// Triadic band: 0 for r <= 3, otherwise the i with 3^i < r <= 3^(i+1);
// boundary radii resolve to the lower band.
int triadic_band(double r) {
  int band = 0;
  double edge = 3.0;
  while (r > edge * (1.0 + 1e-12)) {
    edge *= 3.0;
    ++band;
  }
  return band;
}

}  // namespace

TauSummary check_tau_bounds(const HatMap& hat, const AuditConstants& consts) {
  TauSummary summary;
  const EmbeddedNet& net = hat.glued.net;
  std::vector<PointId> ids = net.ids();

  std::vector<SparseVector> hats;
  std::vector<double> radii;
  hats.reserve(ids.size());
  for (PointId id : ids) {
    hats.push_back(hat.phi_hat(id));
    radii.push_back(norm(net.vec(id), net.ns));
  }

  summary.worst_alpha = std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < ids.size(); ++x) {
    for (std::size_t y = x + 1; y < ids.size(); ++y) {
      const std::size_t a = radii[x] >= radii[y] ? x : y;
      const std::size_t b = radii[x] >= radii[y] ? y : x;
      TauPairReport rep;
      rep.a = ids[a];
      rep.b = ids[b];
      rep.band_k = triadic_band(radii[a]);
      rep.band_i = triadic_band(radii[b]);
      rep.radius_gap = radii[a] - radii[b];
      rep.hat_dist = norm(hats[a] - hats[b], net.ns);
      rep.low_pair = radii[b] <= 3.0 + 1e-12 && radii[a] > 3.0 * (1.0 + 1e-12);
      if (rep.low_pair) ++summary.low_pairs;

      const int diff = rep.band_k - rep.band_i;
      if (diff == 0) {
        rep.branch = TauBranch::same;
        rep.bound_coeff = consts.tau_same;
      } else {
        // Offset of the larger radius above its band's lower breakpoint.
        const double lower_edge = std::pow(3.0, rep.band_k);
        const bool head = radii[a] - lower_edge >= rep.radius_gap / 3.0;
        if (diff == 1) {
          rep.branch = head ? TauBranch::adjacent_a : TauBranch::adjacent_b;
          rep.bound_coeff = consts.tau_adjacent;
        } else {
          rep.branch = head ? TauBranch::separated_a : TauBranch::separated_b;
          rep.bound_coeff = head ? consts.tau_adjacent : consts.tau_separated;
        }
      }
      rep.margin = rep.hat_dist - rep.bound_coeff * rep.radius_gap;
      if (rep.margin < -consts.slack) {
        std::ostringstream msg;
        msg << "pair (" << rep.a << ", " << rep.b << ") " << to_string(rep.branch)
            << ": path lower bound fails (" << rep.hat_dist << " vs "
            << rep.bound_coeff * rep.radius_gap << ")";
        summary.violations.push_back(msg.str());
      }
      if (rep.radius_gap > 0.0) {
        summary.worst_alpha =
            std::min(summary.worst_alpha, rep.hat_dist / rep.radius_gap);
      }
      summary.pairs.push_back(rep);
    }
  }
  if (!std::isfinite(summary.worst_alpha)) summary.worst_alpha = 0.0;
  return summary;
}

bool CoarseModuli::bucket_ordered() const {
  for (std::size_t b = 0; b < counts.size(); ++b) {
    if (counts[b] > 0 && rho1_env[b] > rho2_env[b] + 1e-12) return false;
  }
  return true;
}

int CoarseModuli::increasing_run() const {
  int best = 0;
  int run = 0;
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < counts.size(); ++b) {
    if (counts[b] == 0) continue;
    if (rho1_env[b] > prev) {
      ++run;
    } else {
      run = 1;
    }
    prev = rho1_env[b];
    best = std::max(best, run);
  }
  return best;
}

CoarseModuli empirical_moduli(const MapEval& image_dist,
                              const std::vector<PointId>& points,
                              const MetricEval& source_dist,
                              double bucket_width) {
  if (points.size() < 2) throw Error("empirical_moduli: need at least two points");
  if (bucket_width <= 0.0) throw Error("empirical_moduli: bucket width must be positive");

  CoarseModuli moduli;
  moduli.bucket_width = bucket_width;
  for (std::size_t x = 0; x < points.size(); ++x) {
    for (std::size_t y = x + 1; y < points.size(); ++y) {
      const double d = source_dist(points[x], points[y]);
      const double image = image_dist(points[x], points[y]);
      const auto b = static_cast<std::size_t>(d / bucket_width);
      if (b >= moduli.counts.size()) {
        moduli.counts.resize(b + 1, 0);
        moduli.rho1_raw.resize(b + 1, std::numeric_limits<double>::infinity());
        moduli.rho2_raw.resize(b + 1, 0.0);
      }
      ++moduli.counts[b];
      moduli.rho1_raw[b] = std::min(moduli.rho1_raw[b], image);
      moduli.rho2_raw[b] = std::max(moduli.rho2_raw[b], image);
    }
  }

  const std::size_t nb = moduli.counts.size();
  moduli.rho1_env.assign(nb, 0.0);
  moduli.rho2_env.assign(nb, 0.0);
  // Largest non-decreasing minorant of the bucket minima: suffix minimum.
  double suffix = std::numeric_limits<double>::infinity();
  for (std::size_t b = nb; b-- > 0;) {
    if (moduli.counts[b] > 0) suffix = std::min(suffix, moduli.rho1_raw[b]);
    moduli.rho1_env[b] = std::isfinite(suffix) ? suffix : 0.0;
  }
  // Smallest non-decreasing majorant of the bucket maxima: prefix maximum.
  double prefix = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    if (moduli.counts[b] > 0) prefix = std::max(prefix, moduli.rho2_raw[b]);
    moduli.rho2_env[b] = prefix;
  }
  for (std::size_t b = 0; b < nb; ++b) {
    if (moduli.counts[b] == 0) {
      moduli.rho1_raw[b] = 0.0;  // keep serialization finite
    }
  }
  return moduli;
}

}  // namespace lfe
