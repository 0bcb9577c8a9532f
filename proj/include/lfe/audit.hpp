#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lfe/glue.hpp"

namespace lfe {

/// Every threshold the bound checks use. Defaults are the constants the
/// construction is proved with; all are configurable for exploration.
struct AuditConstants {
  double norming = 0.99;            // factor certified functionals attain
  double dev_bound = 1.0 / 1000;    // later-map pairing bound
  double limit_bound = 1.0 / 100;   // limit-functional pairing bound
  double mdist_threshold = 1.0 / 100;   // limit branch: |m(a)-m(b)| vs |a-b|
  double subcase_threshold = 1.0 / 10;  // deviation branch split
  double same_limit = 98.0 / 10000;     // same-band lower bounds, per branch
  double same_dev = 88.0 / 1000;
  double same_triangle = 78.0 / 100;
  double norm_term = 8.0;           // radius-gap coefficient in same-band bounds
  double adjacent_coeff = 12.0;     // adjacent-band lower bound coefficient
  double adjacent_middle = 5.0;     // adjacent-band middle-term upper bound
  double separated_ratio = 24.0;    // separated-band envelope ratio
  double closing_small = 1.0 / 1000;  // closing thresholds: radius gap vs |a-b|
  double closing_large = 1.0 / 100;
  double adjacent_closing = 1.0 / 20;
  double tau_same = 1.0;            // path lower-bound constants per branch
  double tau_adjacent = 1.0 / 3;
  double tau_separated = 4.0 / 27;
  double slack = 1e-9;              // absolute slack on every bound check
};

enum class CaseLabel { same_band, adjacent_bands, separated_bands };
enum class Case1Branch { none, limit, deviation, triangle };

std::string to_string(CaseLabel label);
std::string to_string(Case1Branch branch);

/// Band classification of an ordered pair (|b| <= |a|): same dyadic band,
/// adjacent bands, or separated by at least one band. Boundary radii resolve
/// to the lower band; the basepoint is carried in band 1 and tagged.
struct CaseClassification {
  CaseLabel label;
  int band_b = 1;  // i
  int band_a = 1;  // k; equals band_b for same_band, band_b + 1 for adjacent
  bool basepoint_pair = false;
};

CaseClassification classify_case(double norm_a, double norm_b,
                                 const EmbeddedNet& net);

/// Everything measured for one unordered pair, ordered so |b| <= |a|.
struct PairReport {
  PointId a = 0;
  PointId b = 0;
  CaseLabel label = CaseLabel::same_band;
  Case1Branch branch = Case1Branch::none;
  int band_i = 1;
  int band_k = 1;
  bool basepoint_pair = false;
  double dist = 0.0;       // |a - b| in the net
  double norm_a = 0.0;
  double norm_b = 0.0;
  double m_dist = 0.0;     // |m(a) - m(b)|
  double phi_dist = 0.0;   // |phi(a) - phi(b)|
  double tilde_dist = 0.0; // 1-sum distance of the augmented map
  double bound = 0.0;      // applicable lower bound on phi_dist (tilde for separated)
  double margin = 0.0;     // measured - bound
  double middle_norm = 0.0;     // adjacent bands: middle-term norm
  double envelope_ratio = 0.0;  // separated bands: 3(2^k + 2^i) / (2^(k-1) - 2^i)
  double closing_lower = 0.0;   // max(bound, radius gap): must stay positive
  bool alt_threshold_flips = false;  // same-band: alternate closing threshold
                                     // would change which side is active
};

/// Measures every unordered pair of the net against the chain and limit
/// table: classification, branch choice, the applicable displayed bound and
/// its margin. Work is split across `workers` threads; results are merged by
/// pair index so the output order never depends on the thread count.
std::vector<PairReport> measure_pairs(const GluedMap& glued,
                                      const WeakLimitTable& wlt,
                                      const AuditConstants& consts,
                                      int workers = 1);

struct BranchStats {
  long count = 0;
  double worst_margin = 0.0;
  bool any = false;

  void add(double margin);
};

struct CaseSummary {
  BranchStats same_limit, same_dev, same_triangle;
  BranchStats adjacent, adjacent_middle, separated, separated_measured;
  // Consolidated adjacent-band upper envelope 5|a-b| + 8(|a|-|b|): assembled
  // from the stated pieces rather than quoted as a single constant.
  BranchStats adjacent_upper_derived;
  long basepoint_pairs = 0;
  long closing_failures = 0;
  long alt_threshold_flips = 0;
  long pairs = 0;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

/// Asserts, within consts.slack, the displayed lower bound of each pair's
/// branch, the adjacent-band middle-term upper bound, the separated-band
/// envelope ratio and measured-ratio bounds, and positivity of the closing
/// lower bound. Never expected to report a violation on a certified chain.
CaseSummary check_case_bounds(std::span<const PairReport> reports,
                              const AuditConstants& consts);

/// Throws BoundViolated with the first recorded violation.
void require_clean(const CaseSummary& summary);

using MapEval = std::function<double(PointId, PointId)>;  // image distance
using MetricEval = std::function<double(PointId, PointId)>;

struct DistortionReport {
  double lip = 0.0;    // max image/source ratio
  double colip = 0.0;  // min image/source ratio
  double distortion = 1.0;
  std::pair<PointId, PointId> worst_lip{0, 0};
  std::pair<PointId, PointId> worst_colip{0, 0};
  long pairs = 0;
};

/// Exhaustive over unordered pairs; ties broken by id order. Throws
/// DegenerateImage when two distinct points have image distance 0.
DistortionReport distortion(const MapEval& image_dist,
                            const std::vector<PointId>& points,
                            const MetricEval& source_dist);

enum class TauBranch { same, adjacent_a, adjacent_b, separated_a, separated_b };
std::string to_string(TauBranch branch);

struct TauPairReport {
  PointId a = 0;
  PointId b = 0;
  TauBranch branch = TauBranch::same;
  bool low_pair = false;  // |b| below the first breakpoint, |a| above it
  int band_i = 0;
  int band_k = 0;
  double radius_gap = 0.0;  // |a| - |b|
  double hat_dist = 0.0;
  double bound_coeff = 0.0;  // 1, 1/3 or 4/27
  double margin = 0.0;
};

struct TauSummary {
  std::vector<TauPairReport> pairs;
  double worst_alpha = 0.0;  // min hat_dist / radius_gap over distinct radii
  long low_pairs = 0;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

/// Classifies pairs by triadic band and asserts the branch constant (1, 1/3,
/// 4/27) within consts.slack. Pairs with |b| below the first breakpoint and
/// |a| above it run through the same machinery but are counted separately.
TauSummary check_tau_bounds(const HatMap& hat, const AuditConstants& consts);

/// Throws BoundViolated with the first recorded violation.
void require_clean(const TauSummary& summary);

struct CoarseModuli {
  double bucket_width = 1.0;
  std::vector<long> counts;        // pairs per source-distance bucket
  std::vector<double> rho1_raw;    // bucket min image distance
  std::vector<double> rho2_raw;    // bucket max image distance
  std::vector<double> rho1_env;    // largest non-decreasing minorant (suffix min)
  std::vector<double> rho2_env;    // smallest non-decreasing majorant (prefix max)

  bool bucket_ordered() const;  // rho1_env <= rho2_env on every non-empty bucket
  /// Longest strictly increasing run of rho1_env over non-empty buckets.
  int increasing_run() const;
};

CoarseModuli empirical_moduli(const MapEval& image_dist,
                              const std::vector<PointId>& points,
                              const MetricEval& source_dist,
                              double bucket_width);

}  // namespace lfe
