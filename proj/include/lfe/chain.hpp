#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lfe/metric_space.hpp"
#include "lfe/sparse_vector.hpp"

namespace lfe {

/// A finite net N inside the sequence-space model: one vector per point id,
/// with the basepoint at the origin. Distances between net points are norm
/// distances. `scale` records the rescaling applied so that the smallest
/// nonzero radius is exactly 1, which places every nonzero point in a dyadic
/// band [2^(i-1), 2^i] with i >= 1.
struct EmbeddedNet {
  std::map<PointId, SparseVector> points;
  NormSpec ns;
  PointId basepoint = 0;
  double scale = 1.0;

  const SparseVector& vec(PointId a) const;
  double radius(PointId a) const { return norm(vec(a), ns); }
  double dist(PointId a, PointId b) const { return norm(vec(a) - vec(b), ns); }
  std::vector<PointId> ids() const;

  /// Dyadic band of a nonzero radius r: the smallest i >= 1 with
  /// r <= 2^i (1 + 1e-12); boundary radii resolve to the lower band.
  /// Returns 0 for the basepoint.
  int band_of(double r) const;
  int max_band() const;

  /// N_i = basepoint plus all points of band <= i, sorted by id.
  std::vector<PointId> subnet(int i) const;
};

/// Multiply every vector so the minimum nonzero radius becomes exactly 1.
EmbeddedNet rescale_min_norm(EmbeddedNet net);

/// Net given by the lattice coordinates themselves (requires a lattice space
/// whose metric exponent matches ns, or dimension 1).
EmbeddedNet make_coordinate_net(const LocallyFiniteSpace& space, const NormSpec& ns);

/// Rows of the distance matrix against the given pivot order: point a maps to
/// (d(a, x_1), ..., d(a, x_n)) under the sup norm, an exact isometry.
std::map<PointId, SparseVector> frechet_embed(
    const std::vector<PointId>& pivots,
    const std::function<double(PointId, PointId)>& dist);

using PieceMap = std::map<PointId, SparseVector>;

struct LiftOptions {
  int window = 8;
  double tol = 1e-9;
  bool fix_last = false;   // fall back to the last piece when detection fails
  double c_slack = 1e-6;   // relative slack on the declared bilipschitz bound
  bool check_uniform = true;
};

/// Convergent-selection surrogate for passing a uniformly bilipschitz piece
/// family to a single embedding: each point receives the coordinatewise limit
/// detected along the family, and the resulting net is checked to be
/// bilipschitz-equivalent to the source metric with constant <= C + slack.
/// Throws NonUniform when a piece violates the declared C, NoConvergence when
/// no stable limit map exists within the horizon (unless fix_last is set).
EmbeddedNet lift_space(const LocallyFiniteSpace& space,
                       const std::vector<PieceMap>& pieces, double C,
                       const NormSpec& ns, const LiftOptions& opts = {});

/// Maps s_1, s_2, ... where s_i is defined exactly on N_i and satisfies
/// |u - v| <= |s_i(u) - s_i(v)| <= (1 + 1/i)|u - v| with s_i(0) = 0.
struct ScaleChain {
  std::vector<std::map<PointId, SparseVector>> maps;  // maps[i-1] = s_i
  NormSpec ns;
  double C = 1.0;

  int length() const { return static_cast<int>(maps.size()); }
  /// s_i(a); throws OutOfRange when the chain lacks index i or the point.
  const SparseVector& at(int i, PointId a) const;
};

struct ChainViolation {
  int i = 0;
  PointId a = 0;
  PointId b = 0;
  std::string kind;  // upper | lower | zero
  double ratio = 0.0;
};

struct ChainCheck {
  bool ok = true;
  double worst_upper = 0.0;  // max |s_i(u)-s_i(v)| / ((1+1/i)|u-v|)
  double worst_lower = 0.0;  // min |s_i(u)-s_i(v)| / |u-v|
  long pairs_checked = 0;
  std::vector<ChainViolation> violations;
};

ChainCheck validate_chain(const ScaleChain& chain, const EmbeddedNet& net,
                          double rel_slack = 1e-9);

/// Coordinatewise limit table of a norm-bounded chain, the computable stand-in
/// for a weak* limit against finitely supported functionals.
struct WeakLimitTable {
  std::map<PointId, SparseVector> m;
  std::map<PointId, double> residuals;  // per-point worst tail deviation
  std::vector<int> surviving;    // chain indices the detection kept
  double max_residual = 0.0;
  long transient_coords = 0;     // coordinates ruled escaping at the horizon
  bool window_truncated = false;
  bool lipschitz_ok = true;      // |m(a)-m(b)| <= (1+1/i0)|a-b| on all pairs

  const SparseVector& limit(PointId a) const;
};

/// Per-coordinate detection over the last `window` surviving samples:
/// a tail that is flat within tol is taken at its final value; otherwise a
/// least-squares fit of v = L + beta/i is accepted when its residual is small
/// (sequences approaching their limit at rate 1/i are recovered exactly);
/// a coordinate that was exactly zero until a short trailing suffix is ruled
/// escaping with limit 0. Anything else thins the surviving set, dropping the
/// smallest offending index first; NoConvergence when thinning exhausts the
/// horizon.
WeakLimitTable weak_limit(const ScaleChain& chain, const EmbeddedNet& net,
                          int horizon, double tol, int window = 8);

struct SelectionConstants {
  double norming = 0.99;       // factor the stored functionals must attain
  double dev_bound = 1e-3;     // later-map pairing bound, fraction of |a-b|
  double limit_bound = 1e-2;   // pairing bound, fraction of |m(a)-m(b)|
  double slack = 1e-9;
  int keep = 0;                // surviving maps to retain; 0 = band count + 2
};

/// Functional fixed for the deviation vector (s_j(a)-s_j(b)) - (m(a)-m(b));
/// every kept later map must pair below dev_bound * |a-b| against it.
struct DevFunctional {
  int j = 0;  // index in the renumbered chain
  PointId a = 0;
  PointId b = 0;
  DualVector f;
  double attained = 0.0;   // <f, deviation> / |deviation|
  double later_max = 0.0;  // max |<f, deviation_k>| over kept k > j
};

/// Functional fixed for m(a) - m(b) when the limits differ; every kept map
/// covering the pair must pair below limit_bound * |m(a)-m(b)| against the
/// deviation vectors.
struct LimitFunctional {
  PointId a = 0;
  PointId b = 0;
  DualVector f;
  double attained = 0.0;  // <f, m(a)-m(b)> / |m(a)-m(b)|
  double dev_max = 0.0;   // max |<f, deviation_k>| over kept k >= band(a,b)
};

struct SelectionCertificate {
  std::vector<int> surviving;  // original chain indices, renumbered 1,2,...
  std::vector<DevFunctional> dev;
  std::vector<LimitFunctional> limit;
};

/// Deterministic greedy subsequence selection: chain indices are admitted in
/// increasing order, and a candidate is skipped as soon as it violates a
/// pairing bound against an already-fixed functional. The kept subsequence is
/// renumbered 1, 2, ..., which preserves the (1 + 1/i) envelope because the
/// new index never exceeds the original. Throws HorizonExhausted when fewer
/// than `keep` indices can be admitted, reporting the last offending pair.
std::pair<ScaleChain, SelectionCertificate> select_subsequence(
    const ScaleChain& chain, const EmbeddedNet& net, const WeakLimitTable& wlt,
    const SelectionConstants& consts, int horizon);

/// Re-derives every stored inequality from the certificate vectors alone.
bool verify_certificate(const ScaleChain& chain, const EmbeddedNet& net,
                        const WeakLimitTable& wlt,
                        const SelectionCertificate& cert,
                        const SelectionConstants& consts,
                        std::string* why = nullptr);

enum class SyntheticKind { identity, shift, scaled_shift, jitter };

SyntheticKind synthetic_kind_from_string(const std::string& s);
std::string to_string(SyntheticKind kind);

struct SyntheticParams {
  int length = 256;
  SparseVector::Index blocksize = 0;  // 0 = one past the net's max index
  double epsilon_scale = 0.05;        // jitter: eps_i = epsilon_scale / i
  std::uint64_t seed = 1;             // jitter amplitudes
};

/// Test chains exercising distinct limit regimes. identity: s_i = id.
/// shift: coordinate translation by i*blocksize (an isometry for every p).
/// scaled_shift: (1 + 1/(2i)) times the shift. jitter: id plus a per-point
/// perturbation of size epsilon_scale/i placed in a fresh coordinate block,
/// which keeps the lower near-isometry bound exact; throws JitterTooLarge
/// when the requested scale cannot fit under the (1 + 1/i) envelope for the
/// measured perturbation Lipschitz constant.
ScaleChain synthetic_chain(const EmbeddedNet& net, SyntheticKind kind,
                           const SyntheticParams& params = {});

}  // namespace lfe
