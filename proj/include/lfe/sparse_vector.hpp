#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace lfe {

/// Finitely supported real sequence. Entries are kept sorted by coordinate
/// index and an exact zero is never stored, so entrywise equality coincides
/// with representational equality.
class SparseVector {
 public:
  using Index = std::uint64_t;
  using Entry = std::pair<Index, double>;

  SparseVector() = default;

  static SparseVector unit(Index k);
  /// Sorts, merges duplicate indices and drops zero entries.
  static SparseVector from_entries(std::vector<Entry> entries);
  static SparseVector from_dense(std::span<const double> values);

  const std::vector<Entry>& entries() const { return entries_; }
  bool is_zero() const { return entries_.empty(); }
  std::size_t support_size() const { return entries_.size(); }
  double coeff(Index k) const;
  std::optional<Index> max_index() const;

  /// Same values with every index translated by `offset`.
  SparseVector shifted(Index offset) const;

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

 private:
  explicit SparseVector(std::vector<Entry> sorted_nonzero)
      : entries_(std::move(sorted_nonzero)) {}

  std::vector<Entry> entries_;
};

SparseVector operator+(const SparseVector& u, const SparseVector& v);
SparseVector operator-(const SparseVector& u, const SparseVector& v);
SparseVector operator*(double c, const SparseVector& v);
double dot(const SparseVector& u, const SparseVector& v);

/// w1*u + w2*v for weights with w1 + w2 == 1. Coordinates where u and v agree
/// pass through unchanged, so combining a vector with itself is exact and the
/// band formulas of the glued map agree exactly on band boundaries.
SparseVector convex_combine(double w1, const SparseVector& u, double w2,
                            const SparseVector& v);

/// Selects which lp sequence space the model lives in. p = infinity is a
/// distinguished value.
struct NormSpec {
  double p = 2.0;

  static NormSpec l1() { return NormSpec{1.0}; }
  static NormSpec l2() { return NormSpec{2.0}; }
  static NormSpec linf();
  /// Throws Error when p < 1.
  static NormSpec lp(double p);

  bool is_inf() const;
  /// Conjugate exponent q with 1/p + 1/q = 1.
  double conjugate() const;

  friend bool operator==(const NormSpec&, const NormSpec&) = default;
};

/// lp norm of v; 0 for the zero vector.
double norm(const SparseVector& v, const NormSpec& ns);

/// Norm-one element of the dual space, stored with its conjugate exponent.
struct DualVector {
  SparseVector f;
  NormSpec dual;
};

/// Duality map: a functional of dual norm exactly 1 with <f, v> = |v|_p.
/// For 1 < p < inf: f_k = sign(v_k)|v_k|^(p-1) / |v|^(p-1). For p = 1 the
/// sign vector on the support; for p = inf the signed unit vector at the
/// smallest maximizing coordinate. Throws ZeroVector when v = 0.
DualVector norming_functional(const SparseVector& v, const NormSpec& ns);

double pairing(const DualVector& f, const SparseVector& v);

struct SpanDistOptions {
  double tol = 1e-8;
  int max_sweeps = 200;
};

/// min over coefficients c of |v - sum c_j b_j|_p. Exact (closed form) for
/// p = 2 and exact (= |v|) when the support of v is disjoint from every basis
/// support; otherwise an upper bound from coordinate-descent minimization,
/// never exceeding |v|.
double dist_to_span(const SparseVector& v, std::span<const SparseVector> basis,
                    const NormSpec& ns, const SpanDistOptions& opts = {});

/// Unit basis vector whose index lies strictly beyond every support index in
/// `occupied`, so its distance to their span is exactly 1 in every lp norm.
SparseVector fresh_direction(std::span<const SparseVector> occupied);

}  // namespace lfe
