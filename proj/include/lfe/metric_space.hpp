#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lfe/sparse_vector.hpp"

namespace lfe {

using PointId = std::int64_t;

/// Finite truncation of a locally finite metric space: a list of stable point
/// ids, a pure distance oracle, a basepoint and a declared discreteness
/// constant delta. Generators never truncate silently; exceeding the point
/// cap throws GeneratorOverflow.
class LocallyFiniteSpace {
 public:
  using DistFn = std::function<double(PointId, PointId)>;

  LocallyFiniteSpace(std::vector<PointId> ids, DistFn dist, PointId basepoint,
                     double delta, std::string description);

  const std::vector<PointId>& points() const { return ids_; }
  std::size_t size() const { return ids_.size(); }
  double dist(PointId u, PointId v) const { return dist_(u, v); }
  PointId basepoint() const { return basepoint_; }
  double delta() const { return delta_; }
  const std::string& description() const { return description_; }

  /// Ids within distance r of center (slack 1e-12), sorted by id.
  std::vector<PointId> ball(PointId center, double r) const;

  /// Lattice coordinates when the space was built by make_lattice.
  const std::vector<int>* coords(PointId id) const;
  void set_coords(std::vector<std::vector<int>> coords) { coords_ = std::move(coords); }

 private:
  std::vector<PointId> ids_;
  DistFn dist_;
  PointId basepoint_ = 0;
  double delta_ = 1.0;
  std::string description_;
  std::vector<std::vector<int>> coords_;  // indexed by id; empty unless lattice
};

inline constexpr std::size_t kDefaultPointCap = 200000;

/// Z^d inside the box [-extent, extent]^d under the lp metric; delta = 1,
/// basepoint = origin.
LocallyFiniteSpace make_lattice(int dim, const NormSpec& metric, int extent,
                                std::size_t max_points = kDefaultPointCap);

/// Rooted tree with the graph-path metric scaled by edge_len; basepoint is
/// the root, delta = edge_len.
LocallyFiniteSpace make_tree(int branching, int depth, double edge_len,
                             std::size_t max_points = kDefaultPointCap);

/// Explicit n x n distance matrix. Delta defaults to the exact minimum
/// off-diagonal entry; metric axioms are checked by validate_space, not here.
LocallyFiniteSpace make_points(std::vector<std::vector<double>> matrix,
                               std::optional<double> delta = {},
                               PointId basepoint = 0,
                               std::size_t max_points = kDefaultPointCap);

/// Nested balls A_i = ball(basepoint, 2^i) for i = 1..imax, each sorted by id.
struct ShellDecomposition {
  std::vector<std::vector<PointId>> shells;  // shells[i-1] = A_i
  std::vector<double> radii;                 // 2^i

  const std::vector<PointId>& shell(int i) const { return shells.at(static_cast<std::size_t>(i) - 1); }
  int imax() const { return static_cast<int>(shells.size()); }
};

ShellDecomposition shells(const LocallyFiniteSpace& space, int imax,
                          std::size_t max_points = kDefaultPointCap);

struct ValidationIssue {
  std::string kind;  // symmetry | self_distance | discreteness | triangle | negativity
  std::vector<PointId> points;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  long checks = 0;
  bool exhaustive = false;

  bool ok() const { return issues.empty(); }
};

/// Checks symmetry, zero self-distance, discreteness >= delta and the
/// triangle inequality. samples <= 0 means exhaustive over all pairs and
/// triples; otherwise that many seeded random probes of each kind.
ValidationReport validate_space(const LocallyFiniteSpace& space, long samples,
                                std::uint64_t seed = 12345);

}  // namespace lfe
