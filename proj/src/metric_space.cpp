#include "lfe/metric_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <utility>

#include "lfe/errors.hpp"

namespace lfe {

LocallyFiniteSpace::LocallyFiniteSpace(std::vector<PointId> ids, DistFn dist,
                                       PointId basepoint, double delta,
                                       std::string description)
    : ids_(std::move(ids)),
      dist_(std::move(dist)),
      basepoint_(basepoint),
      delta_(delta),
      description_(std::move(description)) {
  if (delta_ <= 0.0) throw Error("LocallyFiniteSpace: delta must be positive");
  std::sort(ids_.begin(), ids_.end());
}

std::vector<PointId> LocallyFiniteSpace::ball(PointId center, double r) const {
  std::vector<PointId> out;
  for (PointId id : ids_) {
    if (dist_(center, id) <= r + 1e-12) out.push_back(id);
  }
  return out;  // ids_ is sorted, so the ball is too
}

const std::vector<int>* LocallyFiniteSpace::coords(PointId id) const {
  if (coords_.empty()) return nullptr;
  return &coords_.at(static_cast<std::size_t>(id));
}

LocallyFiniteSpace make_lattice(int dim, const NormSpec& metric, int extent,
                                std::size_t max_points) {
  if (dim < 1) throw Error("make_lattice: dim must be >= 1");
  if (extent < 1) throw Error("make_lattice: extent must be >= 1");
  const std::size_t side = 2 * static_cast<std::size_t>(extent) + 1;
  std::size_t count = 1;
  for (int d = 0; d < dim; ++d) {
    if (count > max_points / side) {
      throw GeneratorOverflow("make_lattice: point cap exceeded");
    }
    count *= side;
  }

  std::vector<std::vector<int>> coords(count, std::vector<int>(dim));
  for (std::size_t id = 0; id < count; ++id) {
    std::size_t rest = id;
    for (int d = dim - 1; d >= 0; --d) {
      coords[id][static_cast<std::size_t>(d)] =
          static_cast<int>(rest % side) - extent;
      rest /= side;
    }
  }

  std::vector<PointId> ids(count);
  for (std::size_t i = 0; i < count; ++i) ids[i] = static_cast<PointId>(i);

  PointId origin = 0;
  for (std::size_t id = 0; id < count; ++id) {
    bool all_zero = true;
    for (int c : coords[id]) all_zero = all_zero && c == 0;
    if (all_zero) {
      origin = static_cast<PointId>(id);
      break;
    }
  }

  auto dist = [coords, metric](PointId u, PointId v) {
    const auto& cu = coords[static_cast<std::size_t>(u)];
    const auto& cv = coords[static_cast<std::size_t>(v)];
    if (metric.is_inf()) {
      int best = 0;
      for (std::size_t d = 0; d < cu.size(); ++d) best = std::max(best, std::abs(cu[d] - cv[d]));
      return static_cast<double>(best);
    }
    if (metric.p == 1.0) {
      long sum = 0;
      for (std::size_t d = 0; d < cu.size(); ++d) sum += std::abs(cu[d] - cv[d]);
      return static_cast<double>(sum);
    }
    if (metric.p == 2.0) {
      double sum = 0.0;
      for (std::size_t d = 0; d < cu.size(); ++d) {
        const double diff = cu[d] - cv[d];
        sum += diff * diff;
      }
      return std::sqrt(sum);
    }
    double sum = 0.0;
    for (std::size_t d = 0; d < cu.size(); ++d) {
      sum += std::pow(std::fabs(static_cast<double>(cu[d] - cv[d])), metric.p);
    }
    return std::pow(sum, 1.0 / metric.p);
  };

  LocallyFiniteSpace space(std::move(ids), dist, origin, 1.0,
                           "lattice dim=" + std::to_string(dim) +
                               " extent=" + std::to_string(extent));
  space.set_coords(std::move(coords));
  return space;
}

LocallyFiniteSpace make_tree(int branching, int depth, double edge_len,
                             std::size_t max_points) {
  if (branching < 2) throw Error("make_tree: branching must be >= 2");
  if (depth < 1) throw Error("make_tree: depth must be >= 1");
  if (edge_len <= 0.0) throw Error("make_tree: edge_len must be positive");

  // Breadth-first ids: 0 is the root, children appended level by level.
  std::vector<PointId> parent{-1};
  std::vector<int> level{0};
  std::size_t level_start = 0;
  for (int d = 0; d < depth; ++d) {
    const std::size_t level_end = parent.size();
    for (std::size_t p = level_start; p < level_end; ++p) {
      for (int c = 0; c < branching; ++c) {
        if (parent.size() >= max_points) {
          throw GeneratorOverflow("make_tree: point cap exceeded");
        }
        parent.push_back(static_cast<PointId>(p));
        level.push_back(d + 1);
      }
    }
    level_start = level_end;
  }

  std::vector<PointId> ids(parent.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<PointId>(i);

  auto dist = [parent, level, edge_len](PointId u, PointId v) {
    int hops = 0;
    PointId x = u;
    PointId y = v;
    while (level[static_cast<std::size_t>(x)] > level[static_cast<std::size_t>(y)]) {
      x = parent[static_cast<std::size_t>(x)];
      ++hops;
    }
    while (level[static_cast<std::size_t>(y)] > level[static_cast<std::size_t>(x)]) {
      y = parent[static_cast<std::size_t>(y)];
      ++hops;
    }
    while (x != y) {
      x = parent[static_cast<std::size_t>(x)];
      y = parent[static_cast<std::size_t>(y)];
      hops += 2;
    }
    return edge_len * hops;
  };

  return LocallyFiniteSpace(std::move(ids), dist, 0, edge_len,
                            "tree branching=" + std::to_string(branching) +
                                " depth=" + std::to_string(depth));
}

LocallyFiniteSpace make_points(std::vector<std::vector<double>> matrix,
                               std::optional<double> delta, PointId basepoint,
                               std::size_t max_points) {
  const std::size_t n = matrix.size();
  if (n == 0) throw Error("make_points: empty matrix");
  if (n > max_points) throw GeneratorOverflow("make_points: point cap exceeded");
  for (const auto& row : matrix) {
    if (row.size() != n) throw Error("make_points: matrix must be square");
  }
  if (basepoint < 0 || static_cast<std::size_t>(basepoint) >= n) {
    throw Error("make_points: basepoint out of range");
  }

  double min_off = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) min_off = std::min(min_off, matrix[i][j]);
    }
  }
  const double d =
      delta.value_or(n > 1 ? min_off : 1.0);  // exact minimum, not an inference

  std::vector<PointId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<PointId>(i);

  auto shared = std::make_shared<std::vector<std::vector<double>>>(std::move(matrix));
  auto dist = [shared](PointId u, PointId v) {
    return (*shared)[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)];
  };
  return LocallyFiniteSpace(std::move(ids), dist, basepoint, d,
                            "points n=" + std::to_string(n));
}

ShellDecomposition shells(const LocallyFiniteSpace& space, int imax,
                          std::size_t max_points) {
  if (imax < 1) throw Error("shells: imax must be >= 1");
  ShellDecomposition out;
  out.shells.reserve(static_cast<std::size_t>(imax));
  out.radii.reserve(static_cast<std::size_t>(imax));
  for (int i = 1; i <= imax; ++i) {
    const double r = std::ldexp(1.0, i);
    std::vector<PointId> shell = space.ball(space.basepoint(), r);
    if (shell.size() > max_points) {
      throw GeneratorOverflow("shells: shell " + std::to_string(i) + " exceeds point cap");
    }
    out.shells.push_back(std::move(shell));
    out.radii.push_back(r);
  }
  return out;
}

namespace {

void check_triple(const LocallyFiniteSpace& space, PointId u, PointId v, PointId w,
                  ValidationReport& report) {
  const double duv = space.dist(u, v);
  const double duw = space.dist(u, w);
  const double dvw = space.dist(v, w);
  if (duw > duv + dvw + 1e-12) {
    report.issues.push_back({"triangle", {u, v, w}, duw, duv + dvw});
  }
}

void check_pair(const LocallyFiniteSpace& space, PointId u, PointId v,
                ValidationReport& report) {
  const double duv = space.dist(u, v);
  const double dvu = space.dist(v, u);
  if (duv < 0.0) report.issues.push_back({"negativity", {u, v}, duv, 0.0});
  if (std::fabs(duv - dvu) > 1e-12) {
    report.issues.push_back({"symmetry", {u, v}, duv, dvu});
  }
  if (u != v && duv < space.delta() - 1e-12) {
    report.issues.push_back({"discreteness", {u, v}, duv, space.delta()});
  }
}

}  // namespace

ValidationReport validate_space(const LocallyFiniteSpace& space, long samples,
                                std::uint64_t seed) {
  ValidationReport report;
  const auto& pts = space.points();
  const std::size_t n = pts.size();

  for (PointId id : pts) {
    const double self = space.dist(id, id);
    if (self != 0.0) report.issues.push_back({"self_distance", {id}, self, 0.0});
    ++report.checks;
  }
  if (n < 2) {
    report.exhaustive = true;
    return report;
  }

  if (samples <= 0) {
    report.exhaustive = true;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        check_pair(space, pts[i], pts[j], report);
        ++report.checks;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
          check_triple(space, pts[i], pts[j], pts[k], report);
          ++report.checks;
        }
      }
    }
    return report;
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (long s = 0; s < samples; ++s) {
    check_pair(space, pts[pick(rng)], pts[pick(rng)], report);
    check_triple(space, pts[pick(rng)], pts[pick(rng)], pts[pick(rng)], report);
    report.checks += 2;
  }
  return report;
}

}  // namespace lfe
