#include "lfe/sparse_vector.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "lfe/errors.hpp"

namespace lfe {

namespace {

double sign_of(double x) { return x < 0.0 ? -1.0 : 1.0; }

}  // namespace

SparseVector SparseVector::unit(Index k) {
  return SparseVector({{k, 1.0}});
}

SparseVector SparseVector::from_entries(std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const Entry& x, const Entry& y) { return x.first < y.first; });
  std::vector<Entry> merged;
  merged.reserve(entries.size());
  for (const auto& [idx, val] : entries) {
    if (!merged.empty() && merged.back().first == idx) {
      merged.back().second += val;
    } else {
      merged.emplace_back(idx, val);
    }
  }
  std::erase_if(merged, [](const Entry& e) { return e.second == 0.0; });
  return SparseVector(std::move(merged));
}

SparseVector SparseVector::from_dense(std::span<const double> values) {
  std::vector<Entry> entries;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k] != 0.0) entries.emplace_back(static_cast<Index>(k), values[k]);
  }
  return SparseVector(std::move(entries));
}

double SparseVector::coeff(Index k) const {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), k,
      [](const Entry& e, Index idx) { return e.first < idx; });
  if (it != entries_.end() && it->first == k) return it->second;
  return 0.0;
}

std::optional<SparseVector::Index> SparseVector::max_index() const {
  if (entries_.empty()) return std::nullopt;
  return entries_.back().first;
}

SparseVector SparseVector::shifted(Index offset) const {
  std::vector<Entry> entries = entries_;
  for (auto& [idx, val] : entries) idx += offset;
  return SparseVector(std::move(entries));
}

namespace {

template <typename Combine>
SparseVector merge(const SparseVector& u, const SparseVector& v, Combine combine) {
  const auto& ue = u.entries();
  const auto& ve = v.entries();
  std::vector<SparseVector::Entry> out;
  out.reserve(ue.size() + ve.size());
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < ue.size() || j < ve.size()) {
    if (j == ve.size() || (i < ue.size() && ue[i].first < ve[j].first)) {
      const double val = combine(ue[i].second, 0.0);
      if (val != 0.0) out.emplace_back(ue[i].first, val);
      ++i;
    } else if (i == ue.size() || ve[j].first < ue[i].first) {
      const double val = combine(0.0, ve[j].second);
      if (val != 0.0) out.emplace_back(ve[j].first, val);
      ++j;
    } else {
      const double val = combine(ue[i].second, ve[j].second);
      if (val != 0.0) out.emplace_back(ue[i].first, val);
      ++i;
      ++j;
    }
  }
  return SparseVector::from_entries(std::move(out));
}

}  // namespace

SparseVector operator+(const SparseVector& u, const SparseVector& v) {
  return merge(u, v, [](double x, double y) { return x + y; });
}

SparseVector operator-(const SparseVector& u, const SparseVector& v) {
  return merge(u, v, [](double x, double y) { return x - y; });
}

SparseVector operator*(double c, const SparseVector& v) {
  std::vector<SparseVector::Entry> entries;
  entries.reserve(v.support_size());
  for (const auto& [idx, val] : v.entries()) {
    const double scaled = c * val;
    if (scaled != 0.0) entries.emplace_back(idx, scaled);
  }
  return SparseVector::from_entries(std::move(entries));
}

double dot(const SparseVector& u, const SparseVector& v) {
  const auto& ue = u.entries();
  const auto& ve = v.entries();
  double sum = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < ue.size() && j < ve.size()) {
    if (ue[i].first < ve[j].first) {
      ++i;
    } else if (ve[j].first < ue[i].first) {
      ++j;
    } else {
      sum += ue[i].second * ve[j].second;
      ++i;
      ++j;
    }
  }
  return sum;
}

SparseVector convex_combine(double w1, const SparseVector& u, double w2,
                            const SparseVector& v) {
  return merge(u, v, [w1, w2](double x, double y) {
    if (x == y) return x;  // w1 + w2 == 1, so equal coordinates pass through
    return w1 * x + w2 * y;
  });
}

NormSpec NormSpec::linf() {
  return NormSpec{std::numeric_limits<double>::infinity()};
}

NormSpec NormSpec::lp(double p) {
  if (!(p >= 1.0)) throw Error("NormSpec: p must be >= 1");
  return NormSpec{p};
}

bool NormSpec::is_inf() const { return std::isinf(p); }

double NormSpec::conjugate() const {
  if (is_inf()) return 1.0;
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  return p / (p - 1.0);
}

double norm(const SparseVector& v, const NormSpec& ns) {
  if (v.is_zero()) return 0.0;
  if (ns.is_inf()) {
    double best = 0.0;
    for (const auto& [idx, val] : v.entries()) best = std::max(best, std::fabs(val));
    return best;
  }
  if (ns.p == 1.0) {
    double sum = 0.0;
    for (const auto& [idx, val] : v.entries()) sum += std::fabs(val);
    return sum;
  }
  if (ns.p == 2.0) {
    double sum = 0.0;
    for (const auto& [idx, val] : v.entries()) sum += val * val;
    return std::sqrt(sum);
  }
  double sum = 0.0;
  for (const auto& [idx, val] : v.entries()) sum += std::pow(std::fabs(val), ns.p);
  return std::pow(sum, 1.0 / ns.p);
}

DualVector norming_functional(const SparseVector& v, const NormSpec& ns) {
  if (v.is_zero()) throw ZeroVector("norming_functional: zero vector has no norming functional");
  const NormSpec dual = NormSpec{ns.conjugate()};
  if (ns.is_inf()) {
    // Signed unit vector at the smallest maximizing coordinate.
    const double max_abs = norm(v, ns);
    for (const auto& [idx, val] : v.entries()) {
      if (std::fabs(val) == max_abs) {
        return DualVector{sign_of(val) * SparseVector::unit(idx), dual};
      }
    }
    throw Error("norming_functional: max coordinate not found");
  }
  if (ns.p == 1.0) {
    std::vector<SparseVector::Entry> entries;
    entries.reserve(v.support_size());
    for (const auto& [idx, val] : v.entries()) entries.emplace_back(idx, sign_of(val));
    return DualVector{SparseVector::from_entries(std::move(entries)), dual};
  }
  const double total = norm(v, ns);
  std::vector<SparseVector::Entry> entries;
  entries.reserve(v.support_size());
  for (const auto& [idx, val] : v.entries()) {
    const double mag = std::pow(std::fabs(val) / total, ns.p - 1.0);
    if (mag != 0.0) entries.emplace_back(idx, sign_of(val) * mag);
  }
  return DualVector{SparseVector::from_entries(std::move(entries)), dual};
}

double pairing(const DualVector& f, const SparseVector& v) {
  return dot(f.f, v);
}

namespace {

// Residual of v against an orthonormalized basis; exact least squares.
double euclidean_span_distance(const SparseVector& v,
                               std::span<const SparseVector> basis) {
  std::vector<SparseVector> ortho;
  ortho.reserve(basis.size());
  const NormSpec l2 = NormSpec::l2();
  for (const SparseVector& b : basis) {
    SparseVector q = b;
    for (const SparseVector& prev : ortho) q = q - dot(q, prev) * prev;
    const double len = norm(q, l2);
    if (len > 1e-12 * (norm(b, l2) + 1.0)) ortho.push_back((1.0 / len) * q);
  }
  SparseVector r = v;
  for (const SparseVector& q : ortho) r = r - dot(r, q) * q;
  return norm(r, l2);
}

bool supports_disjoint(const SparseVector& v, std::span<const SparseVector> basis) {
  for (const SparseVector& b : basis) {
    const auto& ue = v.entries();
    const auto& ve = b.entries();
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < ue.size() && j < ve.size()) {
      if (ue[i].first < ve[j].first) {
        ++i;
      } else if (ve[j].first < ue[i].first) {
        ++j;
      } else {
        return false;
      }
    }
  }
  return true;
}

struct Objective {
  const SparseVector& v;
  std::span<const SparseVector> basis;
  const NormSpec& ns;

  double operator()(std::span<const double> coeffs) const {
    SparseVector r = v;
    for (std::size_t j = 0; j < basis.size(); ++j) {
      if (coeffs[j] != 0.0) r = r - coeffs[j] * basis[j];
    }
    return norm(r, ns);
  }
};

// Golden-section minimization of a convex slice.
double golden_min(const std::function<double(double)>& g, double lo, double hi) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo;
  double b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double gc = g(c);
  double gd = g(d);
  for (int it = 0; it < 90 && (b - a) > 1e-13 * (1.0 + std::fabs(a) + std::fabs(b)); ++it) {
    if (gc < gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - kInvPhi * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + kInvPhi * (b - a);
      gd = g(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

double dist_to_span(const SparseVector& v, std::span<const SparseVector> basis,
                    const NormSpec& ns, const SpanDistOptions& opts) {
  std::vector<SparseVector> usable;
  usable.reserve(basis.size());
  for (const SparseVector& b : basis) {
    if (!b.is_zero()) usable.push_back(b);
  }
  const double vnorm = norm(v, ns);
  if (usable.empty() || v.is_zero()) return vnorm;
  if (supports_disjoint(v, usable)) return vnorm;  // optimum is c = 0
  if (ns == NormSpec::l2()) return euclidean_span_distance(v, usable);

  // General p: coordinate descent from the euclidean minimizer. Any feasible
  // coefficient vector yields a valid upper bound; the result is clamped by
  // |v| (the value at c = 0).
  std::vector<double> coeffs(usable.size(), 0.0);
  {
    std::vector<SparseVector> ortho;
    std::vector<std::vector<double>> expansions;  // ortho in terms of usable
    const NormSpec l2 = NormSpec::l2();
    for (std::size_t j = 0; j < usable.size(); ++j) {
      SparseVector q = usable[j];
      std::vector<double> expand(usable.size(), 0.0);
      expand[j] = 1.0;
      for (std::size_t k = 0; k < ortho.size(); ++k) {
        const double proj = dot(q, ortho[k]);
        q = q - proj * ortho[k];
        for (std::size_t t = 0; t < usable.size(); ++t) expand[t] -= proj * expansions[k][t];
      }
      const double len = norm(q, l2);
      if (len > 1e-12 * (norm(usable[j], l2) + 1.0)) {
        for (double& e : expand) e /= len;
        ortho.push_back((1.0 / len) * q);
        expansions.push_back(std::move(expand));
      }
    }
    for (std::size_t k = 0; k < ortho.size(); ++k) {
      const double proj = dot(v, ortho[k]);
      for (std::size_t t = 0; t < usable.size(); ++t) coeffs[t] += proj * expansions[k][t];
    }
  }

  const Objective objective{v, usable, ns};
  double best = std::min(vnorm, objective(coeffs));
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    const double before = best;
    for (std::size_t j = 0; j < usable.size(); ++j) {
      const double bnorm = norm(usable[j], ns);
      if (bnorm == 0.0) continue;
      const double radius = 2.0 * (vnorm + 1.0) / bnorm + std::fabs(coeffs[j]);
      const double center = coeffs[j];
      auto slice = [&](double c) {
        std::vector<double> trial(coeffs);
        trial[j] = c;
        return objective(trial);
      };
      const double c_star = golden_min(slice, center - radius, center + radius);
      const double val = slice(c_star);
      if (val < best) {
        best = val;
        coeffs[j] = c_star;
      }
    }
    if (before - best < opts.tol) break;
  }
  return std::min(best, vnorm);
}

SparseVector fresh_direction(std::span<const SparseVector> occupied) {
  SparseVector::Index next = 0;
  for (const SparseVector& v : occupied) {
    if (auto top = v.max_index()) next = std::max(next, *top + 1);
  }
  return SparseVector::unit(next);
}

}  // namespace lfe
