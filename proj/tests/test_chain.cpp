#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "lfe/chain.hpp"
#include "lfe/errors.hpp"

using namespace lfe;

namespace {

EmbeddedNet line_net(int extent, const NormSpec& ns) {
  return rescale_min_norm(make_coordinate_net(make_lattice(1, ns, extent), ns));
}

ScaleChain scaled_identity_chain(const EmbeddedNet& net, int length) {
  ScaleChain chain;
  chain.ns = net.ns;
  for (int i = 1; i <= length; ++i) {
    std::map<PointId, SparseVector> map;
    for (PointId a : net.subnet(i)) map.emplace(a, (1.0 + 1.0 / i) * net.vec(a));
    chain.maps.push_back(std::move(map));
  }
  return chain;
}

}  // namespace

TEST_CASE("embedded net bands and subnets") {
  const EmbeddedNet net = line_net(8, NormSpec::l2());
  CHECK(net.scale == 1.0);
  CHECK(net.max_band() == 3);  // radii up to 8
  CHECK(net.band_of(1.0) == 1);
  CHECK(net.band_of(2.0) == 1);  // boundary resolves down
  CHECK(net.band_of(2.5) == 2);
  CHECK(net.band_of(8.0) == 3);
  CHECK(net.subnet(1).size() == 5);  // 0, +-1, +-2
  CHECK(net.subnet(3).size() == net.points.size());

  EmbeddedNet tiny;
  tiny.ns = NormSpec::l2();
  tiny.basepoint = 0;
  tiny.points.emplace(0, SparseVector{});
  tiny.points.emplace(1, 0.25 * SparseVector::unit(0));
  const EmbeddedNet scaled = rescale_min_norm(tiny);
  CHECK(scaled.scale == 4.0);
  CHECK(norm(scaled.vec(1), scaled.ns) == 1.0);
}

TEST_CASE("frechet_embed is an exact isometry") {
  SUBCASE("two points") {
    auto dist = [](PointId u, PointId v) { return u == v ? 0.0 : 5.0; };
    const auto rows = frechet_embed({0, 1}, dist);
    CHECK(rows.at(0).coeff(0) == 0.0);
    CHECK(rows.at(0).coeff(1) == 5.0);
    CHECK(rows.at(1).coeff(0) == 5.0);
    CHECK(rows.at(1).coeff(1) == 0.0);
    CHECK(norm(rows.at(0) - rows.at(1), NormSpec::linf()) == 5.0);
  }
  SUBCASE("one point maps to the zero row") {
    auto dist = [](PointId, PointId) { return 0.0; };
    const auto rows = frechet_embed({0}, dist);
    CHECK(rows.at(0).is_zero());
  }
  SUBCASE("three points, boundary triangle") {
    // d(0,1)=1, d(0,2)=2, d(1,2)=3: rows are the matrix rows and every
    // sup-norm gap reproduces the distance.
    const std::vector<std::vector<double>> m{{0, 1, 2}, {1, 0, 3}, {2, 3, 0}};
    auto dist = [&m](PointId u, PointId v) {
      return m[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)];
    };
    const auto rows = frechet_embed({0, 1, 2}, dist);
    const NormSpec sup = NormSpec::linf();
    for (PointId u = 0; u < 3; ++u) {
      for (PointId v = 0; v < 3; ++v) {
        if (u == v) continue;
        CHECK(norm(rows.at(u) - rows.at(v), sup) == dist(u, v));
      }
    }
  }
}

TEST_CASE("lift_space") {
  const LocallyFiniteSpace z1 = make_lattice(1, NormSpec::l2(), 4);
  const NormSpec ns = NormSpec::l2();
  const EmbeddedNet coord = make_coordinate_net(z1, ns);
  const int pieces_count = 10;

  SUBCASE("constant family returns the embedding exactly") {
    std::vector<PieceMap> pieces;
    for (int i = 1; i <= pieces_count; ++i) {
      const double r = std::ldexp(1.0, i);
      PieceMap piece;
      for (PointId id : z1.ball(z1.basepoint(), r)) piece.emplace(id, coord.vec(id));
      pieces.push_back(std::move(piece));
    }
    const EmbeddedNet net = lift_space(z1, pieces, 1.0, ns, {});
    for (PointId id : z1.points()) CHECK(net.vec(id) == coord.vec(id));
  }

  SUBCASE("escaping family has no limit embedding") {
    std::vector<PieceMap> pieces;
    for (int i = 1; i <= pieces_count; ++i) {
      const double r = std::ldexp(1.0, i);
      PieceMap piece;
      for (PointId id : z1.ball(z1.basepoint(), r)) {
        piece.emplace(id, coord.vec(id).shifted(static_cast<SparseVector::Index>(i)));
      }
      pieces.push_back(std::move(piece));
    }
    CHECK_THROWS_AS(lift_space(z1, pieces, 1.0, ns, {}), NoConvergence);

    LiftOptions fallback;
    fallback.fix_last = true;
    const EmbeddedNet net = lift_space(z1, pieces, 1.0, ns, fallback);
    CHECK(net.vec(z1.basepoint()).is_zero());
    for (PointId u : z1.points()) {
      for (PointId v : z1.points()) {
        if (u >= v) continue;
        CHECK(net.dist(u, v) == doctest::Approx(z1.dist(u, v)));
      }
    }
  }

  SUBCASE("piece violating the declared bound is rejected") {
    std::vector<PieceMap> pieces;
    for (int i = 1; i <= 3; ++i) {
      const double r = std::ldexp(1.0, i);
      PieceMap piece;
      for (PointId id : z1.ball(z1.basepoint(), r)) {
        piece.emplace(id, (i == 2 ? 3.0 : 1.0) * coord.vec(id));
      }
      pieces.push_back(std::move(piece));
    }
    CHECK_THROWS_AS(lift_space(z1, pieces, 2.0, ns, {}), NonUniform);
  }

  SUBCASE("distance-sorted sup-norm rows lift to an exact copy of the line") {
    const LocallyFiniteSpace z8 = make_lattice(1, NormSpec::l2(), 8);
    const NormSpec sup = NormSpec::linf();
    std::vector<PointId> pivots = z8.points();
    std::stable_sort(pivots.begin(), pivots.end(), [&](PointId u, PointId v) {
      const double du = z8.dist(z8.basepoint(), u);
      const double dv = z8.dist(z8.basepoint(), v);
      if (du != dv) return du < dv;
      return u < v;
    });
    std::vector<PieceMap> pieces;
    for (int i = 1; i <= 12; ++i) {
      const double r = std::ldexp(1.0, i);
      std::vector<PointId> shell;
      for (PointId id : pivots) {
        if (z8.dist(z8.basepoint(), id) <= r + 1e-12) shell.push_back(id);
      }
      auto rows = frechet_embed(shell, [&](PointId u, PointId v) { return z8.dist(u, v); });
      const SparseVector origin = rows.at(z8.basepoint());
      PieceMap piece;
      for (auto& [id, row] : rows) piece.emplace(id, row - origin);
      pieces.push_back(std::move(piece));
    }
    const EmbeddedNet net = lift_space(z8, pieces, 1.0, sup, {});
    for (PointId u : z8.points()) {
      for (PointId v : z8.points()) {
        if (u >= v) continue;
        const double ratio = net.dist(u, v) / z8.dist(u, v);
        CHECK(ratio == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("validate_chain") {
  const EmbeddedNet net = line_net(6, NormSpec::l2());

  SUBCASE("identity passes") {
    const ScaleChain chain = synthetic_chain(net, SyntheticKind::identity, {.length = 12});
    const ChainCheck check = validate_chain(chain, net);
    CHECK(check.ok);
    CHECK(check.worst_lower == 1.0);
  }
  SUBCASE("scaled shift stays within the envelope") {
    const ScaleChain chain = synthetic_chain(net, SyntheticKind::scaled_shift, {.length = 12});
    CHECK(validate_chain(chain, net).ok);
  }
  SUBCASE("doubling map fails the upper bound beyond the first index") {
    ScaleChain chain;
    chain.ns = net.ns;
    for (int i = 1; i <= 4; ++i) {
      std::map<PointId, SparseVector> map;
      for (PointId a : net.subnet(i)) map.emplace(a, 2.0 * net.vec(a));
      chain.maps.push_back(std::move(map));
    }
    const ChainCheck check = validate_chain(chain, net);
    CHECK_FALSE(check.ok);
    CHECK_FALSE(check.violations.empty());
    for (const ChainViolation& v : check.violations) {
      CHECK(v.kind == "upper");
      CHECK(v.i >= 2);  // 2 <= 1 + 1/1 passes at the first index
    }
  }
  SUBCASE("basepoint must stay fixed") {
    ScaleChain chain;
    chain.ns = net.ns;
    std::map<PointId, SparseVector> map;
    for (PointId a : net.subnet(1)) {
      map.emplace(a, net.vec(a) + 1e-3 * SparseVector::unit(40));
    }
    chain.maps.push_back(std::move(map));
    const ChainCheck check = validate_chain(chain, net);
    CHECK_FALSE(check.ok);
  }
}

TEST_CASE("weak_limit detection regimes") {
  const EmbeddedNet net = line_net(4, NormSpec::l2());
  const int horizon = 64;

  SUBCASE("constant chain returns the map exactly") {
    const ScaleChain chain = synthetic_chain(net, SyntheticKind::identity, {.length = horizon});
    const WeakLimitTable wlt = weak_limit(chain, net, horizon, 1e-9);
    for (PointId a : net.ids()) CHECK(wlt.limit(a) == net.vec(a));
    CHECK(wlt.max_residual == 0.0);
    CHECK(wlt.lipschitz_ok);
  }
  SUBCASE("shift chain escapes to zero") {
    const ScaleChain chain = synthetic_chain(net, SyntheticKind::shift, {.length = horizon});
    const WeakLimitTable wlt = weak_limit(chain, net, horizon, 1e-9);
    for (PointId a : net.ids()) CHECK(wlt.limit(a).is_zero());
    CHECK(wlt.transient_coords > 0);
  }
  SUBCASE("slowly scaled identity extrapolates to the identity") {
    const ScaleChain chain = scaled_identity_chain(net, horizon);
    const WeakLimitTable wlt = weak_limit(chain, net, horizon, 1e-9);
    for (PointId a : net.ids()) {
      const SparseVector diff = wlt.limit(a) - net.vec(a);
      CHECK(norm(diff, net.ns) <= 1e-9);
    }
  }
  SUBCASE("basepoint limit is exactly zero") {
    const ScaleChain chain = synthetic_chain(net, SyntheticKind::jitter,
                                             {.length = horizon, .seed = 3});
    const WeakLimitTable wlt = weak_limit(chain, net, horizon, 1e-9);
    CHECK(wlt.limit(net.basepoint).is_zero());
  }
  SUBCASE("eventually constant coordinates come back exactly") {
    // Scaled for the first four maps, frozen at the identity afterwards.
    ScaleChain chain;
    chain.ns = net.ns;
    for (int i = 1; i <= horizon; ++i) {
      const double factor = i < 5 ? 1.0 + 1.0 / (2.0 * i) : 1.0;
      std::map<PointId, SparseVector> map;
      for (PointId a : net.subnet(i)) map.emplace(a, factor * net.vec(a));
      chain.maps.push_back(std::move(map));
    }
    CHECK(validate_chain(chain, net).ok);
    const WeakLimitTable wlt = weak_limit(chain, net, horizon, 1e-9);
    for (PointId a : net.ids()) CHECK(wlt.limit(a) == net.vec(a));
  }
}

TEST_CASE("select_subsequence") {
  const EmbeddedNet net = line_net(4, NormSpec::l2());
  SelectionConstants consts;

  SUBCASE("constant chain stores only limit functionals") {
    const ScaleChain chain = synthetic_chain(net, SyntheticKind::identity, {.length = 32});
    const WeakLimitTable wlt = weak_limit(chain, net, 32, 1e-9);
    const auto [selected, cert] = select_subsequence(chain, net, wlt, consts, 32);
    CHECK(cert.dev.empty());  // deviations vanish identically
    CHECK_FALSE(cert.limit.empty());
    for (const LimitFunctional& lf : cert.limit) {
      CHECK(lf.attained == doctest::Approx(1.0));
      CHECK(lf.dev_max <= 1e-12);
    }
    CHECK(verify_certificate(selected, net, wlt, cert, consts));
    CHECK(validate_chain(selected, net).ok);
  }

  SUBCASE("shift chain admits a prefix and pairs to zero on later maps") {
    const ScaleChain chain = synthetic_chain(net, SyntheticKind::shift, {.length = 32});
    const WeakLimitTable wlt = weak_limit(chain, net, 32, 1e-9);
    const auto [selected, cert] = select_subsequence(chain, net, wlt, consts, 32);
    const int need = net.max_band() + 2;
    REQUIRE(static_cast<int>(cert.surviving.size()) == need);
    for (int t = 1; t <= need; ++t) {
      CHECK(cert.surviving[static_cast<std::size_t>(t - 1)] == t);
    }
    CHECK(cert.limit.empty());  // all weak limits vanish
    CHECK_FALSE(cert.dev.empty());
    for (const DevFunctional& df : cert.dev) {
      CHECK(df.attained == doctest::Approx(1.0));
      CHECK(df.later_max <= 1e-12);  // disjoint support blocks
    }
    CHECK(verify_certificate(selected, net, wlt, cert, consts));
  }

  SUBCASE("slowly scaled identity forces thinning at the derived thresholds") {
    const EmbeddedNet small = line_net(2, NormSpec::l2());
    const int horizon = 1100;
    const ScaleChain chain = scaled_identity_chain(small, horizon);
    const WeakLimitTable wlt = weak_limit(chain, small, horizon, 1e-9);

    // Independent thresholds, solved from the stored inequalities: the limit
    // functional of a pair pairs to dist/k against the deviation at map k, so
    // the first admissible index is the smallest k with dist/k <= dist/100 +
    // slack for every pair; the first admission's deviation functional then
    // demands dist/k <= dist/1000 + slack from every later admission.
    auto smallest_admissible = [&](double bound, int from) {
      int k = from;
      while (true) {
        bool ok = true;
        for (PointId u : small.ids()) {
          for (PointId v : small.ids()) {
            if (u >= v) continue;
            const double d = small.dist(u, v);
            if (d == 0.0) continue;
            ok = ok && d / k <= bound * d + consts.slack;
          }
        }
        if (ok) return k;
        ++k;
      }
    };
    const int first_admissible = smallest_admissible(consts.limit_bound, 1);
    const int second_admissible = smallest_admissible(consts.dev_bound, first_admissible + 1);
    CHECK(first_admissible == 100);
    CHECK(second_admissible == 1000);

    const auto [selected, cert] = select_subsequence(chain, small, wlt, consts, horizon);
    REQUIRE(cert.surviving.size() >= 3);
    CHECK(cert.surviving[0] == first_admissible);
    CHECK(cert.surviving[1] == second_admissible);
    CHECK(cert.surviving[2] == second_admissible + 1);
    CHECK(verify_certificate(selected, small, wlt, cert, consts));
    CHECK(validate_chain(selected, small).ok);
  }

  SUBCASE("short horizon exhausts") {
    const EmbeddedNet small = line_net(2, NormSpec::l2());
    const ScaleChain chain = scaled_identity_chain(small, 50);
    const WeakLimitTable wlt = weak_limit(chain, small, 50, 1e-9);
    CHECK_THROWS_AS(select_subsequence(chain, small, wlt, consts, 50), HorizonExhausted);
  }
}

TEST_CASE("synthetic chains") {
  SUBCASE("shift is an isometry for every p") {
    for (const NormSpec& ns : {NormSpec::l1(), NormSpec::l2(), NormSpec::linf()}) {
      const EmbeddedNet net = line_net(4, ns);
      const ScaleChain chain = synthetic_chain(net, SyntheticKind::shift, {.length = 10});
      const ChainCheck check = validate_chain(chain, net);
      CHECK(check.ok);
      CHECK(check.worst_lower == doctest::Approx(1.0));
    }
  }
  SUBCASE("jitter with a quarter-scale target fits the envelope") {
    for (const NormSpec& ns : {NormSpec::l1(), NormSpec::l2()}) {
      const EmbeddedNet net = line_net(4, ns);
      const ScaleChain chain = synthetic_chain(
          net, SyntheticKind::jitter, {.length = 32, .epsilon_scale = 0.25, .seed = 5});
      CHECK(validate_chain(chain, net).ok);
    }
  }
  SUBCASE("oversized jitter is rejected") {
    const EmbeddedNet net = line_net(4, NormSpec::l2());
    SyntheticParams params;
    params.length = 16;
    params.epsilon_scale = 100.0;
    params.seed = 5;
    CHECK_THROWS_AS(synthetic_chain(net, SyntheticKind::jitter, params), JitterTooLarge);
  }
  SUBCASE("chain domains are the subnets") {
    const EmbeddedNet net = line_net(8, NormSpec::l2());
    const ScaleChain chain = synthetic_chain(net, SyntheticKind::identity, {.length = 4});
    for (int i = 1; i <= 4; ++i) {
      CHECK(chain.maps[static_cast<std::size_t>(i - 1)].size() == net.subnet(i).size());
    }
    CHECK_THROWS_AS(chain.at(5, 0), OutOfRange);
  }
}
