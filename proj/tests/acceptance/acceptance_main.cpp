// Acceptance suite: one section per shipping criterion, each printing a
// single [PASS]/[FAIL] line. Every tolerance is pinned here, in code.
// Exit status 0 only when every criterion holds.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "lfe/pipeline.hpp"

namespace {

int failures = 0;

#define REQUIRE(cond, msg)                                                  \
  do {                                                                      \
    if (!(cond)) {                                                          \
      std::cerr << "[FAIL] " << __FILE__ << ":" << __LINE__ << " " << (msg) \
                << "\n";                                                    \
      ++failures;                                                           \
      return;                                                               \
    }                                                                       \
  } while (0)

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

using namespace lfe;

EmbeddedNet lattice_net(int dim, int extent, const NormSpec& ns) {
  return rescale_min_norm(make_coordinate_net(make_lattice(dim, ns, extent), ns));
}

struct BuiltRun {
  EmbeddedNet net;
  ScaleChain chain;
  WeakLimitTable wlt;
  SelectionCertificate cert;
  bool chain_ok = false;
};

BuiltRun build_run(const EmbeddedNet& net, SyntheticKind kind, int horizon,
                   std::uint64_t seed) {
  BuiltRun run;
  run.net = net;
  SyntheticParams params;
  params.length = horizon;
  params.seed = seed;
  const ScaleChain raw = synthetic_chain(net, kind, params);
  run.chain_ok = validate_chain(raw, net).ok;
  run.wlt = weak_limit(raw, net, horizon, 1e-9);
  SelectionConstants consts;
  auto [selected, cert] = select_subsequence(raw, net, run.wlt, consts, horizon);
  run.chain = std::move(selected);
  run.cert = std::move(cert);
  return run;
}

// --- criterion 1: sup-norm rows of repaired random matrices are isometric ---

std::vector<std::vector<double>> random_metric(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> entry(1.0, 10.0);
  std::vector<std::vector<double>> d(
      static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double v = entry(rng);
      d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v;
      d[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = v;
    }
  }
  // Shortest-path closure, iterated until the triangle inequality holds under
  // the same float comparisons the checks use.
  for (int pass = 0; pass < n + 2; ++pass) {
    bool changed = false;
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const double via = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] +
                             d[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
          if (via < d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) {
            d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = via;
            changed = true;
          }
        }
      }
    }
    if (!changed) break;
  }
  return d;
}

void criterion_frechet_isometry() {
  Timer timer;
  std::mt19937_64 rng(20240811);
  std::uniform_int_distribution<int> size(2, 40);
  long pair_checks = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = size(rng);
    const auto matrix = random_metric(rng, n);
    std::vector<PointId> ids(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
    auto dist = [&matrix](PointId u, PointId v) {
      return matrix[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)];
    };
    const auto rows = frechet_embed(ids, dist);
    const NormSpec sup = NormSpec::linf();
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double image = norm(rows.at(i) - rows.at(j), sup);
        const double d = dist(i, j);
        REQUIRE(std::fabs(image - d) <= 1e-12 * std::max(1.0, d),
                "sup-norm row distance differs from the source metric");
        ++pair_checks;
      }
    }
  }
  REQUIRE(timer.seconds() < 5.0, "isometry sweep exceeded 5 s");
  std::cout << "[PASS] 1. frechet isometry: 50 random spaces, " << pair_checks
            << " pairs exact within 1e-12 (" << timer.seconds() << " s)\n";
}

// --- criterion 2: identity-chain gluing is the identity with distortion <= 2 ---

void criterion_identity_glue() {
  Timer timer;
  struct Setup {
    int dim;
    int extent;
    NormSpec ns;
    const char* label;
  };
  const std::vector<Setup> setups{{1, 64, NormSpec::l2(), "Z^1 extent 64"},
                                  {2, 8, NormSpec::l1(), "Z^2 extent 8 l1"},
                                  {2, 8, NormSpec::l2(), "Z^2 extent 8 l2"}};
  for (const Setup& setup : setups) {
    const EmbeddedNet net = lattice_net(setup.dim, setup.extent, setup.ns);
    const BuiltRun run = build_run(net, SyntheticKind::identity, 64, 1);
    REQUIRE(run.chain_ok, std::string(setup.label) + ": chain validation failed");
    const GluedMap glued{run.net, run.chain};
    for (PointId a : net.ids()) {
      REQUIRE(glued.phi(a) == net.vec(a),
              std::string(setup.label) + ": phi is not the identity pointwise");
    }
    const AugmentedMap aug{glued};
    const std::vector<PointId> ids = net.ids();
    const DistortionReport rep =
        distortion([&](PointId u, PointId v) { return aug.dist(u, v); }, ids,
                   [&](PointId u, PointId v) { return net.dist(u, v); });
    REQUIRE(rep.distortion <= 2.0 + 1e-12,
            std::string(setup.label) + ": augmented distortion exceeds 2");
  }
  REQUIRE(timer.seconds() < 10.0, "identity gluing exceeded 10 s");
  std::cout << "[PASS] 2. identity gluing: phi == id exactly, distortion(phi~) <= 2 ("
            << timer.seconds() << " s)\n";
}

// --- criterion 3: certified chains satisfy every branch bound ---

void criterion_certified_audit() {
  Timer timer;
  const AuditConstants consts;
  long pairs_total = 0;
  for (const NormSpec& ns : {NormSpec::l1(), NormSpec::l2(), NormSpec::linf()}) {
    const EmbeddedNet net = lattice_net(1, 32, ns);
    for (SyntheticKind kind :
         {SyntheticKind::shift, SyntheticKind::scaled_shift, SyntheticKind::jitter}) {
      const std::string label =
          to_string(kind) + " p=" + (ns.is_inf() ? "inf" : std::to_string(ns.p));
      const BuiltRun run = build_run(net, kind, 256, 11);
      REQUIRE(run.chain_ok, label + ": chain validation failed");
      SelectionConstants sel;
      REQUIRE(verify_certificate(run.chain, run.net, run.wlt, run.cert, sel),
              label + ": certificate re-verification failed");
      const GluedMap glued{run.net, run.chain};
      const auto reports = measure_pairs(glued, run.wlt, consts);
      const CaseSummary summary = check_case_bounds(reports, consts);
      if (!summary.ok()) {
        std::cerr << "[FAIL] " << label << ": " << summary.violations.front() << "\n";
        ++failures;
        return;
      }
      pairs_total += summary.pairs;
    }
  }
  REQUIRE(timer.seconds() < 60.0, "certified audit exceeded 60 s");
  std::cout << "[PASS] 3. certified chains: 9 runs, " << pairs_total
            << " pairs, zero branch-bound violations within 1e-9 (" << timer.seconds()
            << " s)\n";
}

// --- criterion 4: separated-band envelope, exhaustive at extent 64 ---

void criterion_separated_envelope() {
  Timer timer;
  const EmbeddedNet net = lattice_net(1, 64, NormSpec::l2());
  const BuiltRun run = build_run(net, SyntheticKind::shift, 64, 1);
  REQUIRE(run.chain_ok, "extent-64 shift chain validation failed");
  const GluedMap glued{run.net, run.chain};
  const AuditConstants consts;
  const auto reports = measure_pairs(glued, run.wlt, consts);
  long separated = 0;
  for (const PairReport& rep : reports) {
    if (rep.label != CaseLabel::separated_bands) continue;
    ++separated;
    REQUIRE(rep.envelope_ratio <= 24.0 + 1e-9, "envelope ratio exceeds 24");
    const double measured = rep.tilde_dist / rep.dist;
    REQUIRE(measured <= 24.0 + 1e-9, "measured ratio above the envelope window");
    REQUIRE(measured >= 1.0 / 24.0 - 1e-9, "measured ratio below the envelope window");
  }
  REQUIRE(separated > 0, "no separated-band pairs at extent 64");
  std::cout << "[PASS] 4. separated bands: " << separated
            << " pairs, envelope <= 24 and measured ratio within [1/24, 24] ("
            << timer.seconds() << " s)\n";
}

// --- criterion 5: path construction ---

void criterion_tau_path() {
  Timer timer;
  const EmbeddedNet net = lattice_net(1, 64, NormSpec::l2());
  const BuiltRun run = build_run(net, SyntheticKind::identity, 64, 1);
  const GluedMap glued{run.net, run.chain};
  const int kmax = 3;  // breakpoints 3, 9, 27, 81 cover radius 64
  const TauPath tau = build_tau(glued, kmax);

  // Continuity: at each breakpoint both segment formulas give the same vector.
  for (int k = 1; k <= kmax; ++k) {
    const double edge = std::pow(3.0, k);
    SparseVector left;  // segment k-1 evaluated at its right endpoint
    double prev = 0.0;
    double e = 3.0;
    for (int j = 1; j < k; ++j) {
      left = left + (e - prev) * tau.directions[static_cast<std::size_t>(j - 1)];
      prev = e;
      e *= 3.0;
    }
    left = left + (edge - prev) * tau.directions[static_cast<std::size_t>(k - 1)];
    SparseVector right;  // segment k evaluated at its left endpoint
    prev = 0.0;
    e = 3.0;
    for (int j = 1; j <= k; ++j) {
      right = right + (e - prev) * tau.directions[static_cast<std::size_t>(j - 1)];
      prev = e;
      e *= 3.0;
    }
    REQUIRE(left == right, "segment formulas disagree at a breakpoint");
    REQUIRE(tau.value(edge) == left, "path value differs from the segment formulas");
  }

  std::mt19937_64 rng(5150);
  std::uniform_real_distribution<double> pick(0.0, 81.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const double s = pick(rng);
    const double t = pick(rng);
    const double gap = norm(tau.value(s) - tau.value(t), net.ns);
    REQUIRE(gap <= std::fabs(s - t) + 1e-12, "path is not 1-Lipschitz on a sample");
  }

  for (std::size_t i = 0; i < tau.directions.size(); ++i) {
    REQUIRE(norm(tau.directions[i], net.ns) == 1.0, "direction is not a unit vector");
    REQUIRE(dist_to_span(tau.directions[i], tau.span_sets[i], net.ns) == 1.0,
            "direction is not at exact distance 1 from its span");
  }
  std::cout << "[PASS] 5. path: exact breakpoint continuity, 1e4 Lipschitz samples, "
               "span distance exactly 1 ("
            << timer.seconds() << " s)\n";
}

// --- criterion 6: combined-map lower bound over the test nets ---

void criterion_hat_alpha() {
  Timer timer;
  const AuditConstants consts;
  const double floor_alpha = 4.0 / 27.0 - 1e-9;
  struct Setup {
    EmbeddedNet net;
    SyntheticKind kind;
    const char* label;
  };
  std::vector<Setup> setups;
  setups.push_back(
      {lattice_net(1, 64, NormSpec::l2()), SyntheticKind::identity, "Z^1 identity"});
  setups.push_back({lattice_net(1, 64, NormSpec::l2()), SyntheticKind::shift, "Z^1 shift"});
  setups.push_back(
      {lattice_net(2, 8, NormSpec::l2()), SyntheticKind::identity, "Z^2 identity"});
  setups.push_back(
      {lattice_net(2, 8, NormSpec::l1()), SyntheticKind::shift, "Z^2 l1 shift"});
  double worst = std::numeric_limits<double>::infinity();
  for (const Setup& setup : setups) {
    const BuiltRun run = build_run(setup.net, setup.kind, 64, 1);
    const GluedMap glued{run.net, run.chain};
    double max_r = 0.0;
    for (const auto& [id, v] : run.net.points) {
      max_r = std::max(max_r, norm(v, run.net.ns));
    }
    int kmax = 1;
    while (std::pow(3.0, kmax + 1) < max_r) ++kmax;
    const HatMap hat{glued, build_tau(glued, kmax)};
    const TauSummary summary = check_tau_bounds(hat, consts);
    REQUIRE(summary.ok(), std::string(setup.label) + ": a path branch bound failed");
    REQUIRE(summary.worst_alpha >= floor_alpha,
            std::string(setup.label) + ": combined-map alpha below 4/27");
    worst = std::min(worst, summary.worst_alpha);
  }
  std::cout << "[PASS] 6. combined map: worst alpha " << worst << " >= 4/27 - 1e-9 ("
            << timer.seconds() << " s)\n";
}

// --- criterion 7: coarse pipeline moduli ---

void criterion_coarse_moduli() {
  Timer timer;
  json doc{{"space", {{"kind", "lattice"}, {"dim", 1}, {"extent", 32}, {"metric", 2}}},
           {"p", "inf"},
           {"chain", {{"kind", "shift"}, {"net_source", "frechet_lift"}}},
           {"selection", {{"horizon", 64}, {"window", 8}, {"tol", 1e-9}}},
           {"mode", "coarse"},
           {"seed", 1}};
  const ExperimentConfig cfg = parse_config(doc);
  const auto dir = std::filesystem::temp_directory_path() / "lfe_acceptance_coarse";
  std::filesystem::remove_all(dir);
  const RunResult result = run_experiment(cfg, dir);
  REQUIRE(result.exit_code == kExitOk, "coarse pipeline did not pass");
  const json& moduli = result.summary["moduli"];
  REQUIRE(moduli["bucket_ordered"].get<bool>(), "rho1 exceeds rho2 in a bucket");
  REQUIRE(moduli["increasing_run"].get<int>() >= 5,
          "rho1 envelope not strictly increasing across 5 buckets");
  std::cout << "[PASS] 7. coarse pipeline: rho1 envelope strictly increasing across "
            << moduli["increasing_run"].get<int>() << " buckets, rho1 <= rho2 ("
            << timer.seconds() << " s)\n";
}

// --- criterion 8: determinism and audit round trip ---

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void criterion_determinism() {
  Timer timer;
  json doc{{"space", {{"kind", "lattice"}, {"dim", 1}, {"extent", 16}, {"metric", 2}}},
           {"p", 2},
           {"chain", {{"kind", "shift"}}},
           {"selection", {{"horizon", 64}, {"window", 8}, {"tol", 1e-9}}},
           {"seed", 9}};
  const ExperimentConfig cfg = parse_config(doc);
  const auto base = std::filesystem::temp_directory_path();
  const auto dir1 = base / "lfe_acceptance_det1";
  const auto dir2 = base / "lfe_acceptance_det2";
  const auto dir3 = base / "lfe_acceptance_det_audit";
  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
  std::filesystem::remove_all(dir3);

  const RunResult r1 = run_experiment(cfg, dir1);
  const RunResult r2 = run_experiment(cfg, dir2);
  REQUIRE(r1.exit_code == kExitOk, "first run failed");
  REQUIRE(r2.exit_code == kExitOk, "second run failed");
  REQUIRE(slurp(dir1 / "pairs.csv") == slurp(dir2 / "pairs.csv"),
          "pairs.csv differs between identical runs");
  REQUIRE(!slurp(dir1 / "pairs.csv").empty(), "pairs.csv is empty");

  const RunResult audited = run_audit_from_file(dir1 / "maps.json", dir3);
  REQUIRE(audited.exit_code == kExitOk, "re-audit of serialized maps failed");
  REQUIRE(audited.audits_ok == r1.audits_ok, "re-audit verdict differs");
  REQUIRE(audited.summary["cases"]["pairs"] == r1.summary["cases"]["pairs"],
          "re-audit pair count differs");
  REQUIRE(slurp(dir1 / "pairs.csv") == slurp(dir3 / "pairs.csv"),
          "re-audit pair table differs");
  std::cout << "[PASS] 8. determinism: byte-identical pairs.csv; serialized audit "
               "reproduces the verdict ("
            << timer.seconds() << " s)\n";
}

}  // namespace

int main() {
  criterion_frechet_isometry();
  criterion_identity_glue();
  criterion_certified_audit();
  criterion_separated_envelope();
  criterion_tau_path();
  criterion_hat_alpha();
  criterion_coarse_moduli();
  criterion_determinism();

  if (failures > 0) {
    std::cerr << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all acceptance criteria passed\n";
  return 0;
}
