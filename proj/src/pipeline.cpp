#include "lfe/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "lfe/errors.hpp"
#include "lfe/logging.hpp"

namespace lfe {

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

int auto_imax(const LocallyFiniteSpace& space) {
  double max_d = 0.0;
  for (PointId id : space.points()) {
    max_d = std::max(max_d, space.dist(space.basepoint(), id));
  }
  int i = 1;
  while (std::ldexp(1.0, i) < max_d) ++i;
  return i;
}

int auto_kmax(const EmbeddedNet& net) {
  double max_r = 0.0;
  for (const auto& [id, v] : net.points) max_r = std::max(max_r, norm(v, net.ns));
  int k = 1;
  while (std::pow(3.0, k + 1) < max_r) ++k;
  return k;
}

// Snowflake wrapper: same points, distances replaced by their square roots.
// The square root of a metric is a metric, and the transform is nonlinear
// with moduli rho1(t) = rho2(t) = sqrt(t), so composing it in front of a
// bilipschitz embedding exercises the coarse pipeline.
LocallyFiniteSpace snowflake(const LocallyFiniteSpace& space) {
  auto base = std::make_shared<LocallyFiniteSpace>(space);
  auto dist = [base](PointId u, PointId v) { return std::sqrt(base->dist(u, v)); };
  return LocallyFiniteSpace(base->points(), dist, base->basepoint(),
                            std::sqrt(base->delta()),
                            "sqrt-snowflake of " + base->description());
}

EmbeddedNet build_net(const ExperimentConfig& cfg, const LocallyFiniteSpace& space,
                      int imax) {
  std::string source = cfg.chain.net_source;
  const bool is_lattice = cfg.space.kind == "lattice" && cfg.mode == RunMode::bilipschitz;
  if (source == "auto") {
    const bool coordinate_ok =
        is_lattice && (cfg.space.metric == cfg.p || cfg.space.dim == 1);
    source = coordinate_ok ? "coordinate" : "frechet_lift";
  }
  if (source == "coordinate") {
    if (cfg.mode == RunMode::coarse) {
      throw ConfigError("coarse mode needs net_source frechet_lift");
    }
    if (!(cfg.space.metric == cfg.p || cfg.space.dim == 1)) {
      throw ConfigError("coordinate net needs matching lattice metric and model p");
    }
    return make_coordinate_net(space, cfg.p);
  }

  if (!cfg.p.is_inf()) {
    throw ConfigError("frechet_lift builds sup-norm rows; set p to \"inf\"");
  }
  // Pivots ordered by distance from the basepoint, so each shell's pivot set
  // is a prefix of the next and the rows are constant per coordinate.
  std::vector<PointId> pivots = space.points();
  std::stable_sort(pivots.begin(), pivots.end(), [&](PointId u, PointId v) {
    const double du = space.dist(space.basepoint(), u);
    const double dv = space.dist(space.basepoint(), v);
    if (du != dv) return du < dv;
    return u < v;
  });

  const int pieces_count = imax + cfg.selection.window;
  std::vector<PieceMap> pieces;
  pieces.reserve(static_cast<std::size_t>(pieces_count));
  for (int i = 1; i <= pieces_count; ++i) {
    const double r = std::ldexp(1.0, i);
    std::vector<PointId> shell_pivots;
    for (PointId id : pivots) {
      if (space.dist(space.basepoint(), id) <= r + 1e-12) shell_pivots.push_back(id);
    }
    std::map<PointId, SparseVector> rows = frechet_embed(
        shell_pivots, [&](PointId u, PointId v) { return space.dist(u, v); });
    const SparseVector origin_row = rows.at(space.basepoint());
    PieceMap piece;
    for (auto& [id, row] : rows) piece.emplace(id, row - origin_row);
    pieces.push_back(std::move(piece));
  }
  LiftOptions opts;
  opts.window = cfg.selection.window;
  opts.tol = cfg.selection.tol;
  return lift_space(space, pieces, 1.0, cfg.p, opts);
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg,
                         const std::filesystem::path& out_dir) {
  RunResult result;
  json summary;
  summary["config"] = json{{"space", to_json(cfg.space)},
                           {"p", to_json(cfg.p)},
                           {"chain", to_string(cfg.chain.kind)},
                           {"mode", cfg.mode == RunMode::coarse ? "coarse" : "bilipschitz"},
                           {"seed", cfg.seed},
                           {"horizon", cfg.selection.horizon},
                           {"window", cfg.selection.window}};

  std::string stage = "setup";
  try {
    std::filesystem::create_directories(out_dir);

    stage = "space";
    log_info("stage space: building " + cfg.space.kind);
    const LocallyFiniteSpace base_space = build_space(cfg.space, cfg.max_points);
    {
      // Small spaces are cheap to validate exhaustively.
      const long samples = base_space.size() <= 48 ? 0 : cfg.validate_samples;
      const ValidationReport report = validate_space(base_space, samples, cfg.seed);
      summary["space"] = json{{"points", base_space.size()},
                              {"delta", base_space.delta()},
                              {"checks", report.checks},
                              {"issues", report.issues.size()}};
      if (!report.ok()) {
        std::ostringstream msg;
        const ValidationIssue& issue = report.issues.front();
        msg << "space validation failed: " << issue.kind << " on points";
        for (PointId id : issue.points) msg << ' ' << id;
        throw Error(msg.str());
      }
    }

    const LocallyFiniteSpace space =
        cfg.mode == RunMode::coarse ? snowflake(base_space) : base_space;

    stage = "shells";
    const int imax = cfg.imax > 0 ? cfg.imax : auto_imax(space);
    const ShellDecomposition decomposition = shells(space, imax, cfg.max_points);
    summary["shells"] = json{{"imax", imax},
                             {"sizes", [&] {
                                std::vector<std::size_t> sizes;
                                for (const auto& s : decomposition.shells) {
                                  sizes.push_back(s.size());
                                }
                                return sizes;
                              }()}};

    stage = "net";
    EmbeddedNet net = rescale_min_norm(build_net(cfg, space, imax));
    summary["net"] = json{{"points", net.points.size()},
                          {"scale", net.scale},
                          {"max_band", net.max_band()}};

    stage = "chain";
    SyntheticParams params;
    params.length = cfg.selection.horizon;
    params.blocksize = cfg.chain.blocksize;
    params.epsilon_scale = cfg.chain.epsilon_scale;
    params.seed = cfg.seed;
    const ScaleChain chain = synthetic_chain(net, cfg.chain.kind, params);
    {
      // The selection cannot possibly keep enough maps when the horizon is
      // shorter than the band range the glued map consumes.
      const int need = cfg.selection.keep > 0 ? cfg.selection.keep : net.max_band() + 2;
      if (chain.length() < need) {
        stage = "selection";
        throw HorizonExhausted("selection needs " + std::to_string(need) +
                               " maps but the horizon provides " +
                               std::to_string(chain.length()));
      }
    }
    {
      const ChainCheck check = validate_chain(chain, net);
      summary["chain"] = json{{"kind", to_string(cfg.chain.kind)},
                              {"length", chain.length()},
                              {"worst_lower", check.worst_lower},
                              {"worst_upper", check.worst_upper},
                              {"pairs_checked", check.pairs_checked}};
      if (!check.ok) {
        throw Error("chain validation failed with " +
                    std::to_string(check.violations.size()) + " violations");
      }
    }

    stage = "weak_limit";
    const WeakLimitTable wlt =
        weak_limit(chain, net, cfg.selection.horizon, cfg.selection.tol,
                   cfg.selection.window);
    summary["weak_limit"] = json{{"surviving", wlt.surviving.size()},
                                 {"max_residual", wlt.max_residual},
                                 {"transient_coords", wlt.transient_coords},
                                 {"window_truncated", wlt.window_truncated},
                                 {"lipschitz_ok", wlt.lipschitz_ok}};

    stage = "selection";
    SelectionConstants sel;
    sel.norming = cfg.consts.norming;
    sel.dev_bound = cfg.consts.dev_bound;
    sel.limit_bound = cfg.consts.limit_bound;
    sel.slack = cfg.consts.slack;
    sel.keep = cfg.selection.keep;
    auto [selected, certificate] =
        select_subsequence(chain, net, wlt, sel, cfg.selection.horizon);
    {
      const ChainCheck recheck = validate_chain(selected, net);
      summary["selection"] = json{{"surviving", certificate.surviving},
                                  {"dev_functionals", certificate.dev.size()},
                                  {"limit_functionals", certificate.limit.size()},
                                  {"revalidate_ok", recheck.ok}};
      if (!recheck.ok) throw Error("selected chain fails the envelope recheck");
    }

    stage = "glue";
    GluedMap glued{net, selected};
    AugmentedMap aug{glued};

    stage = "tau";
    const int kmax = cfg.kmax > 0 ? cfg.kmax : auto_kmax(net);
    const TauPath tau = build_tau(glued, kmax);
    HatMap hat{glued, tau};
    summary["tau"] = json{{"kmax", kmax},
                          {"directions", tau.directions.size()},
                          {"tset_sizes", tau.tset_sizes}};

    stage = "audit";
    bool audits_ok = true;
    {
      std::string why;
      const bool cert_ok =
          verify_certificate(selected, net, wlt, certificate, sel, &why);
      summary["certificate"] = json{{"ok", cert_ok}, {"why", why}};
      audits_ok = audits_ok && cert_ok;
    }
    const std::vector<PairReport> reports =
        measure_pairs(glued, wlt, cfg.consts, cfg.workers);
    const CaseSummary cases = check_case_bounds(reports, cfg.consts);
    summary["cases"] = to_json(cases);
    audits_ok = audits_ok && cases.ok();

    const TauSummary tau_summary = check_tau_bounds(hat, cfg.consts);
    summary["tau_bounds"] = to_json(tau_summary);
    audits_ok = audits_ok && tau_summary.ok();
    audits_ok = audits_ok &&
                tau_summary.worst_alpha >= cfg.consts.tau_separated - cfg.consts.slack;

    if (net.points.size() >= 2) {
      const std::vector<PointId> ids = net.ids();
      const DistortionReport dist_report = distortion(
          [&](PointId u, PointId v) { return aug.dist(u, v); }, ids,
          [&](PointId u, PointId v) { return net.dist(u, v); });
      summary["distortion"] = to_json(dist_report);
    }

    if (cfg.mode == RunMode::coarse) {
      stage = "moduli";
      double width = cfg.coarse.bucket_width;
      if (width <= 0.0) {
        double diam = 0.0;
        const auto& pts = base_space.points();
        for (std::size_t x = 0; x < pts.size(); ++x) {
          for (std::size_t y = x + 1; y < pts.size(); ++y) {
            diam = std::max(diam, base_space.dist(pts[x], pts[y]));
          }
        }
        width = std::max(diam / 16.0, 1e-9);
      }
      const CoarseModuli moduli = empirical_moduli(
          [&](PointId u, PointId v) { return aug.dist(u, v); }, base_space.points(),
          [&](PointId u, PointId v) { return base_space.dist(u, v); }, width);
      summary["moduli"] = to_json(moduli);
      const bool coarse_ok = moduli.bucket_ordered() &&
                             moduli.increasing_run() >= cfg.coarse.min_increasing;
      summary["moduli"]["ok"] = coarse_ok;
      audits_ok = audits_ok && coarse_ok;
    }

    stage = "report";
    summary["ok"] = audits_ok;
    write_file(out_dir / "pairs.csv", pair_reports_csv(reports));
    json maps{{"format", 1},
              {"mode", cfg.mode == RunMode::coarse ? "coarse" : "bilipschitz"},
              {"space", to_json(cfg.space)},
              {"net", to_json(net)},
              {"chain", to_json(selected)},
              {"weak_limits", to_json(wlt)},
              {"certificate", to_json(certificate)},
              {"tau", to_json(tau)},
              {"audit", to_json(cfg.consts)},
              {"bucket_width", cfg.coarse.bucket_width},
              {"min_increasing", cfg.coarse.min_increasing}};
    write_file(out_dir / "maps.json", maps.dump(1) + "\n");
    write_file(out_dir / "summary.json", summary.dump(1) + "\n");

    result.summary = std::move(summary);
    result.audits_ok = audits_ok;
    result.exit_code = audits_ok ? kExitOk : kExitAuditFailed;
    return result;
  } catch (const ConfigError& e) {
    result.exit_code = kExitConfig;
    result.failed_stage = stage;
    result.message = e.what();
  } catch (const Error& e) {
    result.exit_code = kExitPipeline;
    result.failed_stage = stage;
    result.message = e.what();
  }
  summary["error"] = json{{"stage", result.failed_stage}, {"message", result.message}};
  result.summary = std::move(summary);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (!ec) {
    std::ofstream out(out_dir / "summary.json", std::ios::binary);
    if (out) out << result.summary.dump(1) << "\n";
  }
  return result;
}

RunResult run_audit_from_file(const std::filesystem::path& maps_json,
                              const std::filesystem::path& out_dir, int workers) {
  RunResult result;
  std::string stage = "load";
  json summary;
  try {
    std::ifstream in(maps_json);
    if (!in) throw ConfigError("cannot open " + maps_json.string());
    json maps;
    try {
      in >> maps;
    } catch (const json::exception& e) {
      throw ConfigError(std::string("maps parse error: ") + e.what());
    }

    const EmbeddedNet net = net_from_json(maps.at("net"));
    const ScaleChain chain = chain_from_json(maps.at("chain"));
    const WeakLimitTable wlt = weak_limits_from_json(maps.at("weak_limits"));
    const SelectionCertificate cert = certificate_from_json(maps.at("certificate"));
    const AuditConstants consts = constants_from_json(maps.at("audit"));
    const TauPath tau = tau_from_json(maps.at("tau"), net.ns);
    const bool coarse = maps.value("mode", std::string("bilipschitz")) == "coarse";

    stage = "audit";
    bool audits_ok = true;
    GluedMap glued{net, chain};
    AugmentedMap aug{glued};

    {
      const ChainCheck check = validate_chain(chain, net);
      summary["chain"] = json{{"ok", check.ok},
                              {"worst_lower", check.worst_lower},
                              {"worst_upper", check.worst_upper}};
      audits_ok = audits_ok && check.ok;
    }
    {
      SelectionConstants sel;
      sel.norming = consts.norming;
      sel.dev_bound = consts.dev_bound;
      sel.limit_bound = consts.limit_bound;
      sel.slack = consts.slack;
      std::string why;
      const bool cert_ok = verify_certificate(chain, net, wlt, cert, sel, &why);
      summary["certificate"] = json{{"ok", cert_ok}, {"why", why}};
      audits_ok = audits_ok && cert_ok;
    }

    const std::vector<PairReport> reports = measure_pairs(glued, wlt, consts, workers);
    const CaseSummary cases = check_case_bounds(reports, consts);
    summary["cases"] = to_json(cases);
    audits_ok = audits_ok && cases.ok();

    // Rebuild the span sets from the serialized glued map and re-check the
    // fresh-direction geometry before re-running the path bounds.
    {
      HatMap hat{glued, build_tau(glued, tau.kmax())};
      bool directions_match = hat.tau.directions.size() == tau.directions.size();
      if (directions_match) {
        for (std::size_t i = 0; i < tau.directions.size(); ++i) {
          directions_match = directions_match && tau.directions[i] == hat.tau.directions[i];
        }
      }
      bool riesz_ok = true;
      for (std::size_t i = 0; i < tau.directions.size(); ++i) {
        const double d = dist_to_span(tau.directions[i], hat.tau.span_sets[i], net.ns);
        riesz_ok = riesz_ok && d == 1.0;
      }
      summary["tau_geometry"] = json{{"directions_match", directions_match},
                                     {"riesz_ok", riesz_ok}};
      audits_ok = audits_ok && directions_match && riesz_ok;

      const TauSummary tau_summary = check_tau_bounds(hat, consts);
      summary["tau_bounds"] = to_json(tau_summary);
      audits_ok = audits_ok && tau_summary.ok();
      audits_ok =
          audits_ok && tau_summary.worst_alpha >= consts.tau_separated - consts.slack;
    }

    if (net.points.size() >= 2) {
      const std::vector<PointId> ids = net.ids();
      const DistortionReport dist_report = distortion(
          [&](PointId u, PointId v) { return aug.dist(u, v); }, ids,
          [&](PointId u, PointId v) { return net.dist(u, v); });
      summary["distortion"] = to_json(dist_report);
    }

    if (coarse && maps.contains("space")) {
      stage = "moduli";
      const SpaceSpec spec = space_spec_from_json(maps.at("space"));
      const LocallyFiniteSpace base_space = build_space(spec, kDefaultPointCap);
      double width = maps.value("bucket_width", 0.0);
      if (width <= 0.0) {
        double diam = 0.0;
        const auto& pts = base_space.points();
        for (std::size_t x = 0; x < pts.size(); ++x) {
          for (std::size_t y = x + 1; y < pts.size(); ++y) {
            diam = std::max(diam, base_space.dist(pts[x], pts[y]));
          }
        }
        width = std::max(diam / 16.0, 1e-9);
      }
      const CoarseModuli moduli = empirical_moduli(
          [&](PointId u, PointId v) { return aug.dist(u, v); }, base_space.points(),
          [&](PointId u, PointId v) { return base_space.dist(u, v); }, width);
      summary["moduli"] = to_json(moduli);
      const bool coarse_ok = moduli.bucket_ordered() &&
                             moduli.increasing_run() >= maps.value("min_increasing", 5);
      summary["moduli"]["ok"] = coarse_ok;
      audits_ok = audits_ok && coarse_ok;
    }

    summary["ok"] = audits_ok;
    std::filesystem::create_directories(out_dir);
    write_file(out_dir / "pairs.csv", pair_reports_csv(reports));
    write_file(out_dir / "summary.json", summary.dump(1) + "\n");

    result.summary = std::move(summary);
    result.audits_ok = audits_ok;
    result.exit_code = audits_ok ? kExitOk : kExitAuditFailed;
    return result;
  } catch (const ConfigError& e) {
    result.exit_code = kExitConfig;
    result.failed_stage = stage;
    result.message = e.what();
  } catch (const Error& e) {
    result.exit_code = kExitPipeline;
    result.failed_stage = stage;
    result.message = e.what();
  }
  result.summary = std::move(summary);
  return result;
}

}  // namespace lfe
