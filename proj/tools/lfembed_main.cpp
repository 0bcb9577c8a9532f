// Command-line runner for the embedding glue pipeline.
//
// Subcommands:
//   embed     full pipeline from a config file; writes summary.json,
//             pairs.csv and maps.json
//   audit     re-verify a serialized run from its maps.json
//   frechet   embed an explicit distance matrix into sup-norm rows
//   moduli    coarse pipeline, moduli verdict only
//   validate  space (and chain) checks without building the maps
//
// Exit codes: 0 all checks pass, 1 a check failed, 2 config error,
// 3 pipeline error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "lfe/errors.hpp"
#include "lfe/logging.hpp"
#include "lfe/pipeline.hpp"

namespace {

using nlohmann::json;

struct CommonFlags {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> mode;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
  auto* opt = cmd->add_option("--config", flags.config_path, "experiment config JSON");
  if (config_required) opt->required();
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--seed", flags.seed, "override the config seed");
  cmd->add_option("--workers", flags.workers, "audit worker threads");
  cmd->add_option("--mode", flags.mode, "bilipschitz or coarse");
}

lfe::ExperimentConfig load_with_overrides(const CommonFlags& flags) {
  lfe::ExperimentConfig cfg = lfe::load_config(flags.config_path);
  if (flags.seed) {
    cfg.seed = *flags.seed;
    cfg.seed_given = true;
  }
  if (flags.workers) cfg.workers = *flags.workers;
  if (flags.mode) {
    if (*flags.mode == "bilipschitz") {
      cfg.mode = lfe::RunMode::bilipschitz;
    } else if (*flags.mode == "coarse") {
      cfg.mode = lfe::RunMode::coarse;
    } else {
      throw lfe::ConfigError("--mode must be bilipschitz or coarse");
    }
  }
  return cfg;
}

int report_result(const lfe::RunResult& result) {
  if (result.exit_code == lfe::kExitOk) {
    std::cout << "ok\n";
  } else if (result.exit_code == lfe::kExitAuditFailed) {
    std::cout << "audit failed\n";
    if (result.summary.contains("cases")) {
      for (const auto& v : result.summary["cases"]["violations"]) {
        std::cout << "  " << v.get<std::string>() << "\n";
      }
    }
  } else {
    std::cerr << "error at stage " << result.failed_stage << ": " << result.message
              << "\n";
  }
  return result.exit_code;
}

int cmd_embed(const CommonFlags& flags) {
  const lfe::ExperimentConfig cfg = load_with_overrides(flags);
  const lfe::RunResult result = lfe::run_experiment(cfg, flags.out_dir);
  return report_result(result);
}

int cmd_audit(const std::string& maps_path, const CommonFlags& flags) {
  const lfe::RunResult result = lfe::run_audit_from_file(
      maps_path, flags.out_dir, flags.workers.value_or(1));
  return report_result(result);
}

int cmd_moduli(const CommonFlags& flags) {
  lfe::ExperimentConfig cfg = load_with_overrides(flags);
  cfg.mode = lfe::RunMode::coarse;
  const lfe::RunResult result = lfe::run_experiment(cfg, flags.out_dir);
  if (result.exit_code == lfe::kExitOk || result.exit_code == lfe::kExitAuditFailed) {
    if (result.summary.contains("moduli")) {
      std::cout << result.summary["moduli"].dump(1) << "\n";
    }
  }
  return report_result(result);
}

int cmd_frechet(const std::string& matrix_path, const std::string& out_path) {
  std::ifstream in(matrix_path);
  if (!in) throw lfe::ConfigError("cannot open " + matrix_path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw lfe::ConfigError(std::string("matrix parse error: ") + e.what());
  }
  const auto matrix =
      (doc.is_object() ? doc.at("matrix") : doc).get<std::vector<std::vector<double>>>();
  const lfe::LocallyFiniteSpace space = lfe::make_points(matrix);
  const lfe::ValidationReport report = lfe::validate_space(space, 0);
  if (!report.ok()) {
    const lfe::ValidationIssue& issue = report.issues.front();
    std::cerr << "not a metric: " << issue.kind << " on points";
    for (lfe::PointId id : issue.points) std::cerr << ' ' << id;
    std::cerr << " (" << issue.lhs << " vs " << issue.rhs << ")\n";
    return lfe::kExitAuditFailed;
  }

  const auto rows = lfe::frechet_embed(
      space.points(), [&](lfe::PointId u, lfe::PointId v) { return space.dist(u, v); });
  const lfe::NormSpec sup = lfe::NormSpec::linf();
  double worst = 0.0;
  for (lfe::PointId u : space.points()) {
    for (lfe::PointId v : space.points()) {
      if (u >= v) continue;
      const double image = lfe::norm(rows.at(u) - rows.at(v), sup);
      worst = std::max(worst, std::fabs(image - space.dist(u, v)));
    }
  }
  json out{{"p", "inf"}, {"isometry_defect", worst}, {"rows", json::object()}};
  for (const auto& [id, row] : rows) out["rows"][std::to_string(id)] = lfe::to_json(row);
  if (out_path.empty()) {
    std::cout << out.dump(1) << "\n";
  } else {
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw lfe::Error("cannot write " + out_path);
    os << out.dump(1) << "\n";
    std::cout << "isometry defect " << worst << "\n";
  }
  return worst <= 1e-12 ? lfe::kExitOk : lfe::kExitAuditFailed;
}

int cmd_validate(const CommonFlags& flags) {
  const lfe::ExperimentConfig cfg = load_with_overrides(flags);
  const lfe::LocallyFiniteSpace space = lfe::build_space(cfg.space, cfg.max_points);
  const long samples = space.size() <= 48 ? 0 : cfg.validate_samples;
  const lfe::ValidationReport report = lfe::validate_space(space, samples, cfg.seed);
  std::cout << "space: " << space.size() << " points, " << report.checks
            << " checks, " << report.issues.size() << " issues\n";
  for (const lfe::ValidationIssue& issue : report.issues) {
    std::cout << "  " << issue.kind << " on points";
    for (lfe::PointId id : issue.points) std::cout << ' ' << id;
    std::cout << " (" << issue.lhs << " vs " << issue.rhs << ")\n";
  }
  if (!report.ok()) return lfe::kExitAuditFailed;

  if (cfg.mode == lfe::RunMode::bilipschitz && cfg.space.kind == "lattice") {
    // Cheap chain sanity pass over a short prefix of the synthetic chain.
    lfe::EmbeddedNet net =
        lfe::rescale_min_norm(lfe::make_coordinate_net(space, cfg.space.metric));
    lfe::SyntheticParams params;
    params.length = std::min(cfg.selection.horizon, net.max_band() + 4);
    params.epsilon_scale = cfg.chain.epsilon_scale;
    params.seed = cfg.seed;
    const lfe::ScaleChain chain = lfe::synthetic_chain(net, cfg.chain.kind, params);
    const lfe::ChainCheck check = lfe::validate_chain(chain, net);
    std::cout << "chain: " << chain.length() << " maps, worst lower "
              << check.worst_lower << ", worst upper " << check.worst_upper << ", "
              << check.violations.size() << " violations\n";
    if (!check.ok) return lfe::kExitAuditFailed;
  }
  return lfe::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"glue and audit embeddings of locally finite metric spaces"};
  app.require_subcommand(1);

  CommonFlags embed_flags;
  CLI::App* embed = app.add_subcommand("embed", "run the full pipeline");
  add_common(embed, embed_flags);

  CommonFlags audit_flags;
  std::string maps_path;
  CLI::App* audit = app.add_subcommand("audit", "re-verify a serialized run");
  audit->add_option("--maps", maps_path, "maps.json from a previous run")->required();
  audit->add_option("--out", audit_flags.out_dir, "output directory");
  audit->add_option("--workers", audit_flags.workers, "audit worker threads");

  std::string matrix_path;
  std::string frechet_out;
  CLI::App* frechet = app.add_subcommand("frechet", "embed a distance matrix");
  frechet->add_option("--matrix", matrix_path, "JSON distance matrix")->required();
  frechet->add_option("--out", frechet_out, "output file (default stdout)");

  CommonFlags moduli_flags;
  CLI::App* moduli = app.add_subcommand("moduli", "coarse moduli only");
  add_common(moduli, moduli_flags);

  CommonFlags validate_flags;
  CLI::App* validate = app.add_subcommand("validate", "space and chain checks only");
  add_common(validate, validate_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (embed->parsed()) return cmd_embed(embed_flags);
    if (audit->parsed()) return cmd_audit(maps_path, audit_flags);
    if (frechet->parsed()) return cmd_frechet(matrix_path, frechet_out);
    if (moduli->parsed()) return cmd_moduli(moduli_flags);
    if (validate->parsed()) return cmd_validate(validate_flags);
  } catch (const lfe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return lfe::kExitConfig;
  } catch (const lfe::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lfe::kExitPipeline;
  }
  return lfe::kExitConfig;
}
