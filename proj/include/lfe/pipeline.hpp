#pragma once

#include <filesystem>
#include <string>

#include "lfe/config.hpp"
#include "lfe/serialize.hpp"

namespace lfe {

inline constexpr int kExitOk = 0;
inline constexpr int kExitAuditFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPipeline = 3;

struct RunResult {
  int exit_code = kExitOk;
  std::string failed_stage;  // set when exit_code == kExitPipeline
  std::string message;
  bool audits_ok = true;
  json summary;
};

/// Full pipeline: space -> net -> chain -> weak limits -> selection -> glued
/// maps -> path -> audits. Writes summary.json, pairs.csv and maps.json under
/// out_dir. Deterministic for a fixed config: equal runs produce byte-equal
/// files.
RunResult run_experiment(const ExperimentConfig& config,
                         const std::filesystem::path& out_dir);

/// Re-verifies a serialized run from maps.json alone and reproduces the
/// original verdict: certificate inequalities, case bounds, path bounds,
/// distortion, and moduli in coarse mode.
RunResult run_audit_from_file(const std::filesystem::path& maps_json,
                              const std::filesystem::path& out_dir,
                              int workers = 1);

}  // namespace lfe
