#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lfe/audit.hpp"
#include "lfe/chain.hpp"

namespace lfe {

using nlohmann::json;

struct SpaceSpec {
  std::string kind = "lattice";  // lattice | tree | points
  // lattice
  int dim = 1;
  int extent = 4;
  NormSpec metric = NormSpec::l2();
  // tree
  int branching = 2;
  int depth = 2;
  double edge_len = 1.0;
  // points
  std::vector<std::vector<double>> matrix;
  std::optional<double> delta;
  PointId basepoint = 0;
};

struct ChainSpec {
  SyntheticKind kind = SyntheticKind::identity;
  std::string net_source = "auto";  // auto | coordinate | frechet_lift
  SparseVector::Index blocksize = 0;
  double epsilon_scale = 0.05;
};

struct SelectionSpec {
  int horizon = 256;
  int window = 8;
  double tol = 1e-9;
  int keep = 0;  // 0 = auto
};

struct CoarseSpec {
  std::string profile = "sqrt";
  double bucket_width = 0.0;  // 0 = auto: diameter / 16
  int min_increasing = 5;
};

enum class RunMode { bilipschitz, coarse };

struct ExperimentConfig {
  SpaceSpec space;
  NormSpec p = NormSpec::l2();
  ChainSpec chain;
  int imax = 0;  // 0 = smallest range covering the space
  int kmax = 0;  // 0 = smallest range covering the net radii
  SelectionSpec selection;
  CoarseSpec coarse;
  AuditConstants consts;
  RunMode mode = RunMode::bilipschitz;
  std::uint64_t seed = 1;
  bool seed_given = false;
  int workers = 1;
  std::size_t max_points = kDefaultPointCap;
  long validate_samples = 2000;
  std::string out_dir = "out";
};

/// Parses and validates a config document; throws ConfigError with the
/// offending field. Flags parsed by the CLI (out, seed, workers, mode)
/// override the corresponding fields afterwards.
ExperimentConfig parse_config(const json& doc);
ExperimentConfig load_config(const std::string& path);

json to_json(const SpaceSpec& spec);
SpaceSpec space_spec_from_json(const json& j);

LocallyFiniteSpace build_space(const SpaceSpec& spec, std::size_t max_points);

}  // namespace lfe
