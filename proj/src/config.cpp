#include "lfe/config.hpp"

#include <fstream>

#include "lfe/errors.hpp"
#include "lfe/serialize.hpp"

namespace lfe {

json to_json(const SpaceSpec& spec) {
  json j{{"kind", spec.kind}};
  if (spec.kind == "lattice") {
    j["dim"] = spec.dim;
    j["extent"] = spec.extent;
    j["metric"] = to_json(spec.metric);
  } else if (spec.kind == "tree") {
    j["branching"] = spec.branching;
    j["depth"] = spec.depth;
    j["edge_len"] = spec.edge_len;
  } else if (spec.kind == "points") {
    j["matrix"] = spec.matrix;
    if (spec.delta) j["delta"] = *spec.delta;
    j["basepoint"] = spec.basepoint;
  }
  return j;
}

SpaceSpec space_spec_from_json(const json& j) {
  SpaceSpec spec;
  spec.kind = j.value("kind", std::string("lattice"));
  if (spec.kind == "lattice") {
    spec.dim = j.value("dim", 1);
    spec.extent = j.value("extent", 4);
    if (j.contains("metric")) spec.metric = normspec_from_json(j.at("metric"));
    if (spec.dim < 1) throw ConfigError("space.dim must be >= 1");
    if (spec.extent < 1) throw ConfigError("space.extent must be >= 1");
  } else if (spec.kind == "tree") {
    spec.branching = j.value("branching", 2);
    spec.depth = j.value("depth", 2);
    spec.edge_len = j.value("edge_len", 1.0);
    if (spec.branching < 2) throw ConfigError("space.branching must be >= 2");
    if (spec.depth < 1) throw ConfigError("space.depth must be >= 1");
    if (spec.edge_len <= 0.0) throw ConfigError("space.edge_len must be positive");
  } else if (spec.kind == "points") {
    if (!j.contains("matrix")) throw ConfigError("space.matrix required for points kind");
    spec.matrix = j.at("matrix").get<std::vector<std::vector<double>>>();
    if (j.contains("delta")) spec.delta = j.at("delta").get<double>();
    spec.basepoint = j.value("basepoint", PointId{0});
  } else {
    throw ConfigError("space.kind must be lattice, tree or points");
  }
  return spec;
}

LocallyFiniteSpace build_space(const SpaceSpec& spec, std::size_t max_points) {
  if (spec.kind == "lattice") {
    return make_lattice(spec.dim, spec.metric, spec.extent, max_points);
  }
  if (spec.kind == "tree") {
    return make_tree(spec.branching, spec.depth, spec.edge_len, max_points);
  }
  return make_points(spec.matrix, spec.delta, spec.basepoint, max_points);
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  try {
    if (!doc.contains("space")) throw ConfigError("config: space is required");
    cfg.space = space_spec_from_json(doc.at("space"));
    if (doc.contains("p")) cfg.p = normspec_from_json(doc.at("p"));

    if (doc.contains("chain")) {
      const json& c = doc.at("chain");
      cfg.chain.kind = synthetic_kind_from_string(c.value("kind", std::string("identity")));
      cfg.chain.net_source = c.value("net_source", std::string("auto"));
      if (cfg.chain.net_source != "auto" && cfg.chain.net_source != "coordinate" &&
          cfg.chain.net_source != "frechet_lift") {
        throw ConfigError("chain.net_source must be auto, coordinate or frechet_lift");
      }
      cfg.chain.blocksize = c.value("blocksize", std::uint64_t{0});
      cfg.chain.epsilon_scale = c.value("epsilon_scale", 0.05);
      if (cfg.chain.epsilon_scale <= 0.0) {
        throw ConfigError("chain.epsilon_scale must be positive");
      }
    }

    cfg.imax = doc.value("imax", 0);
    cfg.kmax = doc.value("kmax", 0);
    if (doc.contains("imax") && cfg.imax < 1) throw ConfigError("imax must be >= 1");
    if (doc.contains("kmax") && cfg.kmax < 1) throw ConfigError("kmax must be >= 1");

    if (doc.contains("selection")) {
      const json& s = doc.at("selection");
      cfg.selection.horizon = s.value("horizon", 256);
      cfg.selection.window = s.value("window", 8);
      cfg.selection.tol = s.value("tol", 1e-9);
      cfg.selection.keep = s.value("keep", 0);
      if (cfg.selection.horizon < 1) throw ConfigError("selection.horizon must be >= 1");
      if (cfg.selection.window < 2) throw ConfigError("selection.window must be >= 2");
      if (cfg.selection.tol <= 0.0) throw ConfigError("selection.tol must be positive");
    }

    if (doc.contains("audit")) cfg.consts = constants_from_json(doc.at("audit"));

    if (doc.contains("coarse")) {
      const json& c = doc.at("coarse");
      cfg.coarse.profile = c.value("profile", std::string("sqrt"));
      cfg.coarse.bucket_width = c.value("bucket_width", 0.0);
      cfg.coarse.min_increasing = c.value("min_increasing", 5);
      if (cfg.coarse.profile != "sqrt") {
        throw ConfigError("coarse.profile: only \"sqrt\" is available");
      }
    }

    const std::string mode = doc.value("mode", std::string("bilipschitz"));
    if (mode == "bilipschitz") {
      cfg.mode = RunMode::bilipschitz;
    } else if (mode == "coarse") {
      cfg.mode = RunMode::coarse;
    } else {
      throw ConfigError("mode must be bilipschitz or coarse");
    }

    cfg.seed_given = doc.contains("seed");
    cfg.seed = doc.value("seed", std::uint64_t{1});
    cfg.workers = doc.value("workers", 1);
    if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
    cfg.max_points = doc.value("max_points", kDefaultPointCap);
    cfg.validate_samples = doc.value("validate_samples", 2000L);
    cfg.out_dir = doc.value("out", std::string("out"));

    if (cfg.chain.kind == SyntheticKind::jitter && !cfg.seed_given) {
      throw ConfigError("jitter chains require an explicit seed");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(doc);
}

}  // namespace lfe
