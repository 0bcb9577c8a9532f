#include "lfe/serialize.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

#include "lfe/errors.hpp"

namespace lfe {

std::string format_double(double x) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc()) throw Error("format_double failed");
  return std::string(buf.data(), ptr);
}

json to_json(const SparseVector& v) {
  json idx = json::array();
  json val = json::array();
  for (const auto& [k, x] : v.entries()) {
    idx.push_back(k);
    val.push_back(x);
  }
  return json{{"idx", std::move(idx)}, {"val", std::move(val)}};
}

SparseVector vector_from_json(const json& j) {
  if (!j.contains("idx") || !j.contains("val")) {
    throw ConfigError("vector: expected {\"idx\": [...], \"val\": [...]}");
  }
  const auto& idx = j.at("idx");
  const auto& val = j.at("val");
  if (idx.size() != val.size()) throw ConfigError("vector: idx/val length mismatch");
  std::vector<SparseVector::Entry> entries;
  entries.reserve(idx.size());
  SparseVector::Index prev = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto k = idx[i].get<SparseVector::Index>();
    if (i > 0 && k <= prev) throw ConfigError("vector: indices must be strictly increasing");
    prev = k;
    entries.emplace_back(k, val[i].get<double>());
  }
  return SparseVector::from_entries(std::move(entries));
}

json to_json(const NormSpec& ns) {
  if (ns.is_inf()) return json("inf");
  return json(ns.p);
}

NormSpec normspec_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return NormSpec::linf();
    throw ConfigError("p: expected a number or \"inf\", got \"" + s + "\"");
  }
  if (!j.is_number()) throw ConfigError("p: expected a number or \"inf\"");
  const double p = j.get<double>();
  if (!(p >= 1.0)) throw ConfigError("p must be >= 1");
  return NormSpec::lp(p);
}

json to_json(const EmbeddedNet& net) {
  json points = json::object();
  for (const auto& [id, v] : net.points) points[std::to_string(id)] = to_json(v);
  return json{{"p", to_json(net.ns)},
              {"basepoint", net.basepoint},
              {"scale", net.scale},
              {"points", std::move(points)}};
}

EmbeddedNet net_from_json(const json& j) {
  EmbeddedNet net;
  net.ns = normspec_from_json(j.at("p"));
  net.basepoint = j.at("basepoint").get<PointId>();
  net.scale = j.at("scale").get<double>();
  for (const auto& [key, value] : j.at("points").items()) {
    net.points.emplace(std::stoll(key), vector_from_json(value));
  }
  return net;
}

json to_json(const ScaleChain& chain) {
  json maps = json::array();
  for (int i = 1; i <= chain.length(); ++i) {
    json points = json::object();
    for (const auto& [id, v] : chain.maps[static_cast<std::size_t>(i - 1)]) {
      points[std::to_string(id)] = to_json(v);
    }
    maps.push_back(json{{"i", i}, {"points", std::move(points)}});
  }
  return json{{"C", chain.C}, {"p", to_json(chain.ns)}, {"maps", std::move(maps)}};
}

ScaleChain chain_from_json(const json& j) {
  ScaleChain chain;
  chain.C = j.at("C").get<double>();
  chain.ns = normspec_from_json(j.at("p"));
  for (const auto& entry : j.at("maps")) {
    std::map<PointId, SparseVector> map;
    for (const auto& [key, value] : entry.at("points").items()) {
      map.emplace(std::stoll(key), vector_from_json(value));
    }
    chain.maps.push_back(std::move(map));
  }
  return chain;
}

json to_json(const WeakLimitTable& wlt) {
  json m = json::object();
  for (const auto& [id, v] : wlt.m) m[std::to_string(id)] = to_json(v);
  json residuals = json::object();
  for (const auto& [id, r] : wlt.residuals) residuals[std::to_string(id)] = r;
  return json{{"m", std::move(m)},
              {"residuals", std::move(residuals)},
              {"surviving", wlt.surviving},
              {"max_residual", wlt.max_residual},
              {"transient_coords", wlt.transient_coords},
              {"window_truncated", wlt.window_truncated},
              {"lipschitz_ok", wlt.lipschitz_ok}};
}

WeakLimitTable weak_limits_from_json(const json& j) {
  WeakLimitTable wlt;
  for (const auto& [key, value] : j.at("m").items()) {
    wlt.m.emplace(std::stoll(key), vector_from_json(value));
  }
  if (j.contains("residuals")) {
    for (const auto& [key, value] : j.at("residuals").items()) {
      wlt.residuals.emplace(std::stoll(key), value.get<double>());
    }
  }
  wlt.surviving = j.at("surviving").get<std::vector<int>>();
  wlt.max_residual = j.at("max_residual").get<double>();
  wlt.transient_coords = j.at("transient_coords").get<long>();
  wlt.window_truncated = j.at("window_truncated").get<bool>();
  wlt.lipschitz_ok = j.at("lipschitz_ok").get<bool>();
  return wlt;
}

json to_json(const SelectionCertificate& cert) {
  json dev = json::array();
  for (const DevFunctional& df : cert.dev) {
    dev.push_back(json{{"j", df.j},
                       {"a", df.a},
                       {"b", df.b},
                       {"f", to_json(df.f.f)},
                       {"q", to_json(df.f.dual)},
                       {"attained", df.attained},
                       {"later_max", df.later_max}});
  }
  json limit = json::array();
  for (const LimitFunctional& lf : cert.limit) {
    limit.push_back(json{{"a", lf.a},
                         {"b", lf.b},
                         {"f", to_json(lf.f.f)},
                         {"q", to_json(lf.f.dual)},
                         {"attained", lf.attained},
                         {"dev_max", lf.dev_max}});
  }
  return json{{"surviving", cert.surviving},
              {"dev", std::move(dev)},
              {"limit", std::move(limit)}};
}

SelectionCertificate certificate_from_json(const json& j) {
  SelectionCertificate cert;
  cert.surviving = j.at("surviving").get<std::vector<int>>();
  for (const auto& entry : j.at("dev")) {
    DevFunctional df;
    df.j = entry.at("j").get<int>();
    df.a = entry.at("a").get<PointId>();
    df.b = entry.at("b").get<PointId>();
    df.f = DualVector{vector_from_json(entry.at("f")),
                      normspec_from_json(entry.at("q"))};
    df.attained = entry.at("attained").get<double>();
    df.later_max = entry.at("later_max").get<double>();
    cert.dev.push_back(std::move(df));
  }
  for (const auto& entry : j.at("limit")) {
    LimitFunctional lf;
    lf.a = entry.at("a").get<PointId>();
    lf.b = entry.at("b").get<PointId>();
    lf.f = DualVector{vector_from_json(entry.at("f")),
                      normspec_from_json(entry.at("q"))};
    lf.attained = entry.at("attained").get<double>();
    lf.dev_max = entry.at("dev_max").get<double>();
    cert.limit.push_back(std::move(lf));
  }
  return cert;
}

json to_json(const TauPath& tau) {
  json dirs = json::array();
  for (const SparseVector& p : tau.directions) dirs.push_back(to_json(p));
  json breakpoints = json::array();
  double edge = 3.0;
  for (int k = 1; k <= tau.kmax() + 1; ++k) {
    breakpoints.push_back(edge);
    edge *= 3.0;
  }
  return json{{"directions", std::move(dirs)}, {"breakpoints", std::move(breakpoints)}};
}

TauPath tau_from_json(const json& j, const NormSpec& ns) {
  TauPath tau;
  tau.ns = ns;
  for (const auto& entry : j.at("directions")) {
    tau.directions.push_back(vector_from_json(entry));
  }
  if (tau.directions.empty()) throw ConfigError("tau: no directions");
  return tau;
}

json to_json(const AuditConstants& c) {
  return json{{"norming", c.norming},
              {"dev_bound", c.dev_bound},
              {"limit_bound", c.limit_bound},
              {"mdist_threshold", c.mdist_threshold},
              {"subcase_threshold", c.subcase_threshold},
              {"same_limit", c.same_limit},
              {"same_dev", c.same_dev},
              {"same_triangle", c.same_triangle},
              {"norm_term", c.norm_term},
              {"adjacent_coeff", c.adjacent_coeff},
              {"adjacent_middle", c.adjacent_middle},
              {"separated_ratio", c.separated_ratio},
              {"closing_small", c.closing_small},
              {"closing_large", c.closing_large},
              {"adjacent_closing", c.adjacent_closing},
              {"tau_same", c.tau_same},
              {"tau_adjacent", c.tau_adjacent},
              {"tau_separated", c.tau_separated},
              {"slack", c.slack}};
}

AuditConstants constants_from_json(const json& j) {
  AuditConstants c;
  auto get = [&j](const char* key, double& field) {
    if (j.contains(key)) field = j.at(key).get<double>();
  };
  get("norming", c.norming);
  get("dev_bound", c.dev_bound);
  get("limit_bound", c.limit_bound);
  get("mdist_threshold", c.mdist_threshold);
  get("subcase_threshold", c.subcase_threshold);
  get("same_limit", c.same_limit);
  get("same_dev", c.same_dev);
  get("same_triangle", c.same_triangle);
  get("norm_term", c.norm_term);
  get("adjacent_coeff", c.adjacent_coeff);
  get("adjacent_middle", c.adjacent_middle);
  get("separated_ratio", c.separated_ratio);
  get("closing_small", c.closing_small);
  get("closing_large", c.closing_large);
  get("adjacent_closing", c.adjacent_closing);
  get("tau_same", c.tau_same);
  get("tau_adjacent", c.tau_adjacent);
  get("tau_separated", c.tau_separated);
  get("slack", c.slack);
  return c;
}

namespace {

json to_json(const BranchStats& stats) {
  return json{{"count", stats.count},
              {"worst_margin", stats.any ? stats.worst_margin : 0.0}};
}

}  // namespace

json to_json(const CaseSummary& summary) {
  return json{{"pairs", summary.pairs},
              {"same_limit", to_json(summary.same_limit)},
              {"same_deviation", to_json(summary.same_dev)},
              {"same_triangle", to_json(summary.same_triangle)},
              {"adjacent", to_json(summary.adjacent)},
              {"adjacent_middle", to_json(summary.adjacent_middle)},
              {"adjacent_upper_derived", to_json(summary.adjacent_upper_derived)},
              {"separated", to_json(summary.separated)},
              {"separated_measured", to_json(summary.separated_measured)},
              {"basepoint_pairs", summary.basepoint_pairs},
              {"closing_failures", summary.closing_failures},
              {"alt_threshold_flips", summary.alt_threshold_flips},
              {"violations", summary.violations},
              {"ok", summary.ok()}};
}

json to_json(const TauSummary& summary) {
  long same = 0;
  long adjacent = 0;
  long separated = 0;
  double worst_margin = 0.0;
  bool any = false;
  for (const TauPairReport& rep : summary.pairs) {
    switch (rep.branch) {
      case TauBranch::same: ++same; break;
      case TauBranch::adjacent_a:
      case TauBranch::adjacent_b: ++adjacent; break;
      case TauBranch::separated_a:
      case TauBranch::separated_b: ++separated; break;
    }
    worst_margin = any ? std::min(worst_margin, rep.margin) : rep.margin;
    any = true;
  }
  return json{{"pairs", static_cast<long>(summary.pairs.size())},
              {"same", same},
              {"adjacent", adjacent},
              {"separated", separated},
              {"low_pairs", summary.low_pairs},
              {"worst_alpha", summary.worst_alpha},
              {"worst_margin", worst_margin},
              {"violations", summary.violations},
              {"ok", summary.ok()}};
}

json to_json(const DistortionReport& report) {
  return json{{"lip", report.lip},
              {"colip", report.colip},
              {"distortion", report.distortion},
              {"pairs", report.pairs},
              {"worst_lip", {report.worst_lip.first, report.worst_lip.second}},
              {"worst_colip", {report.worst_colip.first, report.worst_colip.second}}};
}

json to_json(const CoarseModuli& moduli) {
  return json{{"bucket_width", moduli.bucket_width},
              {"counts", moduli.counts},
              {"rho1_raw", moduli.rho1_raw},
              {"rho2_raw", moduli.rho2_raw},
              {"rho1_env", moduli.rho1_env},
              {"rho2_env", moduli.rho2_env},
              {"bucket_ordered", moduli.bucket_ordered()},
              {"increasing_run", moduli.increasing_run()}};
}

std::string pair_reports_csv(std::span<const PairReport> reports) {
  std::ostringstream out;
  out << "id_a,id_b,case,branch,band_i,band_k,basepoint,dist,norm_a,norm_b,"
         "m_dist,phi_dist,tilde_dist,bound,margin,middle_norm,envelope_ratio,"
         "closing_lower,alt_flip\n";
  for (const PairReport& rep : reports) {
    out << rep.a << ',' << rep.b << ',' << to_string(rep.label) << ','
        << to_string(rep.branch) << ',' << rep.band_i << ',' << rep.band_k << ','
        << (rep.basepoint_pair ? 1 : 0) << ',' << format_double(rep.dist) << ','
        << format_double(rep.norm_a) << ',' << format_double(rep.norm_b) << ','
        << format_double(rep.m_dist) << ',' << format_double(rep.phi_dist) << ','
        << format_double(rep.tilde_dist) << ',' << format_double(rep.bound) << ','
        << format_double(rep.margin) << ',' << format_double(rep.middle_norm) << ','
        << format_double(rep.envelope_ratio) << ','
        << format_double(rep.closing_lower) << ',' << (rep.alt_threshold_flips ? 1 : 0)
        << '\n';
  }
  return out.str();
}

}  // namespace lfe
