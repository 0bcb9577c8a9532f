#pragma once

#include <string>

#include "json.hpp"
#include "lfe/audit.hpp"
#include "lfe/chain.hpp"
#include "lfe/glue.hpp"

namespace lfe {

using nlohmann::json;

// SparseVector: {"idx": [...], "val": [...]} with strictly increasing indices.
json to_json(const SparseVector& v);
SparseVector vector_from_json(const json& j);

// NormSpec: a number, or the string "inf".
json to_json(const NormSpec& ns);
NormSpec normspec_from_json(const json& j);

json to_json(const EmbeddedNet& net);
EmbeddedNet net_from_json(const json& j);

// {"C": ..., "p": ..., "maps": [{"i": 1, "points": {"<id>": vec, ...}}, ...]}
json to_json(const ScaleChain& chain);
ScaleChain chain_from_json(const json& j);

json to_json(const WeakLimitTable& wlt);
WeakLimitTable weak_limits_from_json(const json& j);

json to_json(const SelectionCertificate& cert);
SelectionCertificate certificate_from_json(const json& j);

json to_json(const TauPath& tau);
// Directions and breakpoints only; span sets are rebuilt from the glued map
// during re-verification.
TauPath tau_from_json(const json& j, const NormSpec& ns);

json to_json(const AuditConstants& consts);
AuditConstants constants_from_json(const json& j);

json to_json(const CaseSummary& summary);
json to_json(const TauSummary& summary);
json to_json(const DistortionReport& report);
json to_json(const CoarseModuli& moduli);

/// One CSV row per pair: ids, case, branch, bands, measured values, bound,
/// margin. Doubles use shortest round-trip formatting, so equal runs produce
/// byte-identical files.
std::string pair_reports_csv(std::span<const PairReport> reports);

std::string format_double(double x);

}  // namespace lfe
