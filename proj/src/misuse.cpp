#include <algorithm>
#include <array>

#include "recon/common.hpp"
#include "recon/evaluation.hpp"

namespace recon {
namespace {

constexpr std::array<std::string_view, 20> kFields = {
    "proto",      "state",      "sTtl",       "dTtl",        "Dport",     "Dur",       "SrcPkts",
    "DstPkts",    "SrcBytes",   "DstBytes",   "sMeanPktSz",  "dMeanPktSz", "PCRatio",   "icmp_count",
    "syn_count",  "synack_count", "null_count", "fin_count", "xmas_count", "finack_count"};

bool is_text_field(std::string_view f) { return f == "proto" || f == "state"; }

RuleValue field_value(std::string_view f, const FlowFeatureVector& v, const TemporalFeatureRow& t) {
  if (f == "proto") return std::string(to_string(v.proto));
  if (f == "state") return std::string(to_string(v.state));
  if (f == "sTtl") return v.s_ttl;
  if (f == "dTtl") return v.d_ttl;
  if (f == "Dport") return v.dport;
  if (f == "Dur") return v.dur;
  if (f == "SrcPkts") return v.src_pkts;
  if (f == "DstPkts") return v.dst_pkts;
  if (f == "SrcBytes") return v.src_bytes;
  if (f == "DstBytes") return v.dst_bytes;
  if (f == "sMeanPktSz") return v.s_mean_pkt_sz;
  if (f == "dMeanPktSz") return v.d_mean_pkt_sz;
  if (f == "PCRatio") return v.pc_ratio;
  for (std::size_t s = 0; s < kProbeSignalCount; ++s)
    if (f == counter_name(static_cast<ProbeSignal>(s))) return static_cast<double>(t.counts[s]);
  throw Error(ErrorCode::kBadRule, "unknown rule field '" + std::string(f) + "'");
}

std::string_view op_text(RuleOp op) {
  switch (op) {
    case RuleOp::kGe: return ">=";
    case RuleOp::kGt: return ">";
    case RuleOp::kEq: return "==";
    case RuleOp::kIn: return "in";
  }
  return "?";
}

RuleValue parse_value(const nlohmann::json& v, bool text, const std::string& id) {
  if (text) {
    if (!v.is_string()) throw Error(ErrorCode::kBadRule, "rule '" + id + "': expected a string value");
    return v.get<std::string>();
  }
  if (!v.is_number()) throw Error(ErrorCode::kBadRule, "rule '" + id + "': expected a numeric value");
  return v.get<double>();
}

RuleCondition parse_condition(const nlohmann::json& c, const std::string& id) {
  if (!c.is_object() || !c.contains("field") || !c.contains("op") || !c.contains("value"))
    throw Error(ErrorCode::kBadRule, "rule '" + id + "': condition needs field, op and value");
  if (!c["field"].is_string() || !c["op"].is_string())
    throw Error(ErrorCode::kBadRule, "rule '" + id + "': field and op must be strings");
  RuleCondition out;
  out.field = c["field"].get<std::string>();
  if (std::find(kFields.begin(), kFields.end(), out.field) == kFields.end())
    throw Error(ErrorCode::kBadRule, "rule '" + id + "': unknown field '" + out.field + "'");
  const std::string op = c["op"].get<std::string>();
  if (op == ">=") out.op = RuleOp::kGe;
  else if (op == ">") out.op = RuleOp::kGt;
  else if (op == "==") out.op = RuleOp::kEq;
  else if (op == "in") out.op = RuleOp::kIn;
  else throw Error(ErrorCode::kBadRule, "rule '" + id + "': unknown op '" + op + "'");
  const bool text = is_text_field(out.field);
  if (text && (out.op == RuleOp::kGe || out.op == RuleOp::kGt))
    throw Error(ErrorCode::kBadRule, "rule '" + id + "': ordering op on text field '" + out.field + "'");
  const auto& v = c["value"];
  if (out.op == RuleOp::kIn) {
    if (!v.is_array() || v.empty()) throw Error(ErrorCode::kBadRule, "rule '" + id + "': 'in' needs a non-empty list");
    for (const auto& e : v) out.values.push_back(parse_value(e, text, id));
  } else {
    out.values.push_back(parse_value(v, text, id));
  }
  return out;
}

nlohmann::ordered_json value_json(const RuleValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::get<std::string>(v);
}

nlohmann::ordered_json condition_json(const RuleCondition& c) {
  nlohmann::ordered_json j;
  j["field"] = c.field;
  j["op"] = std::string(op_text(c.op));
  if (c.op == RuleOp::kIn) {
    auto& arr = j["value"] = nlohmann::ordered_json::array();
    for (const auto& v : c.values) arr.push_back(value_json(v));
  } else {
    j["value"] = value_json(c.values.front());
  }
  return j;
}

bool condition_holds(const RuleCondition& c, const RuleValue& actual) {
  switch (c.op) {
    case RuleOp::kGe: return std::get<double>(actual) >= std::get<double>(c.values.front());
    case RuleOp::kGt: return std::get<double>(actual) > std::get<double>(c.values.front());
    case RuleOp::kEq: return actual == c.values.front();
    case RuleOp::kIn: return std::find(c.values.begin(), c.values.end(), actual) != c.values.end();
  }
  return false;
}

}  // namespace

std::span<const std::string_view> misuse_fields() { return kFields; }

std::vector<MisuseRule> parse_rules(const nlohmann::json& doc) {
  if (!doc.is_array()) throw Error(ErrorCode::kBadRule, "ruleset must be a JSON array");
  std::vector<MisuseRule> rules;
  for (const auto& r : doc) {
    if (!r.is_object() || !r.contains("id") || !r["id"].is_string())
      throw Error(ErrorCode::kBadRule, "every rule needs a string id");
    MisuseRule rule;
    rule.id = r["id"].get<std::string>();
    if (r.contains("all")) {
      if (!r["all"].is_array() || r["all"].empty())
        throw Error(ErrorCode::kBadRule, "rule '" + rule.id + "': 'all' must be a non-empty list");
      for (const auto& c : r["all"]) rule.conditions.push_back(parse_condition(c, rule.id));
    } else {
      rule.conditions.push_back(parse_condition(r, rule.id));
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

nlohmann::ordered_json rules_to_json(std::span<const MisuseRule> rules) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& r : rules) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    if (r.conditions.size() == 1) {
      const auto c = condition_json(r.conditions.front());
      for (const auto& [k, v] : c.items()) j[k] = v;
    } else {
      auto& all = j["all"] = nlohmann::ordered_json::array();
      for (const auto& c : r.conditions) all.push_back(condition_json(c));
    }
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<MisuseRule> default_rules() {
  return {
      {"syn-rate", {{"syn_count", RuleOp::kGe, {20.0}}}},
      {"connect-rate", {{"syn_count", RuleOp::kGe, {10.0}}, {"state", RuleOp::kIn, {std::string("RST"), std::string("REQ")}}}},
      {"icmp-sweep", {{"icmp_count", RuleOp::kGe, {10.0}}}},
      {"xmas-packet", {{"xmas_count", RuleOp::kGe, {1.0}}}},
      {"fin-scan", {{"fin_count", RuleOp::kGe, {5.0}}}},
  };
}

bool rule_matches(const MisuseRule& rule, const FlowFeatureVector& flow, const TemporalFeatureRow& temporal) {
  for (const auto& c : rule.conditions)
    if (!condition_holds(c, field_value(c.field, flow, temporal))) return false;
  return true;
}

MisuseResult misuse_detect(std::span<const FlowRecord> flows, std::span<const TemporalFeatureRow> temporal,
                           std::span<const MisuseRule> rules) {
  if (flows.size() != temporal.size())
    throw Error(ErrorCode::kLengthMismatch, "misuse_detect: flows and temporal rows differ in length");
  MisuseResult out;
  out.verdicts.assign(flows.size(), 0);
  for (const auto& r : rules) out.rule_hits.emplace_back(r.id, 0);
  for (std::size_t i = 0; i < flows.size(); ++i) {
    const FlowFeatureVector v = extract_flow_features(flows[i]);
    for (std::size_t k = 0; k < rules.size(); ++k) {
      if (rule_matches(rules[k], v, temporal[i])) {
        ++out.rule_hits[k].second;
        out.verdicts[i] = 1;
      }
    }
  }
  return out;
}

}  // namespace recon
