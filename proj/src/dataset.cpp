#include "recon/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "recon/csv.hpp"
#include "recon/rng.hpp"

namespace recon {
namespace {

RowKey row_key(const FlowRecord& f) { return RowKey{f.start_ts, f.key}; }

Cell opt_cell(const std::optional<double>& v) { return v ? Cell::observed(*v) : Cell::structural(); }

Column numeric(std::string name, Origin origin) { return Column{std::move(name), ColumnKind::kNumeric, origin, {}, {}}; }

}  // namespace

// ---------------------------------------------------------------------------
// Feature sets

FeatureTable build_flow_set(std::span<const FlowRecord> flows) {
  FeatureTable t({
      Column{"proto", ColumnKind::kCategorical, Origin::kFlow, {}, {}},
      Column{"state", ColumnKind::kCategorical, Origin::kFlow, {}, {}},
      numeric("sTtl", Origin::kFlow),
      numeric("dTtl", Origin::kFlow),
      numeric("Dport", Origin::kFlow),
      numeric("Dur", Origin::kFlow),
      numeric("SrcPkts", Origin::kFlow),
      numeric("DstPkts", Origin::kFlow),
      numeric("SrcBytes", Origin::kFlow),
      numeric("DstBytes", Origin::kFlow),
      numeric("sMeanPktSz", Origin::kFlow),
      numeric("dMeanPktSz", Origin::kFlow),
      numeric("PCRatio", Origin::kFlow),
  });
  for (const auto& f : flows) {
    const FlowFeatureVector v = extract_flow_features(f);
    t.add_row(row_key(f), {
                              Cell::observed(t.level_index(0, to_string(v.proto))),
                              Cell::observed(t.level_index(1, to_string(v.state))),
                              Cell::observed(v.s_ttl),
                              Cell::observed(v.d_ttl),
                              Cell::observed(v.dport),
                              Cell::observed(v.dur),
                              Cell::observed(v.src_pkts),
                              Cell::observed(v.dst_pkts),
                              Cell::observed(v.src_bytes),
                              Cell::observed(v.dst_bytes),
                              Cell::observed(v.s_mean_pkt_sz),
                              Cell::observed(v.d_mean_pkt_sz),
                              Cell::observed(v.pc_ratio),
                          });
  }
  return t;
}

FeatureTable build_session_set(std::span<const FlowRecord> flows) {
  FeatureTable t({
      numeric("mss_requested_a2b", Origin::kFlow),
      numeric("DstTCPBase", Origin::kFlow),
      numeric("min_segm_size_a2b", Origin::kFlow),
      numeric("max_segm_size_a2b", Origin::kFlow),
      numeric("idletime_max_a2b", Origin::kFlow),
      numeric("FIN_pkts_a2b", Origin::kFlow),
      numeric("adv_wind_scale_a2b", Origin::kFlow),
  });
  for (const auto& f : flows) {
    if (f.key.proto != Protocol::kTcp) continue;
    const FlowFeatureVector v = extract_flow_features(f);
    t.add_row(row_key(f), {opt_cell(v.mss_requested_a2b), opt_cell(v.dst_tcp_base), opt_cell(v.min_segm_size_a2b),
                           opt_cell(v.max_segm_size_a2b), opt_cell(v.idletime_max_a2b), opt_cell(v.fin_pkts_a2b),
                           opt_cell(v.adv_wind_scale_a2b)});
  }
  return t;
}

FeatureTable build_temporal_set(std::span<const FlowRecord> flows, std::span<const TemporalFeatureRow> rows) {
  if (flows.size() != rows.size())
    throw Error(ErrorCode::kLengthMismatch, "temporal rows do not match flows one-to-one");
  std::vector<Column> cols;
  for (std::size_t s = 0; s < kProbeSignalCount; ++s)
    cols.push_back(numeric(std::string(counter_name(static_cast<ProbeSignal>(s))), Origin::kTemporal));
  FeatureTable t(std::move(cols));
  for (std::size_t i = 0; i < flows.size(); ++i) {
    std::vector<Cell> cells;
    for (auto c : rows[i].counts) cells.push_back(Cell::observed(c));
    t.add_row(row_key(flows[i]), std::move(cells));
  }
  return t;
}

FeatureTable merge_feature_sets(const FeatureTable& anchor, std::span<const JoinPart> parts) {
  auto index_of = [](const FeatureTable& t, std::size_t which) {
    std::map<RowKey, std::size_t> idx;
    for (std::size_t r = 0; r < t.num_rows(); ++r) {
      if (!idx.emplace(t.key(r), r).second)
        throw Error(ErrorCode::kDuplicateKey, "feature set " + std::to_string(which) + " repeats key at row " +
                                                  std::to_string(r));
    }
    return idx;
  };
  index_of(anchor, 0);
  std::vector<std::map<RowKey, std::size_t>> indices;
  for (std::size_t p = 0; p < parts.size(); ++p) indices.push_back(index_of(*parts[p].table, p + 1));

  std::vector<Column> columns = anchor.columns();
  std::set<std::string> names;
  for (const auto& c : columns) names.insert(c.name);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (Column c : parts[p].table->columns()) {
      if (names.count(c.name)) c.name += "_" + std::to_string(p + 1);
      names.insert(c.name);
      columns.push_back(std::move(c));
    }
  }
  FeatureTable out(std::move(columns));
  std::vector<int> labels;
  for (std::size_t r = 0; r < anchor.num_rows(); ++r) {
    std::vector<Cell> cells = anchor.row(r);
    bool keep = true;
    for (std::size_t p = 0; p < parts.size() && keep; ++p) {
      const FeatureTable& part = *parts[p].table;
      const auto it = indices[p].find(anchor.key(r));
      if (it != indices[p].end()) {
        const auto& src = part.row(it->second);
        cells.insert(cells.end(), src.begin(), src.end());
      } else if (parts[p].coverage == Coverage::kTcpOnly && anchor.key(r).flow.proto != Protocol::kTcp) {
        cells.insert(cells.end(), part.num_columns(), Cell::structural());
      } else {
        keep = false;
      }
    }
    if (!keep) continue;
    out.add_row(anchor.key(r), std::move(cells));
    if (anchor.has_labels()) labels.push_back(anchor.labels()[r]);
  }
  if (anchor.has_labels()) out.set_labels(std::move(labels));
  return out;
}

FeatureTable merge_feature_sets(const FeatureTable& flow_set, const FeatureTable& session_set,
                                const FeatureTable& temporal_set) {
  const JoinPart parts[] = {{&session_set, Coverage::kTcpOnly}, {&temporal_set, Coverage::kAll}};
  return merge_feature_sets(flow_set, parts);
}

// ---------------------------------------------------------------------------
// Preprocessing

std::string_view to_string(DropReason r) {
  switch (r) {
    case DropReason::kRepeating: return "repeating";
    case DropReason::kNoVariation: return "no-variation";
    case DropReason::kEmpty: return "empty";
  }
  return "?";
}

DropResult drop_uninformative(const FeatureTable& table, DropConfig config) {
  if (table.num_rows() == 0) throw Error(ErrorCode::kInvalidArgument, "cannot judge columns of an empty table");
  const std::size_t rows = table.num_rows();
  DropResult result;
  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c < table.num_columns(); ++c) {
    const std::string& name = table.column(c).name;
    std::size_t missing = 0;
    for (std::size_t r = 0; r < rows; ++r) missing += table.cell(r, c).is_missing();
    if (static_cast<double>(missing) > config.max_missing_fraction * static_cast<double>(rows)) {
      result.report.dropped.push_back({name, DropReason::kEmpty, {}});
      continue;
    }
    std::optional<Cell> first;
    bool varies = false;
    for (std::size_t r = 0; r < rows && !varies; ++r) {
      const Cell& cell = table.cell(r, c);
      if (cell.missing == Missing::kPlausible) continue;
      if (!first) {
        first = cell;
      } else if (!(cell == *first)) {
        varies = true;
      }
    }
    if (!varies) {
      result.report.dropped.push_back({name, DropReason::kNoVariation, {}});
      continue;
    }
    std::optional<std::size_t> twin;
    for (const std::size_t k : kept) {
      bool same = true;
      for (std::size_t r = 0; r < rows && same; ++r) {
        const Cell& a = table.cell(r, c);
        const Cell& b = table.cell(r, k);
        same = a.missing == b.missing && (a.is_missing() || table.format_cell(r, c) == table.format_cell(r, k));
      }
      if (same) {
        twin = k;
        break;
      }
    }
    if (twin) {
      result.report.dropped.push_back({name, DropReason::kRepeating, table.column(*twin).name});
      continue;
    }
    kept.push_back(c);
  }
  if (kept.empty()) throw Error(ErrorCode::kAllDropped, "no column survived the uninformative-column filter");
  result.table = table.select_columns(kept);
  return result;
}

FeatureTable one_hot_encode(const FeatureTable& table) {
  struct Plan {
    std::size_t source;
    std::vector<std::size_t> levels;  // level indices, lexicographic by name
  };
  std::vector<Column> columns;
  std::vector<Plan> plans;
  for (std::size_t c = 0; c < table.num_columns(); ++c) {
    const Column& col = table.column(c);
    if (col.kind != ColumnKind::kCategorical) {
      columns.push_back(col);
      plans.push_back({c, {}});
      continue;
    }
    std::set<std::size_t> seen;
    for (std::size_t r = 0; r < table.num_rows(); ++r)
      if (!table.cell(r, c).is_missing()) seen.insert(static_cast<std::size_t>(table.cell(r, c).value));
    std::vector<std::size_t> order(seen.begin(), seen.end());
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return col.levels[a] < col.levels[b]; });
    for (auto level : order)
      columns.push_back(Column{col.name + "_" + col.levels[level], ColumnKind::kBinary, col.origin, {}, col.name});
    plans.push_back({c, std::move(order)});
  }
  FeatureTable out(std::move(columns));
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    std::vector<Cell> cells;
    cells.reserve(out.num_columns());
    for (std::size_t p = 0; p < plans.size(); ++p) {
      const Cell& src = table.cell(r, plans[p].source);
      if (table.column(plans[p].source).kind != ColumnKind::kCategorical) {
        cells.push_back(src);
        continue;
      }
      for (auto level : plans[p].levels) {
        if (src.is_missing()) {
          cells.push_back(Cell{0.0, src.missing});
        } else {
          cells.push_back(Cell::observed(static_cast<std::size_t>(src.value) == level ? 1.0 : 0.0));
        }
      }
    }
    out.add_row(table.key(r), std::move(cells));
  }
  if (table.has_labels()) out.set_labels(table.labels());
  return out;
}

ImputeStats fit_impute(const FeatureTable& train, ImputePolicy policy) {
  ImputeStats stats;
  stats.policy = policy;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::map<std::string, std::pair<std::size_t, double>> group_mode;  // group -> (column, count)
  for (std::size_t c = 0; c < train.num_columns(); ++c) {
    const Column& col = train.column(c);
    stats.columns.push_back(col.name);
    std::vector<double> observed;
    for (std::size_t r = 0; r < train.num_rows(); ++r)
      if (!train.cell(r, c).is_missing()) observed.push_back(train.cell(r, c).value);
    if (observed.empty()) {
      stats.fill.push_back(nan);
      continue;
    }
    if (col.kind == ColumnKind::kNumeric) {
      if (policy.numeric == NumericFill::kMean) {
        double sum = 0.0;
        for (double v : observed) sum += v;
        stats.fill.push_back(sum / static_cast<double>(observed.size()));
      } else {
        std::sort(observed.begin(), observed.end());
        const std::size_t n = observed.size();
        stats.fill.push_back(n % 2 ? observed[n / 2] : 0.5 * (observed[n / 2 - 1] + observed[n / 2]));
      }
      continue;
    }
    // Categorical and binary: mode, ties toward the smaller value.
    std::map<double, std::size_t> counts;
    for (double v : observed) ++counts[v];
    double mode = counts.begin()->first;
    std::size_t best = 0;
    for (auto [v, n] : counts) {
      if (n > best) {
        best = n;
        mode = v;
      }
    }
    stats.fill.push_back(mode);
    if (col.kind == ColumnKind::kBinary && !col.group.empty()) {
      const std::size_t ones = counts.count(1.0) ? counts[1.0] : 0;
      auto [it, inserted] = group_mode.emplace(col.group, std::make_pair(c, ones));
      if (!inserted && ones > it->second.second) it->second = {c, ones};
    }
  }
  // A one-hot group imputes as a unit: its modal level gets 1, the rest 0.
  for (std::size_t c = 0; c < train.num_columns(); ++c) {
    const Column& col = train.column(c);
    if (col.kind != ColumnKind::kBinary || col.group.empty()) continue;
    stats.fill[c] = group_mode.at(col.group).first == c ? 1.0 : 0.0;
  }
  return stats;
}

FeatureTable apply_impute(const FeatureTable& table, const ImputeStats& stats) {
  if (stats.columns.size() != table.num_columns())
    throw Error(ErrorCode::kSchemaMismatch, "imputation statistics were fitted on a different schema");
  for (std::size_t c = 0; c < table.num_columns(); ++c)
    if (stats.columns[c] != table.column(c).name)
      throw Error(ErrorCode::kSchemaMismatch, "imputation column mismatch at '" + table.column(c).name + "'");

  FeatureTable out(table.columns());
  std::optional<double> structural_level;
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    std::vector<Cell> cells = table.row(r);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      Cell& cell = cells[c];
      if (cell.missing == Missing::kStructural) {
        cell = out.column(c).kind == ColumnKind::kCategorical ? Cell::observed(out.level_index(c, "-"))
                                                               : Cell::observed(stats.policy.structural_sentinel);
      } else if (cell.missing == Missing::kPlausible) {
        if (std::isnan(stats.fill[c]))
          throw Error(ErrorCode::kNoObservedValues, "column '" + table.column(c).name + "' has no observed values");
        cell = Cell::observed(stats.fill[c]);
      }
    }
    out.add_row(table.key(r), std::move(cells));
  }
  if (table.has_labels()) out.set_labels(table.labels());
  return out;
}

FeatureTable impute(const FeatureTable& table, ImputePolicy policy) {
  return apply_impute(table, fit_impute(table, policy));
}

// ---------------------------------------------------------------------------
// Labels

std::string_view to_string(LabelSource s) {
  switch (s) {
    case LabelSource::kRuleEngine: return "rule_engine";
    case LabelSource::kSignatureIds: return "signature_ids";
    case LabelSource::kExpertGroundTruth: return "expert_ground_truth";
  }
  return "?";
}

CombinedLabels combine_labels(std::span<const LabelSet> sets) {
  std::vector<const LabelSet*> available;
  for (const auto& s : sets)
    if (!s.verdicts.empty()) available.push_back(&s);
  if (available.empty()) throw Error(ErrorCode::kCoverageMismatch, "no label source provided any verdicts");
  const std::size_t n = available.front()->verdicts.size();
  for (const auto* s : available)
    if (s->verdicts.size() != n)
      throw Error(ErrorCode::kCoverageMismatch, std::string(to_string(s->source)) + " covers " +
                                                    std::to_string(s->verdicts.size()) + " rows, expected " +
                                                    std::to_string(n));

  CombinedLabels out;
  out.labels.assign(n, 0);
  out.report.rows = n;
  for (const auto* s : available) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (s->verdicts[i] != 0 && s->verdicts[i] != 1)
        throw Error(ErrorCode::kInvalidArgument, "label verdicts must be 0 or 1");
      pos += s->verdicts[i];
      out.labels[i] |= s->verdicts[i];
    }
    out.report.positives.emplace_back(s->source, pos);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto* s : available) {
      if (s->verdicts[i] != available.front()->verdicts[i]) {
        ++out.report.disagreements;
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split

SplitResult split(const FeatureTable& table, SplitConfig config) {
  if (config.train < 0 || config.val < 0 || config.test < 0 ||
      std::abs(config.train + config.val + config.test - 1.0) > 1e-9)
    throw Error(ErrorCode::kInvalidArgument, "split ratios must be non-negative and sum to 1");
  const auto& y = table.labels();
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t r = 0; r < y.size(); ++r) by_class[y[r]].push_back(r);
  for (int c = 0; c < 2; ++c)
    if (by_class[c].size() < 3)
      throw Error(ErrorCode::kClassTooSmall, "class " + std::to_string(c) + " has " +
                                                 std::to_string(by_class[c].size()) + " rows (need >= 3)");

  SplitResult out;
  auto deal = [&](std::vector<std::size_t> rows, std::uint64_t stream) {
    Rng rng(derive_seed(config.seed, stream));
    rng.shuffle(std::span(rows));
    const std::size_t n = rows.size();
    const auto n_train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(config.train * n)));
    const auto n_val = std::min<std::size_t>(n - n_train, static_cast<std::size_t>(std::llround(config.val * n)));
    out.train_rows.insert(out.train_rows.end(), rows.begin(), rows.begin() + n_train);
    out.val_rows.insert(out.val_rows.end(), rows.begin() + n_train, rows.begin() + n_train + n_val);
    out.test_rows.insert(out.test_rows.end(), rows.begin() + n_train + n_val, rows.end());
  };
  if (config.stratified) {
    deal(by_class[0], 0);
    deal(by_class[1], 1);
  } else {
    std::vector<std::size_t> all(y.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    deal(std::move(all), 2);
  }
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.val_rows.begin(), out.val_rows.end());
  std::sort(out.test_rows.begin(), out.test_rows.end());
  out.train = table.select_rows(out.train_rows);
  out.val = table.select_rows(out.val_rows);
  out.test = table.select_rows(out.test_rows);
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

const char* const kIndexColumns[] = {"start_ts", "src_ip", "dst_ip", "src_port", "dst_port", "proto"};
constexpr std::string_view kMissingSuffix = "__missing";

std::string escape_level(std::string_view s) {
  std::string out;
  for (char ch : s) {
    if (ch == '%' || ch == ';' || ch == '|') {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", static_cast<unsigned char>(ch));
      out += buf;
    } else {
      out.push_back(ch);
    }
  }
  return out;
}

std::string unescape_level(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size()) return std::nullopt;
  return v;
}

std::string format_ts(Timestamp ts) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%lld.%06lld", static_cast<long long>(ts.sec()), static_cast<long long>(ts.usec()));
  return buf;
}

Timestamp parse_ts(std::string_view s) {
  const auto dot = s.find('.');
  std::int64_t sec = 0, usec = 0;
  const auto int_part = s.substr(0, dot);
  if (std::from_chars(int_part.data(), int_part.data() + int_part.size(), sec).ec != std::errc{})
    throw Error(ErrorCode::kSchemaMismatch, "bad start_ts '" + std::string(s) + "'");
  if (dot != std::string_view::npos) {
    std::string frac(s.substr(dot + 1));
    if (frac.size() > 6 || frac.find_first_not_of("0123456789") != std::string::npos)
      throw Error(ErrorCode::kSchemaMismatch, "bad start_ts '" + std::string(s) + "'");
    frac.resize(6, '0');
    usec = std::stoll(frac);
  }
  return Timestamp::from_parts(sec, usec);
}

std::uint16_t parse_port(std::string_view s) {
  unsigned v = 0;
  if (s.starts_with("0x") || s.starts_with("0X")) {
    if (std::from_chars(s.data() + 2, s.data() + s.size(), v, 16).ec != std::errc{} || v > 0xFFFF)
      throw Error(ErrorCode::kSchemaMismatch, "bad port '" + std::string(s) + "'");
  } else if (std::from_chars(s.data(), s.data() + s.size(), v).ec != std::errc{} || v > 0xFFFF) {
    throw Error(ErrorCode::kSchemaMismatch, "bad port '" + std::string(s) + "'");
  }
  return static_cast<std::uint16_t>(v);
}

}  // namespace

void to_csv(const FeatureTable& table, std::ostream& out) {
  csv::Record header(std::begin(kIndexColumns), std::end(kIndexColumns));
  std::vector<std::size_t> sidecars;
  for (std::size_t c = 0; c < table.num_columns(); ++c) {
    const Column& col = table.column(c);
    std::string levels;
    for (std::size_t i = 0; i < col.levels.size(); ++i) levels += (i ? ";" : "") + escape_level(col.levels[i]);
    header.push_back(col.name + "|" + std::string(to_string(col.kind)) + "|" + std::string(to_string(col.origin)) +
                     "|" + col.group + "|" + levels);
    for (std::size_t r = 0; r < table.num_rows(); ++r) {
      if (table.cell(r, c).is_missing()) {
        sidecars.push_back(c);
        break;
      }
    }
  }
  if (table.has_labels()) header.push_back("label");
  for (auto c : sidecars) header.push_back(table.column(c).name + std::string(kMissingSuffix));
  csv::write_record(out, header);

  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    const RowKey& k = table.key(r);
    csv::Record rec = {format_ts(k.start_ts),
                       k.flow.initiator_ip.to_string(),
                       k.flow.responder_ip.to_string(),
                       std::to_string(k.flow.initiator_port),
                       std::to_string(k.flow.responder_port),
                       std::string(to_string(k.flow.proto))};
    for (std::size_t c = 0; c < table.num_columns(); ++c) rec.push_back(table.format_cell(r, c));
    if (table.has_labels()) rec.push_back(std::to_string(table.labels()[r]));
    for (auto c : sidecars) {
      const Missing m = table.cell(r, c).missing;
      rec.emplace_back(m == Missing::kPlausible ? "P" : m == Missing::kStructural ? "S" : "");
    }
    csv::write_record(out, rec);
  }
}

std::string to_csv(const FeatureTable& table) {
  std::ostringstream out;
  to_csv(table, out);
  return out.str();
}

FeatureTable from_csv_text(std::string_view text) {
  const auto records = csv::parse(text);
  if (records.empty()) throw Error(ErrorCode::kSchemaMismatch, "CSV has no header row");
  const csv::Record& header = records.front();

  std::array<std::optional<std::size_t>, 6> index_at;
  std::optional<std::size_t> label_at;
  struct FeatureSpec {
    std::size_t at;
    Column column;
    bool typed;
    std::optional<std::size_t> sidecar;
  };
  std::vector<FeatureSpec> features;
  std::vector<std::pair<std::string, std::size_t>> sidecars;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& h = header[i];
    bool is_index = false;
    for (std::size_t k = 0; k < 6; ++k) {
      if (h == kIndexColumns[k]) {
        index_at[k] = i;
        is_index = true;
      }
    }
    if (is_index) continue;
    if (h == "label") {
      label_at = i;
    } else if (h.size() > kMissingSuffix.size() && h.ends_with(kMissingSuffix)) {
      sidecars.emplace_back(h.substr(0, h.size() - kMissingSuffix.size()), i);
    } else {
      const auto parts = split_on(h, '|');
      FeatureSpec spec{i, Column{parts[0], ColumnKind::kNumeric, Origin::kExternal, {}, {}}, parts.size() > 1, {}};
      if (spec.typed) {
        if (parts.size() != 5) throw Error(ErrorCode::kSchemaMismatch, "malformed column header '" + h + "'");
        spec.column.kind = parse_column_kind(parts[1]);
        spec.column.origin = parse_origin(parts[2]);
        spec.column.group = parts[3];
        if (!parts[4].empty())
          for (const auto& level : split_on(parts[4], ';')) spec.column.levels.push_back(unescape_level(level));
      }
      features.push_back(std::move(spec));
    }
  }
  for (const auto& [name, at] : sidecars) {
    auto it = std::find_if(features.begin(), features.end(), [&](const auto& f) { return f.column.name == name; });
    if (it == features.end()) throw Error(ErrorCode::kSchemaMismatch, "sidecar for unknown column '" + name + "'");
    it->sidecar = at;
  }
  const bool has_index = std::all_of(index_at.begin(), index_at.end(), [](auto& v) { return v.has_value(); });

  for (std::size_t r = 1; r < records.size(); ++r)
    if (records[r].size() != header.size())
      throw Error(ErrorCode::kRaggedRow, "row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                                             " fields, header has " + std::to_string(header.size()));

  // Untyped columns: numeric if every non-empty value parses, else categorical.
  for (auto& f : features) {
    if (f.typed) continue;
    for (std::size_t r = 1; r < records.size(); ++r) {
      const auto& v = records[r][f.at];
      if (!v.empty() && !parse_double(v)) {
        f.column.kind = ColumnKind::kCategorical;
        break;
      }
    }
  }

  std::vector<Column> columns;
  for (const auto& f : features) columns.push_back(f.column);
  FeatureTable table(std::move(columns));
  std::vector<int> labels;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    RowKey key;
    if (has_index) {
      key.start_ts = parse_ts(rec[*index_at[0]]);
      key.flow.initiator_ip = Ipv4::parse(rec[*index_at[1]]);
      key.flow.responder_ip = Ipv4::parse(rec[*index_at[2]]);
      key.flow.initiator_port = parse_port(rec[*index_at[3]]);
      key.flow.responder_port = parse_port(rec[*index_at[4]]);
      key.flow.proto = parse_protocol(rec[*index_at[5]]);
    } else {
      key.start_ts = Timestamp{static_cast<std::int64_t>(r - 1)};
    }
    std::vector<Cell> cells;
    for (std::size_t j = 0; j < features.size(); ++j) {
      const auto& f = features[j];
      const std::string& v = rec[f.at];
      Missing m = Missing::kNone;
      if (f.sidecar) {
        const std::string& s = rec[*f.sidecar];
        if (s == "P") m = Missing::kPlausible;
        else if (s == "S") m = Missing::kStructural;
        else if (!s.empty()) throw Error(ErrorCode::kSchemaMismatch, "bad missing marker '" + s + "'");
      }
      if (m == Missing::kNone && v.empty()) m = Missing::kPlausible;
      if (m != Missing::kNone) {
        cells.push_back(Cell{0.0, m});
        continue;
      }
      if (f.column.kind == ColumnKind::kCategorical) {
        if (f.typed) {
          const auto& levels = table.column(j).levels;
          const auto it = std::find(levels.begin(), levels.end(), v);
          if (it == levels.end())
            throw Error(ErrorCode::kSchemaMismatch, "value '" + v + "' not in levels of '" + f.column.name + "'");
          cells.push_back(Cell::observed(static_cast<double>(it - levels.begin())));
        } else {
          cells.push_back(Cell::observed(table.level_index(j, v)));
        }
      } else {
        const auto d = parse_double(v);
        if (!d) throw Error(ErrorCode::kSchemaMismatch, "non-numeric value '" + v + "' in '" + f.column.name + "'");
        cells.push_back(Cell::observed(*d));
      }
    }
    table.add_row(key, std::move(cells));
    if (label_at) {
      const std::string& l = rec[*label_at];
      if (l != "0" && l != "1") throw Error(ErrorCode::kSchemaMismatch, "label must be 0 or 1, got '" + l + "'");
      labels.push_back(l == "1");
    }
  }
  if (label_at) table.set_labels(std::move(labels));
  return table;
}

FeatureTable from_csv(std::istream& in) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_csv_text(text);
}

// ---------------------------------------------------------------------------
// UNSW-NB15

namespace {

const char* const kUnswColumns[] = {
    "srcip",       "sport",       "dstip",        "dsport",        "proto",           "state",
    "dur",         "sbytes",      "dbytes",       "sttl",          "dttl",            "sloss",
    "dloss",       "service",     "Sload",        "Dload",         "Spkts",           "Dpkts",
    "swin",        "dwin",        "stcpb",        "dtcpb",         "smeansz",         "dmeansz",
    "trans_depth", "res_bdy_len", "Sjit",         "Djit",          "Stime",           "Ltime",
    "Sintpkt",     "Dintpkt",     "tcprtt",       "synack",        "ackdat",          "is_sm_ips_ports",
    "ct_state_ttl", "ct_flw_http_mthd", "is_ftp_login", "ct_ftp_cmd", "ct_srv_src",    "ct_srv_dst",
    "ct_dst_ltm",  "ct_src_ltm",  "ct_src_dport_ltm", "ct_dst_sport_ltm", "ct_dst_src_ltm", "attack_cat",
    "Label"};

const char* const kUnswRequired[] = {"ct_dst_sport_ltm", "ct_state_ttl", "smeansz", "dmeansz", "ackdat",
                                     "state",            "Dload",        "service", "dsport",  "ct_ftp_cmd",
                                     "dTtl",             "proto",        "Spkts",   "attack_cat"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

FeatureTable load_unsw_csv(std::istream& in) {
  auto records = csv::read(in);
  if (records.empty()) throw Error(ErrorCode::kMissingColumn, "UNSW CSV is empty");
  std::vector<std::string> names;
  std::size_t first_data = 0;
  const bool has_header = std::any_of(records[0].begin(), records[0].end(),
                                      [](const std::string& h) { return lower(trim(h)) == "attack_cat"; });
  if (has_header) {
    for (const auto& h : records[0]) names.push_back(trim(h));
    first_data = 1;
  } else if (records[0].size() == std::size(kUnswColumns)) {
    names.assign(std::begin(kUnswColumns), std::end(kUnswColumns));
  } else {
    throw Error(ErrorCode::kMissingColumn, "UNSW CSV has no header and is not the 49-column release");
  }
  auto find = [&](std::string_view name) -> std::optional<std::size_t> {
    const std::string key = lower(name);
    for (std::size_t i = 0; i < names.size(); ++i)
      if (lower(names[i]) == key) return i;
    return std::nullopt;
  };
  for (const char* req : kUnswRequired)
    if (!find(req)) throw Error(ErrorCode::kMissingColumn, std::string("UNSW CSV lacks column '") + req + "'");

  const std::size_t cat_at = *find("attack_cat");
  const auto srcip_at = find("srcip"), dstip_at = find("dstip"), sport_at = find("sport"), stime_at = find("stime");
  const std::set<std::string> categorical = {"proto", "state", "service"};
  const std::set<std::string> skipped = {"srcip", "dstip", "attack_cat", "label", "id", "stime"};

  std::vector<std::size_t> feature_at;
  std::vector<Column> columns;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string key = lower(names[i]);
    if (skipped.count(key)) continue;
    feature_at.push_back(i);
    columns.push_back(Column{names[i], categorical.count(key) ? ColumnKind::kCategorical : ColumnKind::kNumeric,
                             Origin::kExternal, {}, {}});
  }
  FeatureTable table(std::move(columns));
  std::vector<int> labels;
  for (std::size_t r = first_data; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() == 1 && rec[0].empty()) continue;
    if (rec.size() != names.size())
      throw Error(ErrorCode::kRaggedRow, "UNSW row " + std::to_string(r) + " has " + std::to_string(rec.size()) +
                                             " fields");
    RowKey key;
    key.start_ts = Timestamp{static_cast<std::int64_t>(r)};
    try {
      if (stime_at) key.start_ts = Timestamp::from_seconds(std::stod(rec[*stime_at]));
      if (srcip_at) key.flow.initiator_ip = Ipv4::parse(trim(rec[*srcip_at]));
      if (dstip_at) key.flow.responder_ip = Ipv4::parse(trim(rec[*dstip_at]));
      if (sport_at) key.flow.initiator_port = parse_port(trim(rec[*sport_at]));
      key.flow.responder_port = parse_port(trim(rec[*find("dsport")]));
    } catch (const std::exception&) {
      // Index fields are identity only; malformed ones fall back to defaults.
    }
    std::vector<Cell> cells;
    for (std::size_t j = 0; j < feature_at.size(); ++j) {
      const std::string v = trim(rec[feature_at[j]]);
      if (table.column(j).kind == ColumnKind::kCategorical) {
        cells.push_back(v.empty() ? Cell::plausible() : Cell::observed(table.level_index(j, v)));
        continue;
      }
      std::optional<double> d;
      if (v.starts_with("0x") || v.starts_with("0X")) {
        try {
          d = static_cast<double>(parse_port(v));
        } catch (const Error&) {
        }
      } else {
        d = parse_double(v);
      }
      cells.push_back(d ? Cell::observed(*d) : Cell::plausible());
    }
    table.add_row(key, std::move(cells));
    labels.push_back(lower(trim(rec[cat_at])) == "reconnaissance" ? 1 : 0);
  }
  table.set_labels(std::move(labels));
  return table;
}

}  // namespace recon
