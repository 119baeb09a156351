#include "recon/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

#include "recon/csv.hpp"
#include "recon/rng.hpp"

namespace recon {

std::string_view to_string(ScanType t) {
  switch (t) {
    case ScanType::kSyn: return "syn";
    case ScanType::kFin: return "fin";
    case ScanType::kNull: return "null";
    case ScanType::kXmas: return "xmas";
    case ScanType::kPingSweep: return "ping_sweep";
    case ScanType::kConnect: return "connect";
  }
  return "?";
}

ScanType parse_scan_type(std::string_view s) {
  for (auto t : {ScanType::kSyn, ScanType::kFin, ScanType::kNull, ScanType::kXmas, ScanType::kPingSweep,
                 ScanType::kConnect})
    if (to_string(t) == s) return t;
  throw Error(ErrorCode::kInvalidArgument, "unknown scan type '" + std::string(s) + "'");
}

std::size_t ScanBurst::probe_count() const {
  const std::size_t targets = target_last.value - target_first.value + 1;
  if (type == ScanType::kPingSweep) return targets;
  return targets * (std::size_t{port_last} - port_first + 1);
}

void ScanBurst::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidArgument, "scan burst: " + m); };
  if (!(gap_s > 0)) fail("gap must be > 0");
  if (target_last < target_first) fail("target range is empty");
  if (type != ScanType::kPingSweep && (port_first == 0 || port_last < port_first)) fail("port range is empty");
  if (!(open_fraction >= 0 && open_fraction <= 1)) fail("open_fraction must be in [0, 1]");
  if (!(alive_fraction >= 0 && alive_fraction <= 1)) fail("alive_fraction must be in [0, 1]");
  if (!(start_s >= 0)) fail("start must be >= 0");
}

void ScenarioConfig::validate() const {
  for (const auto& b : bursts) b.validate();
  if (!(profile.mean_duration_s > 0 && profile.mean_bytes > 0 && profile.mean_packets > 0))
    throw Error(ErrorCode::kInvalidArgument, "benign profile means must be > 0");
  if (network.n_clients == 0 || network.n_servers == 0 || network.n_servers > 254 || network.n_clients > 65000)
    throw Error(ErrorCode::kInvalidArgument, "benign network needs 1..65000 clients and 1..254 servers");
  if (!(network.span_s > 0)) throw Error(ErrorCode::kInvalidArgument, "benign span must be > 0");
}

Json ScenarioConfig::to_json() const {
  Json j;
  j["seed"] = seed;
  j["n_benign_flows"] = n_benign_flows;
  j["profile"] = {{"mean_duration_s", profile.mean_duration_s},
                  {"mean_bytes", profile.mean_bytes},
                  {"mean_packets", profile.mean_packets}};
  j["network"] = {{"n_clients", network.n_clients}, {"n_servers", network.n_servers}, {"span_s", network.span_s}};
  auto& bs = j["bursts"] = Json::array();
  for (const auto& b : bursts) {
    Json e;
    e["type"] = to_string(b.type);
    e["source_ip"] = b.source_ip.to_string();
    e["targets"] = {b.target_first.to_string(), b.target_last.to_string()};
    if (b.type != ScanType::kPingSweep) e["ports"] = {b.port_first, b.port_last};
    e["gap_s"] = b.gap_s;
    e["start_s"] = b.start_s;
    e["open_fraction"] = b.open_fraction;
    e["alive_fraction"] = b.alive_fraction;
    bs.push_back(std::move(e));
  }
  return j;
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
  ScenarioConfig s;
  try {
    s.seed = j.value("seed", std::uint64_t{0});
    s.n_benign_flows = j.value("n_benign_flows", s.n_benign_flows);
    if (j.contains("profile")) {
      const auto& p = j["profile"];
      s.profile.mean_duration_s = p.value("mean_duration_s", s.profile.mean_duration_s);
      s.profile.mean_bytes = p.value("mean_bytes", s.profile.mean_bytes);
      s.profile.mean_packets = p.value("mean_packets", s.profile.mean_packets);
    }
    if (j.contains("network")) {
      const auto& n = j["network"];
      s.network.n_clients = n.value("n_clients", s.network.n_clients);
      s.network.n_servers = n.value("n_servers", s.network.n_servers);
      s.network.span_s = n.value("span_s", s.network.span_s);
    }
    for (const auto& e : j.value("bursts", nlohmann::json::array())) {
      ScanBurst b;
      b.type = parse_scan_type(e.at("type").get<std::string>());
      b.source_ip = Ipv4::parse(e.at("source_ip").get<std::string>());
      const auto& t = e.at("targets");
      b.target_first = Ipv4::parse(t.at(0).get<std::string>());
      b.target_last = Ipv4::parse(t.at(1).get<std::string>());
      if (e.contains("ports")) {
        b.port_first = e["ports"].at(0).get<std::uint16_t>();
        b.port_last = e["ports"].at(1).get<std::uint16_t>();
      }
      b.gap_s = e.value("gap_s", b.gap_s);
      b.start_s = e.value("start_s", b.start_s);
      b.open_fraction = e.value("open_fraction", b.open_fraction);
      b.alive_fraction = e.value("alive_fraction", b.alive_fraction);
      s.bursts.push_back(b);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("scenario JSON: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<int> GroundTruth::labels_for(std::span<const FlowRecord> flows) const {
  std::vector<RowKey> keys;
  keys.reserve(flows.size());
  for (const auto& f : flows) keys.push_back(RowKey{f.start_ts, f.key});
  return labels_for(keys);
}

std::vector<int> GroundTruth::labels_for(std::span<const RowKey> rows) const {
  std::map<RowKey, bool> lookup;
  for (const auto& e : entries) lookup.emplace(e.key, e.probing);
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto& k : rows) {
    const auto it = lookup.find(k);
    if (it == lookup.end())
      throw Error(ErrorCode::kCoverageMismatch, "flow " + k.flow.initiator_ip.to_string() + ":" +
                                                    std::to_string(k.flow.initiator_port) + " -> " +
                                                    k.flow.responder_ip.to_string() + ":" +
                                                    std::to_string(k.flow.responder_port) + " has no ground truth");
    out.push_back(it->second ? 1 : 0);
  }
  return out;
}

namespace {

constexpr std::int64_t kEpochUs = kScenarioEpochSec * 1'000'000;
constexpr std::uint32_t kMaxSegment = 1460;

PacketRecord tcp_packet(std::int64_t us, Ipv4 src, std::uint16_t sport, Ipv4 dst, std::uint16_t dport,
                        std::uint8_t flags, std::uint8_t ttl) {
  PacketRecord p;
  p.ts = Timestamp{us};
  p.src_ip = src;
  p.dst_ip = dst;
  p.src_port = sport;
  p.dst_port = dport;
  p.proto = Protocol::kTcp;
  p.tcp_flags = flags;
  p.ttl = ttl;
  p.window = 64240;
  return p;
}

void finalize(PacketRecord& p) { p.wire_len = header_bytes(p) + p.payload_len; }

double lognormal(Rng& rng, double mean, double sigma) {
  return mean * std::exp(sigma * rng.normal() - 0.5 * sigma * sigma);
}

struct Service {
  std::uint16_t port;
  Protocol proto;
  double weight;
};

// Most-demanded services of an institutional network.
constexpr Service kServices[] = {
    {80, Protocol::kTcp, 0.30},  {53, Protocol::kUdp, 0.15},  {23, Protocol::kTcp, 0.05},
    {445, Protocol::kTcp, 0.15}, {1433, Protocol::kTcp, 0.10}, {25, Protocol::kTcp, 0.10},
    {22, Protocol::kTcp, 0.15},
};

const Service& pick_service(Rng& rng) {
  double u = rng.uniform(), acc = 0.0;
  for (const auto& s : kServices) {
    acc += s.weight;
    if (u < acc) return s;
  }
  return kServices[0];
}

// Splits `duration_us` into `n` strictly positive gaps.
std::vector<std::int64_t> partition_gaps(Rng& rng, std::size_t n, std::int64_t duration_us) {
  std::vector<double> w(n);
  for (double& v : w) v = rng.exponential(1.0);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<std::int64_t> gaps(n);
  for (std::size_t i = 0; i < n; ++i)
    gaps[i] = std::max<std::int64_t>(1, std::llround(w[i] / total * static_cast<double>(duration_us)));
  return gaps;
}

// Spreads `total` payload bytes over `count` packets, none above one segment.
// Bytes cut off at the segment cap are handed to the packets still below it,
// so the total is kept whenever count * kMaxSegment allows.
std::vector<std::uint32_t> spread_payload(Rng& rng, std::size_t count, double total) {
  std::vector<std::uint32_t> out(count, 0);
  if (count == 0 || total <= 0) return out;
  const double cap = static_cast<double>(kMaxSegment);
  std::vector<double> w(count), b(count, 0.0);
  for (double& v : w) v = 0.5 + rng.uniform();
  std::vector<bool> full(count, false);
  double remaining = std::min(total, cap * static_cast<double>(count));
  while (remaining > 1e-9) {
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i)
      if (!full[i]) sum += w[i];
    if (sum <= 0) break;
    double spill = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      if (full[i]) continue;
      b[i] += w[i] / sum * remaining;
      if (b[i] >= cap) spill += b[i] - cap, b[i] = cap, full[i] = true;
    }
    remaining = spill;
  }
  for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<std::uint32_t>(std::lround(std::max(1.0, b[i])));
  return out;
}

void sort_packets(std::vector<PacketRecord>& packets) {
  std::stable_sort(packets.begin(), packets.end(),
                   [](const PacketRecord& a, const PacketRecord& b) { return a.ts < b.ts; });
}

struct Session {
  std::int64_t start_us;
  Ipv4 client, server;
  std::uint16_t client_port;
  const Service* service;
};

void emit_session(const Session& s, const BenignProfile& profile, Rng& rng, GeneratedTraffic& out) {
  const bool tcp = s.service->proto == Protocol::kTcp;
  const double dur_cap = tcp ? 50.0 : 25.0;  // below the idle timeouts
  const double duration = std::clamp(lognormal(rng, profile.mean_duration_s, 0.6), 0.05, dur_cap);
  const std::size_t min_packets = tcp ? 8 : 2;
  const double bytes = lognormal(rng, profile.mean_bytes, 0.6);
  // Enough data packets that the payload fits in full segments.
  const auto carry = static_cast<long>(std::ceil(bytes / kMaxSegment)) + static_cast<long>(min_packets);
  const auto n = static_cast<std::size_t>(std::clamp<long>(
      std::max(std::lround(lognormal(rng, profile.mean_packets, 0.5)), carry), static_cast<long>(min_packets), 400));
  const std::uint8_t cttl = rng.bernoulli(0.5) ? 64 : 128;
  const std::uint8_t sttl = 64;
  const std::uint16_t sport = s.service->port;

  const auto gaps = partition_gaps(rng, n - 1, std::llround(duration * 1e6));
  std::vector<std::int64_t> ts(n);
  ts[0] = s.start_us;
  for (std::size_t i = 1; i < n; ++i) ts[i] = ts[i - 1] + gaps[i - 1];

  std::vector<PacketRecord> pk;
  pk.reserve(n);
  // Direction per packet: true = client -> server.
  std::vector<bool> fwd(n);
  if (tcp) {
    using namespace tcp_flags;
    const std::uint32_t wscale_c = static_cast<std::uint32_t>(rng.below(9));
    PacketRecord syn = tcp_packet(ts[0], s.client, s.client_port, s.server, sport, kSyn, cttl);
    syn.seq = static_cast<std::uint32_t>(rng.next());
    syn.tcp_options = {{kTcpOptionMss, kMaxSegment}, {kTcpOptionWindowScale, wscale_c}};
    PacketRecord synack = tcp_packet(ts[1], s.server, sport, s.client, s.client_port, kSyn | kAck, sttl);
    synack.seq = static_cast<std::uint32_t>(rng.next());
    synack.tcp_options = {{kTcpOptionMss, kMaxSegment}, {kTcpOptionWindowScale, 7}};
    pk.push_back(syn);
    pk.push_back(synack);
    pk.push_back(tcp_packet(ts[2], s.client, s.client_port, s.server, sport, kAck, cttl));
    fwd[0] = true, fwd[1] = false, fwd[2] = true;
    // Data: a request, then responses with occasional further requests.
    for (std::size_t i = 3; i + 3 < n; ++i) {
      const bool c2s = i == 3 || rng.bernoulli(0.3);
      fwd[i] = c2s;
      pk.push_back(c2s ? tcp_packet(ts[i], s.client, s.client_port, s.server, sport, kPsh | kAck, cttl)
                       : tcp_packet(ts[i], s.server, sport, s.client, s.client_port, kPsh | kAck, sttl));
    }
    const std::size_t c = n - 3;
    pk.push_back(tcp_packet(ts[c], s.client, s.client_port, s.server, sport, kFin | kAck, cttl));
    pk.push_back(tcp_packet(ts[c + 1], s.server, sport, s.client, s.client_port, kFin | kAck, sttl));
    pk.push_back(tcp_packet(ts[c + 2], s.client, s.client_port, s.server, sport, kAck, cttl));
    fwd[c] = true, fwd[c + 1] = false, fwd[c + 2] = true;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      fwd[i] = i % 2 == 0;
      PacketRecord p;
      p.ts = Timestamp{ts[i]};
      p.proto = Protocol::kUdp;
      p.src_ip = fwd[i] ? s.client : s.server;
      p.dst_ip = fwd[i] ? s.server : s.client;
      p.src_port = fwd[i] ? s.client_port : sport;
      p.dst_port = fwd[i] ? sport : s.client_port;
      p.ttl = fwd[i] ? cttl : sttl;
      pk.push_back(p);
    }
  }

  // Payload over data-carrying packets, 15% of it client-side.
  std::vector<std::size_t> client_data, server_data;
  for (std::size_t i = 0; i < n; ++i) {
    const bool data = tcp ? (i >= 3 && i + 3 < n) : true;
    if (!data) continue;
    (fwd[i] ? client_data : server_data).push_back(i);
  }
  double headers = 0.0;
  for (auto& p : pk) headers += header_bytes(p);
  const double payload = std::max(0.0, bytes - headers);
  // Whatever one direction cannot carry in full segments moves to the other.
  const double seg = static_cast<double>(kMaxSegment);
  const double server_share = server_data.empty() ? 0.0 : std::min(payload * 0.85, seg * server_data.size());
  const double client_share = std::min(payload - server_share, seg * client_data.size());
  const auto sp = spread_payload(rng, server_data.size(),
                                 std::min(payload - client_share, seg * server_data.size()));
  const auto cp = spread_payload(rng, client_data.size(), client_share);
  for (std::size_t i = 0; i < client_data.size(); ++i) pk[client_data[i]].payload_len = cp[i];
  for (std::size_t i = 0; i < server_data.size(); ++i) pk[server_data[i]].payload_len = sp[i];
  std::uint32_t seq_c = tcp ? pk[0].seq + 1 : 0, seq_s = tcp ? pk[1].seq + 1 : 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = pk[i];
    if (tcp && i >= 2) {
      std::uint32_t& seq = fwd[i] ? seq_c : seq_s;
      p.seq = seq;
      seq += p.payload_len + ((p.tcp_flags & tcp_flags::kFin) ? 1u : 0u);
    }
    finalize(p);
    out.packets.push_back(std::move(p));
  }
  out.truth.entries.push_back(
      {RowKey{Timestamp{s.start_us}, FlowKey{s.client, s.server, s.client_port, sport, s.service->proto}}, false});
}

Ipv4 client_ip(std::size_t i) {
  const auto k = static_cast<std::uint32_t>(i);
  return Ipv4{(10u << 24) | (1 + k / 250) << 8 | (1 + k % 250)};
}
Ipv4 server_ip(std::size_t i) { return Ipv4{(10u << 24) | (1u << 16) | static_cast<std::uint32_t>(1 + i)}; }

}  // namespace

GeneratedTraffic gen_benign(const BenignProfile& profile, std::size_t n, std::uint64_t seed,
                            const BenignNetwork& network) {
  Rng rng(seed);
  std::vector<std::uint16_t> next_port(network.n_clients, 32768);
  GeneratedTraffic out;
  for (std::size_t i = 0; i < n; ++i) {
    Session s;
    s.start_us = kEpochUs + std::llround(rng.uniform(0.0, network.span_s) * 1e6);
    const std::size_t c = rng.below(network.n_clients);
    s.client = client_ip(c);
    s.server = server_ip(rng.below(network.n_servers));
    // Ephemeral ports are never reused, so every session is its own flow.
    if (next_port[c] == 65535)
      throw Error(ErrorCode::kInvalidArgument, "too many sessions per client for unique ephemeral ports");
    s.client_port = next_port[c]++;
    s.service = &pick_service(rng);
    Rng session_rng(derive_seed(seed, i + 1));
    emit_session(s, profile, session_rng, out);
  }
  sort_packets(out.packets);
  return out;
}

GeneratedTraffic gen_probe(const ScanBurst& burst, std::uint64_t seed) {
  burst.validate();
  using namespace tcp_flags;
  Rng rng(seed);
  GeneratedTraffic out;
  const std::uint8_t ttl = static_cast<std::uint8_t>(37 + rng.below(23));
  const std::uint16_t fixed_port = static_cast<std::uint16_t>(40000 + rng.below(20000));
  std::uint16_t connect_port = static_cast<std::uint16_t>(32768 + rng.below(20000));

  struct Probe {
    Ipv4 target;
    std::uint16_t port;
  };
  std::vector<Probe> probes;
  for (std::uint32_t t = burst.target_first.value; t <= burst.target_last.value; ++t) {
    if (burst.type == ScanType::kPingSweep) {
      probes.push_back({Ipv4{t}, 0});
      continue;
    }
    for (std::uint32_t port = burst.port_first; port <= burst.port_last; ++port)
      probes.push_back({Ipv4{t}, static_cast<std::uint16_t>(port)});
  }
  // Port order is randomized as scanners do by default.
  rng.shuffle(std::span(probes));

  const std::int64_t start = kEpochUs + std::llround(burst.start_s * 1e6);
  const std::int64_t gap = std::max<std::int64_t>(1, std::llround(burst.gap_s * 1e6));
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto& pr = probes[i];
    const std::int64_t t0 = start + static_cast<std::int64_t>(i) * gap;
    const std::int64_t rtt = 200 + static_cast<std::int64_t>(rng.below(2800));
    const bool open = rng.bernoulli(burst.open_fraction);
    const Ipv4 src = burst.source_ip;
    std::vector<PacketRecord> pk;
    std::uint16_t sport = fixed_port;
    switch (burst.type) {
      case ScanType::kSyn: {
        PacketRecord syn = tcp_packet(t0, src, sport, pr.target, pr.port, kSyn, ttl);
        syn.window = 1024;
        syn.seq = static_cast<std::uint32_t>(rng.next());
        syn.tcp_options = {{kTcpOptionMss, kMaxSegment}};
        pk.push_back(syn);
        if (open) {
          PacketRecord sa = tcp_packet(t0 + rtt, pr.target, pr.port, src, sport, kSyn | kAck, 64);
          sa.seq = static_cast<std::uint32_t>(rng.next());
          sa.tcp_options = {{kTcpOptionMss, kMaxSegment}};
          pk.push_back(sa);
          PacketRecord rst = tcp_packet(t0 + rtt + 50, src, sport, pr.target, pr.port, kRst, ttl);
          rst.window = 0;
          rst.seq = syn.seq + 1;
          pk.push_back(rst);
        } else {
          PacketRecord ra = tcp_packet(t0 + rtt, pr.target, pr.port, src, sport, kRst | kAck, 64);
          ra.window = 0;
          pk.push_back(ra);
        }
        break;
      }
      case ScanType::kFin:
      case ScanType::kNull:
      case ScanType::kXmas: {
        const std::uint8_t flags = burst.type == ScanType::kFin    ? kFin
                                   : burst.type == ScanType::kNull ? std::uint8_t{0}
                                                                   : static_cast<std::uint8_t>(kFin | kPsh | kUrg);
        PacketRecord p = tcp_packet(t0, src, sport, pr.target, pr.port, flags, ttl);
        p.window = 1024;
        p.seq = static_cast<std::uint32_t>(rng.next());
        pk.push_back(p);
        // Open ports stay silent; closed ports answer with a reset.
        if (!open) {
          PacketRecord ra = tcp_packet(t0 + rtt, pr.target, pr.port, src, sport, kRst | kAck, 64);
          ra.window = 0;
          pk.push_back(ra);
        }
        break;
      }
      case ScanType::kConnect: {
        sport = connect_port++;
        if (connect_port == 0) connect_port = 32768;
        PacketRecord syn = tcp_packet(t0, src, sport, pr.target, pr.port, kSyn, 64);
        syn.seq = static_cast<std::uint32_t>(rng.next());
        syn.tcp_options = {{kTcpOptionMss, kMaxSegment}, {kTcpOptionWindowScale, 7}};
        pk.push_back(syn);
        if (open) {
          PacketRecord sa = tcp_packet(t0 + rtt, pr.target, pr.port, src, sport, kSyn | kAck, 64);
          sa.seq = static_cast<std::uint32_t>(rng.next());
          sa.tcp_options = {{kTcpOptionMss, kMaxSegment}, {kTcpOptionWindowScale, 7}};
          pk.push_back(sa);
          PacketRecord ack = tcp_packet(t0 + rtt + 40, src, sport, pr.target, pr.port, kAck, 64);
          ack.seq = syn.seq + 1;
          pk.push_back(ack);
          PacketRecord rst = tcp_packet(t0 + rtt + 80, src, sport, pr.target, pr.port, kRst | kAck, 64);
          rst.seq = syn.seq + 1;
          pk.push_back(rst);
        } else {
          PacketRecord ra = tcp_packet(t0 + rtt, pr.target, pr.port, src, sport, kRst | kAck, 64);
          ra.window = 0;
          pk.push_back(ra);
        }
        break;
      }
      case ScanType::kPingSweep: {
        sport = 0;
        PacketRecord req;
        req.ts = Timestamp{t0};
        req.proto = Protocol::kIcmp;
        req.src_ip = src;
        req.dst_ip = pr.target;
        req.icmp_type = kIcmpEchoRequest;
        req.ttl = ttl;
        pk.push_back(req);
        if (rng.bernoulli(burst.alive_fraction)) {
          PacketRecord rep = req;
          rep.ts = Timestamp{t0 + rtt};
          rep.src_ip = pr.target;
          rep.dst_ip = src;
          rep.icmp_type = kIcmpEchoReply;
          rep.ttl = 64;
          pk.push_back(rep);
        }
        break;
      }
    }
    const Protocol proto = burst.type == ScanType::kPingSweep ? Protocol::kIcmp : Protocol::kTcp;
    out.truth.entries.push_back({RowKey{Timestamp{t0}, FlowKey{src, pr.target, sport, pr.port, proto}}, true});
    for (auto& p : pk) {
      finalize(p);
      out.packets.push_back(std::move(p));
    }
  }
  sort_packets(out.packets);
  return out;
}

GeneratedTraffic gen_dataset(const ScenarioConfig& scenario) {
  scenario.validate();
  GeneratedTraffic out =
      gen_benign(scenario.profile, scenario.n_benign_flows, derive_seed(scenario.seed, 0), scenario.network);
  for (std::size_t b = 0; b < scenario.bursts.size(); ++b) {
    GeneratedTraffic probe = gen_probe(scenario.bursts[b], derive_seed(scenario.seed, b + 1));
    out.packets.insert(out.packets.end(), probe.packets.begin(), probe.packets.end());
    out.truth.entries.insert(out.truth.entries.end(), probe.truth.entries.begin(), probe.truth.entries.end());
  }
  sort_packets(out.packets);
  std::sort(out.truth.entries.begin(), out.truth.entries.end(),
            [](const GroundTruthEntry& a, const GroundTruthEntry& b) { return a.key < b.key; });
  return out;
}

ScenarioConfig default_scenario(std::size_t total_flows, double probe_fraction, std::uint64_t seed,
                                const ScanMix& mix) {
  if (!(probe_fraction >= 0 && probe_fraction <= 1))
    throw Error(ErrorCode::kInvalidArgument, "probe fraction must be in [0, 1]");
  ScenarioConfig s;
  s.seed = seed;
  const auto probes = static_cast<std::size_t>(std::llround(static_cast<double>(total_flows) * probe_fraction));
  s.n_benign_flows = total_flows - probes;
  s.network.n_clients = std::max<std::size_t>(50, std::min<std::size_t>(2000, s.n_benign_flows / 20));

  const std::pair<ScanType, double> weights[] = {{ScanType::kSyn, mix.syn},   {ScanType::kConnect, mix.connect},
                                                 {ScanType::kFin, mix.fin},   {ScanType::kXmas, mix.xmas},
                                                 {ScanType::kNull, mix.null}, {ScanType::kPingSweep, mix.ping_sweep}};
  double wsum = 0.0;
  for (const auto& [t, w] : weights) {
    if (w < 0) throw Error(ErrorCode::kInvalidArgument, "scan mix weights must be >= 0");
    wsum += w;
  }
  if (probes > 0 && !(wsum > 0)) throw Error(ErrorCode::kInvalidArgument, "scan mix has no positive weight");

  // Largest-remainder apportionment of the probe count.
  std::vector<std::size_t> counts(std::size(weights), 0);
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < std::size(weights); ++i) {
    const double exact = probes ? static_cast<double>(probes) * weights[i].second / wsum : 0.0;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    rema.push_back({exact - std::floor(exact), i});
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < probes; ++i, ++assigned) ++counts[rema[i % rema.size()].second];

  Rng rng(derive_seed(seed, 0xB0257));
  std::uint32_t scanner = 0;
  for (std::size_t i = 0; i < std::size(weights); ++i) {
    std::size_t left = counts[i];
    while (left > 0) {
      const std::size_t n = std::min<std::size_t>(left, 100);
      left -= n;
      ScanBurst b;
      b.type = weights[i].first;
      b.source_ip = Ipv4{(172u << 24) | (16u << 16) | (scanner / 250) << 8 | (1 + scanner % 250)};
      ++scanner;
      const std::uint32_t target = server_ip(rng.below(s.network.n_servers)).value;
      if (b.type == ScanType::kPingSweep) {
        b.target_first = Ipv4{(10u << 24) | (2u << 16) | 1};
        b.target_last = Ipv4{b.target_first.value + static_cast<std::uint32_t>(n) - 1};
        b.alive_fraction = 0.7;
      } else {
        b.target_first = b.target_last = Ipv4{target};
        b.port_first = static_cast<std::uint16_t>(1 + rng.below(1000));
        b.port_last = static_cast<std::uint16_t>(b.port_first + n - 1);
      }
      b.gap_s = rng.uniform(0.005, 0.02);
      b.start_s = rng.uniform(0.0, s.network.span_s * 0.9);
      s.bursts.push_back(b);
    }
  }
  return s;
}

void write_ground_truth_csv(const GroundTruth& truth, std::ostream& out) {
  csv::write_record(out, {"start_ts", "src_ip", "src_port", "dst_ip", "dst_port", "proto", "label"});
  char ts[48];
  for (const auto& e : truth.entries) {
    const auto& k = e.key;
    std::snprintf(ts, sizeof ts, "%lld.%06lld", static_cast<long long>(k.start_ts.sec()),
                  static_cast<long long>(k.start_ts.usec()));
    csv::write_record(out, {ts, k.flow.initiator_ip.to_string(), std::to_string(k.flow.initiator_port),
                            k.flow.responder_ip.to_string(), std::to_string(k.flow.responder_port),
                            std::string(to_string(k.flow.proto)), e.probing ? "probing" : "benign"});
  }
}

namespace {

std::int64_t parse_int(const std::string& s, std::int64_t lo, std::int64_t hi, const char* what) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < lo || v > hi)
    throw Error(ErrorCode::kSchemaMismatch, std::string("ground truth: bad ") + what + " '" + s + "'");
  return v;
}

}  // namespace

GroundTruth read_ground_truth_csv(std::istream& in) {
  const auto records = csv::read(in);
  if (records.empty()) throw Error(ErrorCode::kSchemaMismatch, "ground truth file is empty");
  const csv::Record expected = {"start_ts", "src_ip", "src_port", "dst_ip", "dst_port", "proto", "label"};
  if (records[0] != expected) throw Error(ErrorCode::kSchemaMismatch, "ground truth header mismatch");
  GroundTruth gt;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != expected.size())
      throw Error(ErrorCode::kRaggedRow, "ground truth row " + std::to_string(r) + " has " +
                                             std::to_string(rec.size()) + " fields");
    GroundTruthEntry e;
    const auto dot = rec[0].find('.');
    if (dot == std::string::npos || rec[0].size() - dot - 1 != 6)
      throw Error(ErrorCode::kSchemaMismatch, "ground truth: bad start_ts '" + rec[0] + "'");
    e.key.start_ts = Timestamp::from_parts(parse_int(rec[0].substr(0, dot), 0, INT64_MAX / 1'000'000, "start_ts"),
                                           parse_int(rec[0].substr(dot + 1), 0, 999'999, "start_ts"));
    e.key.flow.initiator_ip = Ipv4::parse(rec[1]);
    e.key.flow.initiator_port = static_cast<std::uint16_t>(parse_int(rec[2], 0, 65535, "port"));
    e.key.flow.responder_ip = Ipv4::parse(rec[3]);
    e.key.flow.responder_port = static_cast<std::uint16_t>(parse_int(rec[4], 0, 65535, "port"));
    e.key.flow.proto = parse_protocol(rec[5]);
    if (rec[6] != "probing" && rec[6] != "benign")
      throw Error(ErrorCode::kSchemaMismatch, "ground truth: label must be probing or benign");
    e.probing = rec[6] == "probing";
    gt.entries.push_back(e);
  }
  return gt;
}

}  // namespace recon
