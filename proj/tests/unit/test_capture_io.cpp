#include <sstream>

#include "doctest.h"
#include "recon/common.hpp"
#include "packets.hpp"
#include "recon/capture_io.hpp"
#include "recon/rng.hpp"

using namespace recon;
using namespace recon::testing;

namespace {

std::vector<PacketRecord> random_packets(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<PacketRecord> out;
  std::int64_t t = 1'600'000'000'000'000;
  for (std::size_t i = 0; i < n; ++i) {
    t += 1 + static_cast<std::int64_t>(rng.below(100000));
    PacketRecord p;
    p.ts = Timestamp{t};
    p.src_ip = Ipv4{static_cast<std::uint32_t>(rng.next())};
    p.dst_ip = Ipv4{static_cast<std::uint32_t>(rng.next())};
    p.ttl = static_cast<std::uint8_t>(1 + rng.below(255));
    switch (rng.below(3)) {
      case 0:
        p.proto = Protocol::kTcp;
        p.src_port = static_cast<std::uint16_t>(rng.below(65536));
        p.dst_port = static_cast<std::uint16_t>(rng.below(65536));
        p.tcp_flags = static_cast<std::uint8_t>(rng.below(64));
        p.seq = static_cast<std::uint32_t>(rng.next());
        p.window = static_cast<std::uint16_t>(rng.below(65536));
        if (rng.bernoulli(0.5)) p.tcp_options.push_back({kTcpOptionMss, static_cast<std::uint32_t>(rng.below(65536))});
        if (rng.bernoulli(0.5)) p.tcp_options.push_back({kTcpOptionWindowScale, static_cast<std::uint32_t>(rng.below(15))});
        break;
      case 1:
        p.proto = Protocol::kUdp;
        p.src_port = static_cast<std::uint16_t>(rng.below(65536));
        p.dst_port = static_cast<std::uint16_t>(rng.below(65536));
        break;
      default:
        p.proto = Protocol::kIcmp;
        p.icmp_type = rng.bernoulli(0.5) ? kIcmpEchoRequest : kIcmpEchoReply;
        break;
    }
    p.payload_len = static_cast<std::uint32_t>(rng.below(1400));
    p.wire_len = header_bytes(p) + p.payload_len;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

TEST_CASE("pcap round trip preserves every field in both byte orders") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto packets = random_packets(seed, 300);
    for (auto e : {Endianness::kLittle, Endianness::kBig}) {
      const auto bytes = write_pcap(packets, e);
      const auto back = read_pcap(bytes);
      CHECK(back.skipped == 0);
      REQUIRE(back.packets.size() == packets.size());
      for (std::size_t i = 0; i < packets.size(); ++i) CHECK(back.packets[i] == packets[i]);
    }
  }
}

TEST_CASE("pcap writer is deterministic") {
  const auto packets = random_packets(9, 50);
  CHECK(write_pcap(packets) == write_pcap(packets));
  CHECK(write_pcap(packets, Endianness::kLittle) != write_pcap(packets, Endianness::kBig));
}

TEST_CASE("empty capture is the 24-byte global header") {
  const auto bytes = write_pcap({});
  CHECK(bytes.size() == 24);
  CHECK(read_pcap(bytes).packets.empty());
}

TEST_CASE("malformed captures are rejected") {
  std::vector<std::uint8_t> bad(24, 0);
  CHECK_THROWS_AS(read_pcap(bad), Error);
  try {
    read_pcap(bad);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBadMagic);
  }
  std::vector<std::uint8_t> shortfile(10, 0);
  try {
    read_pcap(shortfile);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTruncated);
  }
  auto bytes = write_pcap(random_packets(3, 2));
  bytes.resize(bytes.size() - 5);
  try {
    read_pcap(bytes);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTruncated);
  }
}

TEST_CASE("stream reader matches span reader") {
  const auto bytes = write_pcap(random_packets(4, 20));
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  CHECK(read_pcap(in).packets == read_pcap(bytes).packets);
}

TEST_CASE("records that violate invariants are not written") {
  auto p = tcp(1, "10.0.0.1", 1, "10.0.0.2", 2, tcp_flags::kSyn);
  p.wire_len = 10;
  CHECK_FALSE(is_valid(p));
  CHECK_THROWS_AS(write_pcap(std::vector{p}), Error);
  auto q = icmp(1, "10.0.0.1", "10.0.0.2", kIcmpEchoRequest);
  q.src_port = 5;
  CHECK_FALSE(is_valid(q));
}

TEST_CASE("segment splits into consecutive chunks") {
  const auto packets = random_packets(5, 10);
  const auto parts = segment(packets, 4);
  REQUIRE(parts.size() == 3);
  CHECK(parts[0].packets.size() == 4);
  CHECK(parts[2].packets.size() == 2);
  CHECK(parts[2].index == 2);
  CHECK(parts[1].packets.front() == packets[4]);
  CHECK_THROWS_AS(segment(packets, 0), Error);
}

TEST_CASE("ipv4 text round trip") {
  CHECK(Ipv4::parse("192.168.1.20").to_string() == "192.168.1.20");
  CHECK(Ipv4::parse("10.0.0.1").value == 0x0A000001u);
  CHECK_THROWS_AS(Ipv4::parse("10.0.0"), Error);
  CHECK_THROWS_AS(Ipv4::parse("10.0.0.256"), Error);
}
