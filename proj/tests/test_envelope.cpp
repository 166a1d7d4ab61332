#include <doctest.h>

#include <cstdint>
#include <string>
#include <vector>

#include "envelope.hpp"
#include "rng.hpp"

using namespace gossipsim;

namespace {

std::string to_hex(const std::vector<uint8_t>& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

// Independent layout walker: parses only the length prefixes and returns the
// [begin, end) body span of field `index`. Used as the oracle for the
// byte-diff test so it does not depend on decode().
std::pair<size_t, size_t> field_span(const std::vector<uint8_t>& bytes,
                                     size_t index) {
  size_t pos = 0;
  for (size_t i = 0;; ++i) {
    REQUIRE(pos + 4 <= bytes.size());
    const uint32_t len = (uint32_t{bytes[pos]} << 24) |
                         (uint32_t{bytes[pos + 1]} << 16) |
                         (uint32_t{bytes[pos + 2]} << 8) |
                         uint32_t{bytes[pos + 3]};
    pos += 4;
    if (i == index) return {pos, pos + len};
    pos += len;
  }
}

Envelope sample_envelope() {
  Envelope e;
  e.id = "m1";
  e.action = "set";
  e.style = Style::one_way;
  e.payload = "21.5";
  return e;
}

Envelope random_envelope(Rng& rng) {
  static const std::string alnum =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
  Envelope e;
  const size_t id_len = 1 + rng.bounded(16);
  for (size_t i = 0; i < id_len; ++i)
    e.id.push_back(alnum[rng.bounded(alnum.size())]);
  const char* actions[] = {"set", "read", "notify", ""};
  e.action = actions[rng.bounded(4)];
  e.style = rng.bounded(2) ? Style::request_response : Style::one_way;
  if (e.style == Style::request_response)
    e.reply_to = "n" + std::to_string(rng.bounded(100));
  e.payload = rng.bounded(2) ? float_payload(rng.uniform01() * 100.0) : "";
  if (rng.bounded(4) != 0) {
    GossipHeader h;
    const char* scopes[] = {"", "lan", "zoneA"};
    h.scope = scopes[rng.bounded(3)];
    h.fanout = 1 + static_cast<uint32_t>(rng.bounded(20));
    h.hops = static_cast<uint32_t>(rng.bounded(13));
    const int64_t ttls[] = {0, 500, 30000};
    h.id_ttl_ms = ttls[rng.bounded(3)];
    h.data_ttl_ms = ttls[rng.bounded(3)];
    const char* filters[] = {"", "max", "min", "sum", "count"};
    h.filter = filters[rng.bounded(5)];
    e.header = h;
  }
  e.origin_hops = static_cast<uint32_t>(rng.bounded(14));
  return e;
}

}  // namespace

TEST_SUITE("envelope") {
  TEST_CASE("golden encoding is stable") {
    const auto bytes = encode(sample_envelope());
    CHECK(to_hex(bytes) ==
          "000000026d31"
          "00000003736574"
          "000000076f6e652d776179"
          "00000000"
          "0000000432312e35"
          "00000000"
          "00000000"
          "00000000"
          "00000000"
          "00000000"
          "00000000"
          "0000000130");
    CHECK(encode(sample_envelope()) == bytes);  // repeated calls agree
  }

  TEST_CASE("equal envelopes encode identically") {
    Envelope a = sample_envelope();
    Envelope b = sample_envelope();
    GossipHeader h;
    h.scope = "lan";
    h.fanout = 8;
    h.hops = 5;
    h.id_ttl_ms = 30000;
    a.header = h;
    b.header = h;
    CHECK(encode(a) == encode(b));
  }

  TEST_CASE("hops change touches exactly the hops field region") {
    Envelope a = sample_envelope();
    GossipHeader h;
    h.scope = "lan";
    h.fanout = 8;
    h.hops = 3;
    h.id_ttl_ms = 30000;
    h.data_ttl_ms = 500;
    a.header = h;
    Envelope b = a;
    b.header->hops = 2;

    const auto ea = encode(a);
    const auto eb = encode(b);
    REQUIRE(ea.size() == eb.size());
    const auto span = field_span(ea, 7);  // hops is the 8th field
    bool any_diff = false;
    for (size_t i = 0; i < ea.size(); ++i) {
      if (ea[i] != eb[i]) {
        any_diff = true;
        CHECK(i >= span.first);
        CHECK(i < span.second);
      }
    }
    CHECK(any_diff);
  }

  TEST_CASE("round trip over generated envelopes") {
    Rng rng(2024);
    for (int i = 0; i < 300; ++i) {
      const Envelope e = random_envelope(rng);
      const Envelope back = decode(encode(e));
      CHECK(back == e);
    }
  }

  TEST_CASE("canonical: byte equality iff structural equality") {
    Rng rng(99);
    std::vector<Envelope> pool;
    for (int i = 0; i < 40; ++i) pool.push_back(random_envelope(rng));
    // include a structural duplicate
    pool.push_back(pool.front());
    for (const auto& a : pool) {
      const auto ea = encode(a);
      for (const auto& b : pool) {
        CHECK((a == b) == (ea == encode(b)));
      }
    }
  }

  TEST_CASE("truncated input names the field being read") {
    const auto bytes = encode(sample_envelope());
    for (size_t cut : {size_t{2}, bytes.size() - 3, bytes.size() - 1}) {
      std::vector<uint8_t> trunc(bytes.begin(), bytes.begin() + cut);
      CHECK_THROWS_AS(decode(trunc), EnvelopeError);
    }
    std::vector<uint8_t> trunc(bytes.begin(), bytes.begin() + 2);
    try {
      decode(trunc);
      FAIL("expected throw");
    } catch (const EnvelopeError& err) {
      CHECK(err.field() == "id");
    }
  }

  TEST_CASE("fanout zero on the wire is malformed") {
    Envelope e = sample_envelope();
    GossipHeader h;
    h.fanout = 8;
    h.hops = 2;
    e.header = h;
    auto bytes = encode(e);
    // Rewrite the fanout body ("8") to "0".
    const auto span = field_span(bytes, 6);
    REQUIRE(span.second - span.first == 1);
    bytes[span.first] = '0';
    try {
      decode(bytes);
      FAIL("expected throw");
    } catch (const EnvelopeError& err) {
      CHECK(err.field() == "fanout");
    }
  }

  TEST_CASE("negative duration on the wire is malformed") {
    Envelope e = sample_envelope();
    GossipHeader h;
    h.fanout = 8;
    h.hops = 2;
    h.id_ttl_ms = 5;
    e.header = h;
    auto bytes = encode(e);
    const auto span = field_span(bytes, 8);  // id_ttl body "5"
    bytes[span.first] = '-';
    try {
      decode(bytes);
      FAIL("expected throw");
    } catch (const EnvelopeError& err) {
      CHECK(err.field() == "id_ttl");
    }
  }

  TEST_CASE("header fields without fanout are malformed") {
    Envelope e = sample_envelope();
    auto bytes = encode(e);
    // Splice a non-empty hops field into the header-less encoding.
    const auto span = field_span(bytes, 7);
    bytes[span.first - 1] = 1;  // length 0 -> 1
    bytes.insert(bytes.begin() + static_cast<long>(span.first), '4');
    try {
      decode(bytes);
      FAIL("expected throw");
    } catch (const EnvelopeError& err) {
      CHECK(err.field() == "hops");
    }
  }

  TEST_CASE("trailing bytes are malformed") {
    auto bytes = encode(sample_envelope());
    bytes.push_back(0);
    CHECK_THROWS_AS(decode(bytes), EnvelopeError);
  }

  TEST_CASE("construction-time validation") {
    Envelope e = sample_envelope();
    GossipHeader h;
    h.fanout = 0;
    e.header = h;
    CHECK_THROWS_AS(encode(e), EnvelopeError);

    e.header->fanout = 1;
    e.header->data_ttl_ms = -4;
    CHECK_THROWS_AS(validate(e), EnvelopeError);

    e.header->data_ttl_ms = 0;
    e.style = Style::request_response;  // no reply_to
    CHECK_THROWS_AS(validate(e), EnvelopeError);

    e.reply_to = "n1";
    CHECK_NOTHROW(validate(e));

    Envelope bad_id = sample_envelope();
    bad_id.id = "";
    CHECK_THROWS_AS(validate(bad_id), EnvelopeError);
    bad_id.id = std::string(129, 'x');
    CHECK_THROWS_AS(validate(bad_id), EnvelopeError);
  }

  TEST_CASE("unknown style token is malformed") {
    auto bytes = encode(sample_envelope());
    const auto span = field_span(bytes, 2);
    bytes[span.first] = 'x';
    try {
      decode(bytes);
      FAIL("expected throw");
    } catch (const EnvelopeError& err) {
      CHECK(err.field() == "style");
    }
  }

  TEST_CASE("float payload round trip") {
    for (double v : {21.5, 0.0, -3.25, 1.0 / 3.0, 1e-12, 9.5}) {
      const auto parsed = parse_float_payload(float_payload(v));
      REQUIRE(parsed.has_value());
      CHECK(*parsed == v);
    }
    CHECK_FALSE(parse_float_payload("").has_value());
    CHECK_FALSE(parse_float_payload("12x").has_value());
  }
}
