#include "envelope.hpp"

#include <cstdio>
#include <cstdlib>
#include <limits>

namespace gossipsim {

namespace {

constexpr const char* kStyleOneWay = "one-way";
constexpr const char* kStyleRequestResponse = "request-response";

void put_field(std::vector<uint8_t>& out, std::string_view value) {
  const auto len = static_cast<uint32_t>(value.size());
  out.push_back(static_cast<uint8_t>(len >> 24));
  out.push_back(static_cast<uint8_t>(len >> 16));
  out.push_back(static_cast<uint8_t>(len >> 8));
  out.push_back(static_cast<uint8_t>(len));
  out.insert(out.end(), value.begin(), value.end());
}

struct Cursor {
  std::span<const uint8_t> bytes;
  size_t pos = 0;

  std::string read_field(const char* name) {
    if (pos + 4 > bytes.size())
      throw EnvelopeError(name, "truncated length prefix");
    const uint32_t len = (uint32_t{bytes[pos]} << 24) |
                         (uint32_t{bytes[pos + 1]} << 16) |
                         (uint32_t{bytes[pos + 2]} << 8) |
                         uint32_t{bytes[pos + 3]};
    pos += 4;
    if (pos + len > bytes.size())
      throw EnvelopeError(name, "truncated field body");
    std::string value(reinterpret_cast<const char*>(bytes.data() + pos), len);
    pos += len;
    return value;
  }
};

// Canonical unsigned decimal: digits only, no sign, no leading zeros.
uint64_t parse_decimal(const char* name, const std::string& text,
                       uint64_t max) {
  if (text.empty()) throw EnvelopeError(name, "empty numeric field");
  if (text.size() > 1 && text[0] == '0')
    throw EnvelopeError(name, "non-canonical leading zero");
  uint64_t value = 0;
  for (char c : text) {
    if (c < '0' || c > '9')
      throw EnvelopeError(name, "invalid digit in numeric field");
    const uint64_t digit = static_cast<uint64_t>(c - '0');
    if (value > (max - digit) / 10)
      throw EnvelopeError(name, "numeric field out of range");
    value = value * 10 + digit;
  }
  return value;
}

}  // namespace

const char* style_name(Style s) {
  return s == Style::one_way ? kStyleOneWay : kStyleRequestResponse;
}

void validate(const Envelope& e) {
  if (e.id.empty() || e.id.size() > 128)
    throw EnvelopeError("id", "must be 1..128 characters");
  if (e.style == Style::request_response && e.reply_to.empty())
    throw EnvelopeError("reply_to", "required for request-response style");
  if (e.header) {
    if (e.header->fanout < 1) throw EnvelopeError("fanout", "must be >= 1");
    if (e.header->id_ttl_ms < 0)
      throw EnvelopeError("id_ttl", "duration must be non-negative");
    if (e.header->data_ttl_ms < 0)
      throw EnvelopeError("data_ttl", "duration must be non-negative");
  }
}

std::vector<uint8_t> encode(const Envelope& e) {
  validate(e);
  std::vector<uint8_t> out;
  out.reserve(64 + e.id.size() + e.action.size() + e.payload.size());
  put_field(out, e.id);
  put_field(out, e.action);
  put_field(out, style_name(e.style));
  put_field(out, e.reply_to);
  put_field(out, e.payload);
  if (e.header) {
    put_field(out, e.header->scope);
    put_field(out, std::to_string(e.header->fanout));
    put_field(out, std::to_string(e.header->hops));
    put_field(out, std::to_string(e.header->id_ttl_ms));
    put_field(out, std::to_string(e.header->data_ttl_ms));
    put_field(out, e.header->filter);
  } else {
    for (int i = 0; i < 6; ++i) put_field(out, "");
  }
  put_field(out, std::to_string(e.origin_hops));
  return out;
}

Envelope decode(std::span<const uint8_t> bytes) {
  Cursor cur{bytes};
  Envelope e;
  e.id = cur.read_field("id");
  e.action = cur.read_field("action");
  const std::string style = cur.read_field("style");
  if (style == kStyleOneWay) {
    e.style = Style::one_way;
  } else if (style == kStyleRequestResponse) {
    e.style = Style::request_response;
  } else {
    throw EnvelopeError("style", "unknown style token");
  }
  e.reply_to = cur.read_field("reply_to");
  e.payload = cur.read_field("payload");

  const std::string scope = cur.read_field("scope");
  const std::string fanout = cur.read_field("fanout");
  const std::string hops = cur.read_field("hops");
  const std::string id_ttl = cur.read_field("id_ttl");
  const std::string data_ttl = cur.read_field("data_ttl");
  const std::string filter = cur.read_field("filter");
  if (!fanout.empty()) {
    GossipHeader h;
    h.scope = scope;
    h.fanout = static_cast<uint32_t>(
        parse_decimal("fanout", fanout, std::numeric_limits<uint32_t>::max()));
    h.hops = static_cast<uint32_t>(
        parse_decimal("hops", hops, std::numeric_limits<uint32_t>::max()));
    h.id_ttl_ms = static_cast<int64_t>(parse_decimal(
        "id_ttl", id_ttl, std::numeric_limits<int64_t>::max()));
    h.data_ttl_ms = static_cast<int64_t>(parse_decimal(
        "data_ttl", data_ttl, std::numeric_limits<int64_t>::max()));
    h.filter = filter;
    e.header = h;
  } else {
    // No header: the remaining header fields must be absent too.
    if (!scope.empty()) throw EnvelopeError("scope", "present without fanout");
    if (!hops.empty()) throw EnvelopeError("hops", "present without fanout");
    if (!id_ttl.empty())
      throw EnvelopeError("id_ttl", "present without fanout");
    if (!data_ttl.empty())
      throw EnvelopeError("data_ttl", "present without fanout");
    if (!filter.empty())
      throw EnvelopeError("filter", "present without fanout");
  }

  e.origin_hops = static_cast<uint32_t>(
      parse_decimal("origin_hops", cur.read_field("origin_hops"),
                    std::numeric_limits<uint32_t>::max()));
  if (cur.pos != bytes.size())
    throw EnvelopeError("envelope", "trailing bytes after last field");
  validate(e);
  return e;
}

std::string float_payload(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::optional<double> parse_float_payload(const std::string& payload) {
  if (payload.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(payload.c_str(), &end);
  if (end != payload.c_str() + payload.size()) return std::nullopt;
  return v;
}

}  // namespace gossipsim
