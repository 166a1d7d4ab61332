#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace gossipsim {

// Opaque unique message identifier, 1..128 characters.
using MessageId = std::string;

// Node endpoint address. Empty string means "none".
using Address = std::string;

enum class Style { one_way, request_response };

const char* style_name(Style s);

// Relay control block attached to gossiped envelopes.
//
//   scope     relay only within this label
//   fanout    peers targeted per relay step (>= 1)
//   hops      remaining hop budget; decremented on every transmission,
//             copies with hops <= 0 are never put on the wire
//   id_ttl    how long receivers remember the id for duplicate detection
//             (0 = stateless balls-and-bins relaying)
//   data_ttl  how long receivers buffer the payload for lazy variants
//             (0 = always eager, no advertisements)
//   filter    optional reply aggregation rule (max/min/sum/count)
struct GossipHeader {
  std::string scope;
  uint32_t fanout = 1;
  uint32_t hops = 0;
  int64_t id_ttl_ms = 0;
  int64_t data_ttl_ms = 0;
  std::string filter;  // empty = none

  bool operator==(const GossipHeader&) const = default;
};

// The gossiped unit. origin_hops records the hop budget the envelope was
// created with, so a receiver can compute its depth in the dissemination
// tree as origin_hops - header.hops.
struct Envelope {
  MessageId id;
  std::string action;
  Style style = Style::one_way;
  Address reply_to;     // required for request-response
  std::string payload;  // opaque bytes
  std::optional<GossipHeader> header;
  uint32_t origin_hops = 0;

  bool operator==(const Envelope&) const = default;
};

struct ReplyEnvelope {
  MessageId in_reply_to;
  std::string payload;
  std::string fault;  // empty = no fault

  bool operator==(const ReplyEnvelope&) const = default;
};

// Throws EnvelopeError naming the first offending field.
void validate(const Envelope& e);

// Canonical byte form: twelve length-prefixed UTF-8 fields in fixed order
// (id, action, style, reply_to, payload, scope, fanout, hops, id_ttl,
// data_ttl, filter, origin_hops). See docs/envelope-format.md. Deterministic
// across runs and platforms; structural equality of envelopes is equivalent
// to byte equality of encodings.
std::vector<uint8_t> encode(const Envelope& e);

// Inverse of encode. Throws EnvelopeError naming the first offending field.
Envelope decode(std::span<const uint8_t> bytes);

// Canonical text form of a float payload (round-trips exactly through
// parse_float_payload).
std::string float_payload(double value);

// Returns nullopt if the payload is not a parsable float.
std::optional<double> parse_float_payload(const std::string& payload);

}  // namespace gossipsim
