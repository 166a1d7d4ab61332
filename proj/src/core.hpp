#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "envelope.hpp"
#include "membership.hpp"
#include "rng.hpp"

namespace gossipsim {

enum class Variant { eager_push, lazy_push, eager_pull, lazy_pull };
enum class DuplicatePolicy { infect_and_die, balls_and_bins };

const char* variant_name(Variant v);
const char* policy_name(DuplicatePolicy p);
std::optional<Variant> variant_from_name(const std::string& name);
std::optional<DuplicatePolicy> policy_from_name(const std::string& name);

bool is_pull_variant(Variant v);

// Per-node gossiping parameters. initial_hops is the relay budget r: the
// maximum relay depth of a dissemination.
struct GossipConfig {
  Variant variant = Variant::eager_push;
  uint32_t fanout = 1;
  uint32_t initial_hops = 1;
  int64_t id_ttl_ms = 30000;
  int64_t data_ttl_ms = 0;
  std::string scope = "lan";
  DuplicatePolicy duplicate_policy = DuplicatePolicy::infect_and_die;
  int64_t pull_period_ms = 0;
  int64_t aggregation_timeout_ms = 1000;
  // Outgoing copies with hops above the threshold are pushed eagerly,
  // the rest are advertised (lazy-push variant only). 0 = derive the
  // default initial_hops - 2 at validation time.
  uint32_t eager_hops_threshold = 0;
  int64_t pull_window_ms = 0;   // 0 = 2 * pull_period
  int64_t fetch_retry_ms = 1000;
};

// Throws ConfigError. Fills derived defaults (eager threshold, pull window).
void validate(GossipConfig& cfg);

struct DuplicateEntry {
  int64_t expires_at_us = 0;
  std::optional<Address> initiator;  // upstream to route replies to; nullopt at the origin
};

struct PayloadEntry {
  Envelope envelope;
  int64_t received_at_us = 0;
  int64_t expires_at_us = 0;
};

// Reply aggregation in flight for one request id.
struct PendingAggregation {
  Address upstream;  // empty at the origin node
  std::string filter;
  size_t expected = 0;  // number of downstream targets actually sent to
  std::vector<ReplyEnvelope> received;
  std::string local_payload;  // this node's own service reply
  int64_t deadline_us = 0;
};

// Wire actions a node asks its transport to perform.
struct PushAction {
  Address to;
  std::vector<Envelope> envelopes;
};
struct PushIdsAction {
  Address to;
  std::vector<MessageId> ids;
};
struct FetchAction {
  Address to;
  std::vector<MessageId> ids;
};
struct PullAction {
  Address to;
  int64_t window_ms = 0;
};
struct PullIdsAction {
  Address to;
};
struct ReplyAction {
  Address to;
  ReplyEnvelope reply;
};
struct ExchangeAction {
  Address to;
  std::vector<PeerEntry> entries;
};
using Action = std::variant<PushAction, PushIdsAction, FetchAction, PullAction,
                            PullIdsAction, ReplyAction, ExchangeAction>;

struct Delivery {
  Envelope envelope;
  int64_t at_us = 0;
};

// The per-node gossip state machine. One Node is confined to a single
// logical execution context; nodes interact only through returned actions.
//
// The hosted test service is a single float variable: a delivered "set"
// envelope assigns it, any request-response envelope reads it back.
class Node {
 public:
  Node(Address address, GossipConfig cfg);

  const Address& address() const { return address_; }
  const GossipConfig& config() const { return cfg_; }

  PeerView& view() { return view_; }
  const PeerView& view() const { return view_; }

  double service_value() const { return service_value_; }
  void set_service_value(double v) { service_value_ = v; }

  void enable_newscast(bool on) { newscast_ = on; }

  // Originate a message. Returns one transmission per selected peer, with
  // header taken from the config and hops = initial_hops on the wire.
  // Throws EmptyViewError when no peers are known.
  std::vector<Action> initiate(const std::string& action, std::string payload,
                               Style style, const std::string& filter,
                               int64_t now_us, Rng& rng);

  // Receive a gossiped envelope from `from`. Handles scope checks, duplicate
  // detection, TTL buffers, local delivery, relaying, and reply plumbing.
  std::vector<Action> handle_receive(const Envelope& env, const Address& from,
                                     int64_t now_us, Rng& rng);

  // Batch receive; equivalent to handle_receive on each envelope in order.
  std::vector<Action> push(std::span<const Envelope> envelopes,
                           const Address& from, int64_t now_us, Rng& rng);

  // Advertisement of remotely available ids; returns the ids worth fetching
  // (unknown here and not already being fetched) and marks them in flight.
  std::vector<MessageId> push_ids(std::span<const MessageId> ids,
                                  const Address& from, int64_t now_us);

  // Serve side of Pull: unexpired buffered envelopes received within
  // [now - window, now], each decremented for the wire. Entries whose copy
  // could not be retransmitted (hops < 2) are not served.
  std::vector<Envelope> pull(int64_t window_ms, int64_t now_us);

  // Ids of all unexpired buffered envelopes.
  std::vector<MessageId> pull_ids(int64_t now_us);

  // Serve side of Fetch: buffered envelopes for the requested ids; missing,
  // expired, or non-retransmittable ids are simply absent.
  std::vector<Envelope> fetch(std::span<const MessageId> ids, int64_t now_us);

  // Route a reply upstream, or fold it into a pending aggregation. Returns
  // the forwarded (possibly aggregated) reply, if one is due now.
  std::optional<ReplyAction> handle_reply(const ReplyEnvelope& reply,
                                          int64_t now_us);

  // Housekeeping: TTL sweeps, aggregation deadlines, periodic pulls for
  // pull variants, membership exchange when newscast mode is on.
  std::vector<Action> tick(int64_t now_us, Rng& rng);

  // Envelopes delivered to the hosted service since the last drain.
  std::vector<Delivery> take_delivered();

  // Replies that reached this node as the request's origin.
  const std::vector<ReplyEnvelope>& root_replies() const {
    return root_replies_;
  }

  uint64_t scope_mismatches() const { return scope_mismatches_; }
  uint64_t dropped_replies() const { return dropped_replies_; }

  bool has_dedup_entry(const MessageId& id) const {
    return dedup_.count(id) > 0;
  }
  bool has_store_entry(const MessageId& id) const {
    return store_.count(id) > 0;
  }
  size_t pending_count() const { return pending_.size(); }

 private:
  void deliver_local(const Envelope& env, int64_t now_us);
  std::vector<Address> relay_targets(const GossipHeader& header,
                                     const Address& from, int64_t now_us,
                                     Rng& rng);
  Action make_relay(const Address& to, const Envelope& outgoing) const;
  std::optional<ReplyAction> resolve_aggregation(const MessageId& id);
  std::string local_reply_payload() const;

  Address address_;
  GossipConfig cfg_;
  PeerView view_;
  bool newscast_ = false;

  std::map<MessageId, DuplicateEntry> dedup_;
  std::map<MessageId, PayloadEntry> store_;
  std::map<MessageId, int64_t> requested_;  // id -> fetch-retry deadline
  std::map<MessageId, PendingAggregation> pending_;

  std::vector<Delivery> delivered_;
  std::vector<ReplyEnvelope> root_replies_;

  double service_value_ = 0.0;
  int64_t next_pull_at_us_ = -1;
  uint64_t origin_counter_ = 0;
  uint64_t scope_mismatches_ = 0;
  uint64_t dropped_replies_ = 0;
};

// Aggregate a filter over the local payload plus non-fault replies.
// Filters: max, min, sum, count.
std::string apply_filter(const std::string& filter,
                         const std::string& local_payload,
                         std::span<const ReplyEnvelope> replies);

bool is_known_filter(const std::string& filter);

}  // namespace gossipsim
