#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <queue>
#include <string>
#include <variant>
#include <vector>

#include "core.hpp"
#include "envelope.hpp"
#include "membership.hpp"
#include "rng.hpp"

namespace gossipsim {

enum class Protocol { gossip, eventing };
enum class MembershipMode { registry, newscast };

// Fixed network delay plus a deterministic sender-side serialization cost
// per transmission; optional uniform jitter on the network leg.
struct LatencyModel {
  double network_delay_ms = 1.0;
  double per_send_cost_ms = 0.4;
  double jitter_ms = 0.0;
};

struct SimConfig {
  uint32_t n = 2;
  Protocol protocol = Protocol::gossip;
  GossipConfig gossip;
  MembershipMode membership = MembershipMode::registry;
  uint32_t view_capacity = 0;         // 0 = n - 1
  int64_t exchange_timeframe_ms = 0;  // 0 = 10 * interval
  double loss = 0.0;                  // gossip datagram transport only
  uint64_t seed = 0;
  uint32_t events = 1;
  int64_t interval_ms = 5000;
  LatencyModel latency;
  uint32_t warmup_discard = 0;
  uint32_t cooldown_discard = 0;
  int64_t tick_period_ms = 1000;
  int64_t tail_ms = 10000;  // run-out after the last emission
  std::string tx_log_path;
  std::string scenario = "run";
  bool retain_transmissions = false;
};

// Throws ConfigError; fills derived defaults.
void validate(SimConfig& cfg);

Protocol protocol_from_name(const std::string& name);

// One scheduled simulator event. Processing order is (time, insertion seq).
struct SimEvent {
  int64_t at_us = 0;
  uint64_t seq = 0;
  enum class Kind { deliver, tick, emit } kind = Kind::deliver;
  uint32_t node = 0;   // deliver target / tick owner
  uint64_t index = 0;  // transmission seq (deliver) or event number (emit)
};

// Deterministic priority queue: non-decreasing timestamps, ties broken by
// insertion sequence. No wall clock anywhere.
class EventQueue {
 public:
  void push(SimEvent e);
  bool empty() const { return heap_.empty(); }
  const SimEvent& top() const { return heap_.top(); }
  SimEvent pop();

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      if (a.at_us != b.at_us) return a.at_us > b.at_us;
      return a.seq > b.seq;
    }
  };
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
  uint64_t next_seq_ = 0;
};

enum class MsgKind {
  data,
  notify,
  push_ids,
  fetch,
  pull,
  pull_ids,
  reply,
  exchange_req,
  exchange_resp
};

const char* msg_kind_name(MsgKind kind);

struct TransmissionRecord {
  uint64_t seq = 0;
  uint32_t from = 0;
  uint32_t to = 0;
  int64_t send_us = 0;     // departure time
  int64_t deliver_us = 0;  // scheduled arrival; meaningless when dropped
  bool dropped = false;
  bool delivered = false;  // stays false for in-flight at horizon
  MsgKind kind = MsgKind::data;
  std::string detail;
};

// Bernoulli fault injection on one transmission.
TransmissionRecord& inject_loss(TransmissionRecord& t, double loss, Rng& rng);

// Messages the simulated transport carries between nodes.
struct DataMsg {
  std::vector<Envelope> envelopes;
};
struct PushIdsMsg {
  std::vector<MessageId> ids;
};
struct FetchMsg {
  std::vector<MessageId> ids;
};
struct PullMsg {
  int64_t window_ms = 0;
};
struct PullIdsMsg {};
struct ReplyMsg {
  ReplyEnvelope reply;
};
struct ExchangeReqMsg {
  std::vector<PeerEntry> entries;
};
struct ExchangeRespMsg {
  std::vector<PeerEntry> entries;
};
using WirePayload =
    std::variant<std::monostate, DataMsg, PushIdsMsg, FetchMsg, PullMsg,
                 PullIdsMsg, ReplyMsg, ExchangeReqMsg, ExchangeRespMsg>;

struct RunMetrics {
  double delivery_rate = 0.0;
  double atomic_fraction = 0.0;
  double mean_latency_ms = 0.0;
  double p99_latency_ms = 0.0;
  double max_latency_ms = 0.0;
  double mean_hops = 0.0;
  uint64_t total_transmissions = 0;
  uint64_t data_transmissions = 0;
  uint64_t delivered_transmissions = 0;
  uint64_t dropped_transmissions = 0;
  uint64_t inflight_at_end = 0;
  uint64_t producer_transmissions = 0;
  double producer_transmissions_per_event = 0.0;
  uint64_t delivered_pairs = 0;
  uint64_t expected_pairs = 0;
  uint64_t scope_mismatches = 0;
  uint64_t dropped_replies = 0;
  uint32_t producer_index = 0;
  uint64_t seed = 0;

  std::string to_string() const;  // deterministic, for golden comparisons
};

// Single-threaded deterministic discrete-event simulator: virtual clock,
// lossy datagram transport for gossip, reliable sequential transport for
// the eventing baseline, registry- or newscast-backed membership.
class Simulator {
 public:
  explicit Simulator(SimConfig cfg);
  ~Simulator();

  // The full experiment procedure: start manager/producer/consumers, emit
  // `events` envelopes at `interval`, drain, compute metrics.
  RunMetrics run();

  // Finer-grained access for tests.
  void setup();
  MessageId initiate(uint32_t node_index, const std::string& action,
                     std::string payload, Style style,
                     const std::string& filter);
  void run_until_idle();

  const SimConfig& config() const { return cfg_; }
  Node& node(uint32_t i) { return *nodes_[i]; }
  uint32_t producer_index() const { return producer_; }
  int64_t now_us() const { return now_us_; }
  const std::vector<TransmissionRecord>& transmissions() const {
    return records_;
  }
  // Consumers that received message `event_index`, out of n - 1.
  uint32_t delivery_count(uint32_t event_index) const;

 private:
  struct InFlight {
    uint32_t from = 0;
    WirePayload payload;
  };

  void process(const SimEvent& e);
  void emit_event(uint32_t k);
  void dispatch(uint32_t to, uint64_t tx_seq);
  void exec_actions(uint32_t from_node, std::vector<Action> actions);
  void drain_deliveries(uint32_t node_index);
  uint64_t send(uint32_t from, uint32_t to, InFlight msg, bool reliable,
                MsgKind kind, std::string detail);
  void register_message(const MessageId& id, uint32_t origin);
  void record_delivery(uint32_t node_index, const Envelope& env, int64_t at_us);
  void write_tx_log() const;
  RunMetrics finalize();

  SimConfig cfg_;
  Rng rng_;
  EventQueue queue_;
  Registry registry_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<Address> addresses_;
  std::map<Address, uint32_t> address_index_;
  std::map<MessageId, uint32_t> message_index_;
  std::vector<int64_t> emission_us_;
  std::vector<uint32_t> origin_node_;
  std::vector<std::vector<int64_t>> first_delivery_us_;  // [event][node], -1
  std::vector<std::vector<int32_t>> delivery_hops_;
  std::map<uint64_t, InFlight> inflight_;
  std::vector<TransmissionRecord> records_;
  std::vector<int64_t> busy_until_us_;
  uint32_t producer_ = 0;
  int64_t now_us_ = 0;
  int64_t horizon_us_ = 0;
  int64_t tick_step_us_ = 0;
  uint64_t tx_seq_ = 0;
  bool setup_done_ = false;
  bool retain_;

  uint64_t total_tx_ = 0, data_tx_ = 0, delivered_tx_ = 0, dropped_tx_ = 0,
           producer_tx_ = 0;
};

// Convenience wrapper: build, validate, run.
RunMetrics run(SimConfig cfg);

}  // namespace gossipsim
