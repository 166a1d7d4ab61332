#include "simnet.hpp"

#include <algorithm>
#include <cassert>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace gossipsim {

namespace {

constexpr int64_t kMsToUs = 1000;

int64_t ms_to_us(double ms) { return std::llround(ms * 1000.0); }

}  // namespace

void validate(SimConfig& cfg) {
  if (cfg.n < 2) throw ConfigError("n must be >= 2");
  if (cfg.events < 1) throw ConfigError("events must be >= 1");
  if (cfg.loss < 0.0 || cfg.loss > 1.0)
    throw ConfigError("loss must be in [0, 1]");
  if (cfg.interval_ms <= 0) throw ConfigError("interval must be > 0");
  if (cfg.events <= cfg.warmup_discard + cfg.cooldown_discard)
    throw ConfigError("events must exceed warmup + cooldown discards");
  if (cfg.latency.network_delay_ms < 0 || cfg.latency.per_send_cost_ms < 0 ||
      cfg.latency.jitter_ms < 0)
    throw ConfigError("latency parameters must be non-negative");
  if (cfg.tick_period_ms <= 0) throw ConfigError("tick_period must be > 0");
  if (cfg.tail_ms < 0) throw ConfigError("tail must be non-negative");
  if (cfg.view_capacity == 0) cfg.view_capacity = cfg.n - 1;
  if (cfg.exchange_timeframe_ms == 0)
    cfg.exchange_timeframe_ms = 10 * cfg.interval_ms;
  if (cfg.protocol == Protocol::gossip) validate(cfg.gossip);
}

Protocol protocol_from_name(const std::string& name) {
  if (name == "gossip") return Protocol::gossip;
  if (name == "eventing") return Protocol::eventing;
  throw ConfigError("unknown protocol: " + name);
}

void EventQueue::push(SimEvent e) {
  e.seq = next_seq_++;
  heap_.push(e);
}

SimEvent EventQueue::pop() {
  SimEvent e = heap_.top();
  heap_.pop();
  return e;
}

TransmissionRecord& inject_loss(TransmissionRecord& t, double loss, Rng& rng) {
  t.dropped = loss > 0.0 && rng.uniform01() < loss;
  return t;
}

const char* msg_kind_name(MsgKind kind) {
  switch (kind) {
    case MsgKind::data: return "data";
    case MsgKind::notify: return "notify";
    case MsgKind::push_ids: return "pushids";
    case MsgKind::fetch: return "fetch";
    case MsgKind::pull: return "pull";
    case MsgKind::pull_ids: return "pullids";
    case MsgKind::reply: return "reply";
    case MsgKind::exchange_req: return "exchreq";
    case MsgKind::exchange_resp: return "exchresp";
  }
  return "?";
}

std::string RunMetrics::to_string() const {
  char buf[1024];
  std::snprintf(
      buf, sizeof(buf),
      "delivery_rate=%.9f atomic=%.9f mean_latency_ms=%.9f "
      "p99_latency_ms=%.9f max_latency_ms=%.9f mean_hops=%.9f "
      "total_tx=%" PRIu64 " data_tx=%" PRIu64 " delivered_tx=%" PRIu64
      " dropped_tx=%" PRIu64 " inflight=%" PRIu64 " producer_tx=%" PRIu64
      " producer_tx_per_event=%.9f pairs=%" PRIu64 "/%" PRIu64
      " scope_mismatches=%" PRIu64 " dropped_replies=%" PRIu64
      " producer=%u seed=%" PRIu64,
      delivery_rate, atomic_fraction, mean_latency_ms, p99_latency_ms,
      max_latency_ms, mean_hops, total_transmissions, data_transmissions,
      delivered_transmissions, dropped_transmissions, inflight_at_end,
      producer_transmissions, producer_transmissions_per_event,
      delivered_pairs, expected_pairs, scope_mismatches, dropped_replies,
      producer_index, seed);
  return buf;
}

Simulator::Simulator(SimConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
  validate(cfg_);
  retain_ = cfg_.retain_transmissions || !cfg_.tx_log_path.empty();
}

Simulator::~Simulator() = default;

void Simulator::setup() {
  assert(!setup_done_);
  setup_done_ = true;

  const uint32_t n = cfg_.n;
  producer_ = cfg_.protocol == Protocol::gossip
                  ? static_cast<uint32_t>(rng_.bounded(n))
                  : 0;
  busy_until_us_.assign(n, 0);

  addresses_.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "n%04u", i);
    addresses_.emplace_back(buf);
    address_index_[addresses_.back()] = i;
  }

  if (cfg_.protocol != Protocol::gossip) return;

  const std::string& scope = cfg_.gossip.scope;
  for (uint32_t i = 0; i < n; ++i)
    registry_.announce({addresses_[i], "sim-node", "", 0}, scope);

  const int64_t timeframe_us = cfg_.exchange_timeframe_ms * kMsToUs;
  const auto directory = registry_.snapshot(scope);
  nodes_.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    auto node = std::make_unique<Node>(addresses_[i], cfg_.gossip);
    node->view() = make_view(cfg_.view_capacity, timeframe_us);
    if (cfg_.membership == MembershipMode::registry) {
      merge(node->view(), directory, addresses_[i]);
    } else {
      node->enable_newscast(true);
      // Ring bootstrap: each node starts knowing only its successor.
      merge(node->view(), std::vector<PeerEntry>{directory[(i + 1) % n]},
            addresses_[i]);
    }
    nodes_.push_back(std::move(node));
  }
}

void Simulator::register_message(const MessageId& id, uint32_t origin) {
  message_index_[id] = static_cast<uint32_t>(emission_us_.size());
  emission_us_.push_back(now_us_);
  origin_node_.push_back(origin);
  first_delivery_us_.emplace_back(cfg_.n, -1);
  delivery_hops_.emplace_back(cfg_.n, 0);
}

void Simulator::record_delivery(uint32_t node_index, const Envelope& env,
                                int64_t at_us) {
  auto it = message_index_.find(env.id);
  if (it == message_index_.end()) return;
  const uint32_t m = it->second;
  if (node_index == origin_node_[m]) return;
  if (first_delivery_us_[m][node_index] >= 0) return;
  first_delivery_us_[m][node_index] = at_us;
  delivery_hops_[m][node_index] =
      env.header ? static_cast<int32_t>(env.origin_hops) -
                       static_cast<int32_t>(env.header->hops)
                 : 1;
}

void Simulator::drain_deliveries(uint32_t node_index) {
  for (const auto& d : nodes_[node_index]->take_delivered())
    record_delivery(node_index, d.envelope, d.at_us);
}

uint64_t Simulator::send(uint32_t from, uint32_t to, InFlight msg,
                         bool reliable, MsgKind kind, std::string detail) {
  const uint64_t seq = tx_seq_++;
  const int64_t cost_us = ms_to_us(cfg_.latency.per_send_cost_ms);
  const int64_t depart = std::max(now_us_, busy_until_us_[from]) + cost_us;
  busy_until_us_[from] = depart;

  TransmissionRecord rec;
  rec.seq = seq;
  rec.from = from;
  rec.to = to;
  rec.send_us = depart;
  rec.kind = kind;
  rec.detail = std::move(detail);

  ++total_tx_;
  if (kind == MsgKind::data || kind == MsgKind::notify) ++data_tx_;
  if (from == producer_) ++producer_tx_;

  if (!reliable) inject_loss(rec, cfg_.loss, rng_);
  if (rec.dropped) {
    ++dropped_tx_;
    if (retain_) records_.push_back(std::move(rec));
    return seq;
  }

  int64_t jitter_us = 0;
  if (cfg_.latency.jitter_ms > 0)
    jitter_us = static_cast<int64_t>(
        rng_.uniform01() * static_cast<double>(ms_to_us(cfg_.latency.jitter_ms)));
  rec.deliver_us = depart + ms_to_us(cfg_.latency.network_delay_ms) + jitter_us;

  inflight_[seq] = std::move(msg);
  queue_.push({rec.deliver_us, 0, SimEvent::Kind::deliver, to, seq});
  if (retain_) records_.push_back(std::move(rec));
  return seq;
}

void Simulator::exec_actions(uint32_t from_node, std::vector<Action> actions) {
  for (auto& action : actions) {
    std::visit(
        [&](auto& a) {
          using T = std::decay_t<decltype(a)>;
          const uint32_t to = address_index_.at(a.to);
          if constexpr (std::is_same_v<T, PushAction>) {
            std::string detail;
            if (retain_) {
              for (const auto& e : a.envelopes) {
                if (!detail.empty()) detail += ',';
                detail += e.id + "@" +
                          std::to_string(e.header ? e.header->hops : 0);
              }
            }
            send(from_node, to, {from_node, DataMsg{std::move(a.envelopes)}},
                 false, MsgKind::data, std::move(detail));
          } else if constexpr (std::is_same_v<T, PushIdsAction>) {
            std::string detail;
            if (retain_) {
              for (const auto& id : a.ids) {
                if (!detail.empty()) detail += ',';
                detail += id;
              }
            }
            send(from_node, to, {from_node, PushIdsMsg{std::move(a.ids)}},
                 false, MsgKind::push_ids, std::move(detail));
          } else if constexpr (std::is_same_v<T, FetchAction>) {
            std::string detail;
            if (retain_) {
              for (const auto& id : a.ids) {
                if (!detail.empty()) detail += ',';
                detail += id;
              }
            }
            send(from_node, to, {from_node, FetchMsg{std::move(a.ids)}}, false,
                 MsgKind::fetch, std::move(detail));
          } else if constexpr (std::is_same_v<T, PullAction>) {
            send(from_node, to, {from_node, PullMsg{a.window_ms}}, false,
                 MsgKind::pull,
                 retain_ ? "window_ms=" + std::to_string(a.window_ms) : "");
          } else if constexpr (std::is_same_v<T, PullIdsAction>) {
            send(from_node, to, {from_node, PullIdsMsg{}}, false,
                 MsgKind::pull_ids, "");
          } else if constexpr (std::is_same_v<T, ReplyAction>) {
            std::string detail;
            if (retain_) {
              detail = a.reply.in_reply_to;
              if (!a.reply.fault.empty()) detail += ",fault=" + a.reply.fault;
            }
            send(from_node, to, {from_node, ReplyMsg{std::move(a.reply)}},
                 false, MsgKind::reply, std::move(detail));
          } else if constexpr (std::is_same_v<T, ExchangeAction>) {
            send(from_node, to,
                 {from_node, ExchangeReqMsg{std::move(a.entries)}}, false,
                 MsgKind::exchange_req, "");
          }
        },
        action);
  }
}

void Simulator::dispatch(uint32_t to, uint64_t tx_seq) {
  auto it = inflight_.find(tx_seq);
  assert(it != inflight_.end());
  InFlight msg = std::move(it->second);
  inflight_.erase(it);
  ++delivered_tx_;
  if (retain_) records_[tx_seq].delivered = true;

  if (cfg_.protocol == Protocol::eventing) {
    if (const auto* data = std::get_if<DataMsg>(&msg.payload))
      for (const auto& env : data->envelopes)
        record_delivery(to, env, now_us_);
    return;
  }

  Node& node = *nodes_[to];
  const Address& from_addr = addresses_[msg.from];

  // Any observed traffic refreshes membership knowledge about the sender.
  if (!find_entry(node.view(), from_addr))
    observe(node.view(), Announce{{from_addr, "sim-node", "", 0}},
            node.address());
  observe(node.view(), MessageFrom{from_addr}, node.address());

  std::vector<Action> actions;
  if (auto* data = std::get_if<DataMsg>(&msg.payload)) {
    actions = node.push(data->envelopes, from_addr, now_us_, rng_);
  } else if (auto* adv = std::get_if<PushIdsMsg>(&msg.payload)) {
    auto wanted = node.push_ids(adv->ids, from_addr, now_us_);
    if (!wanted.empty())
      actions.push_back(FetchAction{from_addr, std::move(wanted)});
  } else if (auto* fetch = std::get_if<FetchMsg>(&msg.payload)) {
    auto envelopes = node.fetch(fetch->ids, now_us_);
    if (!envelopes.empty())
      actions.push_back(PushAction{from_addr, std::move(envelopes)});
  } else if (auto* pull_req = std::get_if<PullMsg>(&msg.payload)) {
    auto envelopes = node.pull(pull_req->window_ms, now_us_);
    if (!envelopes.empty())
      actions.push_back(PushAction{from_addr, std::move(envelopes)});
  } else if (std::get_if<PullIdsMsg>(&msg.payload)) {
    auto ids = node.pull_ids(now_us_);
    if (!ids.empty())
      actions.push_back(PushIdsAction{from_addr, std::move(ids)});
  } else if (auto* reply = std::get_if<ReplyMsg>(&msg.payload)) {
    if (auto out = node.handle_reply(reply->reply, now_us_))
      actions.push_back(std::move(*out));
  } else if (auto* req = std::get_if<ExchangeReqMsg>(&msg.payload)) {
    auto own = handle_exchange_request(node.view(), req->entries,
                                       node.address(), now_us_);
    send(to, msg.from, {to, ExchangeRespMsg{std::move(own)}}, false,
         MsgKind::exchange_resp, "");
  } else if (auto* resp = std::get_if<ExchangeRespMsg>(&msg.payload)) {
    merge(node.view(), resp->entries, node.address());
  }

  drain_deliveries(to);
  exec_actions(to, std::move(actions));
}

void Simulator::emit_event(uint32_t k) {
  if (cfg_.protocol == Protocol::eventing) {
    Envelope env;
    env.id = "m" + std::to_string(k);
    env.action = "notify";
    env.payload = float_payload(20.0 + 0.01 * k);
    register_message(env.id, producer_);
    // Sequential unicast: one notification per subscriber, departures
    // spaced by the per-send cost.
    for (uint32_t j = 0; j < cfg_.n; ++j) {
      if (j == producer_) continue;
      send(producer_, j, {producer_, DataMsg{{env}}}, true, MsgKind::notify,
           retain_ ? env.id : "");
    }
    return;
  }

  Node& producer = *nodes_[producer_];
  auto actions = producer.initiate(
      "set", float_payload(20.0 + 0.01 * k), Style::one_way, "", now_us_, rng_);
  auto delivered = producer.take_delivered();
  assert(!delivered.empty());
  register_message(delivered.front().envelope.id, producer_);
  for (const auto& d : delivered) record_delivery(producer_, d.envelope, d.at_us);
  exec_actions(producer_, std::move(actions));
}

void Simulator::process(const SimEvent& e) {
  now_us_ = e.at_us;
  switch (e.kind) {
    case SimEvent::Kind::deliver:
      dispatch(e.node, e.index);
      break;
    case SimEvent::Kind::tick: {
      exec_actions(e.node, nodes_[e.node]->tick(now_us_, rng_));
      drain_deliveries(e.node);
      const int64_t next = e.at_us + tick_step_us_;
      if (next <= horizon_us_)
        queue_.push({next, 0, SimEvent::Kind::tick, e.node, 0});
      break;
    }
    case SimEvent::Kind::emit:
      emit_event(static_cast<uint32_t>(e.index));
      break;
  }
}

MessageId Simulator::initiate(uint32_t node_index, const std::string& action,
                              std::string payload, Style style,
                              const std::string& filter) {
  assert(setup_done_ && cfg_.protocol == Protocol::gossip);
  Node& node = *nodes_[node_index];
  auto actions =
      node.initiate(action, std::move(payload), style, filter, now_us_, rng_);
  auto delivered = node.take_delivered();
  assert(!delivered.empty());
  const MessageId id = delivered.front().envelope.id;
  register_message(id, node_index);
  exec_actions(node_index, std::move(actions));
  return id;
}

void Simulator::run_until_idle() {
  while (!queue_.empty()) process(queue_.pop());
}

uint32_t Simulator::delivery_count(uint32_t event_index) const {
  uint32_t count = 0;
  for (uint32_t j = 0; j < cfg_.n; ++j) {
    if (j == origin_node_[event_index]) continue;
    if (first_delivery_us_[event_index][j] >= 0) ++count;
  }
  return count;
}

RunMetrics Simulator::finalize() {
  RunMetrics m;
  m.seed = cfg_.seed;
  m.producer_index = producer_;
  m.total_transmissions = total_tx_;
  m.data_transmissions = data_tx_;
  m.delivered_transmissions = delivered_tx_;
  m.dropped_transmissions = dropped_tx_;
  m.inflight_at_end = inflight_.size();
  m.producer_transmissions = producer_tx_;
  m.producer_transmissions_per_event =
      static_cast<double>(producer_tx_) / static_cast<double>(cfg_.events);

  const uint32_t consumers = cfg_.n - 1;
  const uint32_t events = static_cast<uint32_t>(emission_us_.size());
  m.expected_pairs = static_cast<uint64_t>(consumers) * events;

  std::vector<int64_t> latencies;
  uint64_t hops_sum = 0;
  uint32_t atomic_events = 0;
  const uint32_t lat_begin = cfg_.warmup_discard;
  const uint32_t lat_end = events - cfg_.cooldown_discard;
  for (uint32_t k = 0; k < events; ++k) {
    uint32_t reached = 0;
    for (uint32_t j = 0; j < cfg_.n; ++j) {
      if (j == origin_node_[k]) continue;
      const int64_t at = first_delivery_us_[k][j];
      if (at < 0) continue;
      ++reached;
      hops_sum += static_cast<uint64_t>(delivery_hops_[k][j]);
      if (k >= lat_begin && k < lat_end)
        latencies.push_back(at - emission_us_[k]);
    }
    m.delivered_pairs += reached;
    if (reached == consumers) ++atomic_events;
  }
  m.delivery_rate = m.expected_pairs
                        ? static_cast<double>(m.delivered_pairs) /
                              static_cast<double>(m.expected_pairs)
                        : 0.0;
  m.atomic_fraction =
      events ? static_cast<double>(atomic_events) / events : 0.0;
  m.mean_hops = m.delivered_pairs ? static_cast<double>(hops_sum) /
                                        static_cast<double>(m.delivered_pairs)
                                  : 0.0;
  if (!latencies.empty()) {
    std::sort(latencies.begin(), latencies.end());
    int64_t sum = 0;
    for (int64_t v : latencies) sum += v;
    m.mean_latency_ms = static_cast<double>(sum) /
                        static_cast<double>(latencies.size()) / 1000.0;
    const size_t rank = static_cast<size_t>(
        std::ceil(0.99 * static_cast<double>(latencies.size())));
    m.p99_latency_ms =
        static_cast<double>(latencies[std::min(rank, latencies.size()) - 1]) /
        1000.0;
    m.max_latency_ms = static_cast<double>(latencies.back()) / 1000.0;
  }

  if (cfg_.protocol == Protocol::gossip) {
    for (const auto& node : nodes_) {
      m.scope_mismatches += node->scope_mismatches();
      m.dropped_replies += node->dropped_replies();
    }
  }
  return m;
}

void Simulator::write_tx_log() const {
  if (cfg_.tx_log_path.empty()) return;
  std::ofstream out(cfg_.tx_log_path, std::ios::binary);
  if (!out) throw ConfigError("cannot open tx log: " + cfg_.tx_log_path);
  out << "# scenario=" << cfg_.scenario << " n=" << cfg_.n
      << " seed=" << cfg_.seed << "\n";
  out << "# seq\tsend_us\tdeliver_us\tfrom\tto\tstatus\tkind\tdetail\n";
  for (const auto& r : records_) {
    out << r.seq << '\t' << r.send_us << '\t';
    if (r.dropped)
      out << '-';
    else
      out << r.deliver_us;
    out << '\t' << addresses_[r.from] << '\t' << addresses_[r.to] << '\t'
        << (r.dropped ? "dropped" : (r.delivered ? "delivered" : "inflight"))
        << '\t' << msg_kind_name(r.kind) << '\t' << r.detail << '\n';
  }
}

RunMetrics Simulator::run() {
  setup();
  const int64_t interval_us = cfg_.interval_ms * kMsToUs;
  horizon_us_ =
      static_cast<int64_t>(cfg_.events - 1) * interval_us + cfg_.tail_ms * kMsToUs;

  for (uint32_t k = 0; k < cfg_.events; ++k)
    queue_.push({static_cast<int64_t>(k) * interval_us, 0,
                 SimEvent::Kind::emit, 0, k});

  if (cfg_.protocol == Protocol::gossip) {
    tick_step_us_ = cfg_.tick_period_ms * kMsToUs;
    if (is_pull_variant(cfg_.gossip.variant))
      tick_step_us_ =
          std::min(tick_step_us_, cfg_.gossip.pull_period_ms * kMsToUs);
    if (cfg_.membership == MembershipMode::newscast)
      tick_step_us_ =
          std::min(tick_step_us_, cfg_.exchange_timeframe_ms * kMsToUs);
    for (uint32_t i = 0; i < cfg_.n; ++i)
      queue_.push({tick_step_us_, 0, SimEvent::Kind::tick, i, 0});
  }

  while (!queue_.empty() && queue_.top().at_us <= horizon_us_)
    process(queue_.pop());

  RunMetrics metrics = finalize();
  write_tx_log();
  return metrics;
}

RunMetrics run(SimConfig cfg) {
  Simulator sim(std::move(cfg));
  return sim.run();
}

}  // namespace gossipsim
