#include "core.hpp"

#include <algorithm>
#include <cassert>

namespace gossipsim {

namespace {

int64_t expiry_of(const DuplicateEntry& e) { return e.expires_at_us; }
int64_t expiry_of(const PayloadEntry& e) { return e.expires_at_us; }
int64_t expiry_of(int64_t deadline) { return deadline; }

template <typename Map>
void sweep_expired(Map& map, int64_t now_us) {
  for (auto it = map.begin(); it != map.end();) {
    if (expiry_of(it->second) <= now_us)
      it = map.erase(it);
    else
      ++it;
  }
}

constexpr int64_t kMsToUs = 1000;

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::eager_push: return "eager-push";
    case Variant::lazy_push: return "lazy-push";
    case Variant::eager_pull: return "eager-pull";
    case Variant::lazy_pull: return "lazy-pull";
  }
  return "?";
}

const char* policy_name(DuplicatePolicy p) {
  return p == DuplicatePolicy::infect_and_die ? "infect-and-die"
                                              : "balls-and-bins";
}

std::optional<Variant> variant_from_name(const std::string& name) {
  if (name == "eager-push") return Variant::eager_push;
  if (name == "lazy-push") return Variant::lazy_push;
  if (name == "eager-pull") return Variant::eager_pull;
  if (name == "lazy-pull") return Variant::lazy_pull;
  return std::nullopt;
}

std::optional<DuplicatePolicy> policy_from_name(const std::string& name) {
  if (name == "infect-and-die") return DuplicatePolicy::infect_and_die;
  if (name == "balls-and-bins") return DuplicatePolicy::balls_and_bins;
  return std::nullopt;
}

bool is_pull_variant(Variant v) {
  return v == Variant::eager_pull || v == Variant::lazy_pull;
}

void validate(GossipConfig& cfg) {
  if (cfg.fanout < 1) throw ConfigError("fanout must be >= 1");
  if (cfg.initial_hops < 1) throw ConfigError("hops must be >= 1");
  if (cfg.id_ttl_ms < 0 || cfg.data_ttl_ms < 0)
    throw ConfigError("TTLs must be non-negative");
  const bool bb = cfg.duplicate_policy == DuplicatePolicy::balls_and_bins;
  if (bb != (cfg.id_ttl_ms == 0))
    throw ConfigError("balls-and-bins requires id_ttl = 0 and vice versa");
  if (is_pull_variant(cfg.variant) && cfg.pull_period_ms <= 0)
    throw ConfigError("pull variants require pull_period > 0");
  if (cfg.aggregation_timeout_ms <= 0)
    throw ConfigError("aggregation_timeout must be > 0");
  if (cfg.fetch_retry_ms <= 0) throw ConfigError("fetch_retry must be > 0");
  if (cfg.eager_hops_threshold == 0)
    cfg.eager_hops_threshold =
        cfg.initial_hops > 2 ? cfg.initial_hops - 2 : 1;
  if (cfg.pull_window_ms == 0) cfg.pull_window_ms = 2 * cfg.pull_period_ms;
}

Node::Node(Address address, GossipConfig cfg)
    : address_(std::move(address)), cfg_(std::move(cfg)) {
  validate(cfg_);
}

std::string Node::local_reply_payload() const {
  return float_payload(service_value_);
}

void Node::deliver_local(const Envelope& env, int64_t now_us) {
  if (env.action == "set") {
    if (auto v = parse_float_payload(env.payload)) service_value_ = *v;
  }
  delivered_.push_back({env, now_us});
}

std::vector<Address> Node::relay_targets(const GossipHeader& header,
                                         const Address& from, int64_t now_us,
                                         Rng& rng) {
  (void)now_us;
  std::vector<Address> exclude{address_};
  if (!from.empty()) exclude.push_back(from);
  const size_t k = std::min<size_t>(header.fanout, view_.entries.size());
  return sample(view_, k, exclude, rng);
}

Action Node::make_relay(const Address& to, const Envelope& outgoing) const {
  assert(outgoing.header && outgoing.header->hops >= 1);
  const bool lazy_capable =
      cfg_.variant == Variant::lazy_push && outgoing.header->data_ttl_ms > 0;
  if (lazy_capable && outgoing.header->hops <= cfg_.eager_hops_threshold)
    return PushIdsAction{to, {outgoing.id}};
  return PushAction{to, {outgoing}};
}

std::vector<Action> Node::initiate(const std::string& action,
                                   std::string payload, Style style,
                                   const std::string& filter, int64_t now_us,
                                   Rng& rng) {
  if (view_.entries.empty())
    throw EmptyViewError(address_ + " knows no peers");
  if (style == Style::request_response && cfg_.id_ttl_ms == 0)
    throw ConfigError(
        "request-response needs duplicate detection (id_ttl > 0)");
  if (!filter.empty() && !is_known_filter(filter))
    throw ConfigError("unknown filter: " + filter);

  Envelope env;
  env.id = address_ + "-m" + std::to_string(origin_counter_++);
  env.action = action;
  env.style = style;
  if (style == Style::request_response) env.reply_to = address_;
  env.payload = std::move(payload);
  GossipHeader header;
  header.scope = cfg_.scope;
  header.fanout = cfg_.fanout;
  // The origination copy carries one extra hop: every transmission,
  // including the first, decrements, so wire copies leave with
  // hops = initial_hops and a receiver's depth is origin_hops - hops.
  header.hops = cfg_.initial_hops + 1;
  header.id_ttl_ms = cfg_.id_ttl_ms;
  header.data_ttl_ms = cfg_.data_ttl_ms;
  header.filter = filter;
  env.header = header;
  env.origin_hops = header.hops;
  validate(env);

  if (cfg_.id_ttl_ms > 0)
    dedup_[env.id] = {now_us + cfg_.id_ttl_ms * kMsToUs, std::nullopt};
  if (cfg_.data_ttl_ms > 0)
    store_[env.id] = {env, now_us, now_us + cfg_.data_ttl_ms * kMsToUs};
  deliver_local(env, now_us);

  const auto targets = relay_targets(header, Address{}, now_us, rng);
  Envelope outgoing = env;
  outgoing.header->hops -= 1;
  std::vector<Action> actions;
  actions.reserve(targets.size());
  for (const auto& t : targets) actions.push_back(make_relay(t, outgoing));

  if (style == Style::request_response && !filter.empty()) {
    PendingAggregation agg;
    agg.upstream = Address{};  // origin
    agg.filter = filter;
    agg.expected = targets.size();
    agg.local_payload = local_reply_payload();
    agg.deadline_us = now_us + cfg_.aggregation_timeout_ms * kMsToUs;
    pending_[env.id] = std::move(agg);
    if (targets.empty()) resolve_aggregation(env.id);
  } else if (style == Style::request_response) {
    root_replies_.push_back({env.id, local_reply_payload(), {}});
  }
  return actions;
}

std::vector<Action> Node::handle_receive(const Envelope& env,
                                         const Address& from, int64_t now_us,
                                         Rng& rng) {
  assert(env.header.has_value());
  const GossipHeader& header = *env.header;
  std::vector<Action> actions;

  if (header.scope != cfg_.scope) {
    ++scope_mismatches_;
    return actions;
  }

  // Duplicate policy is carried by the header: id_ttl = 0 degenerates to
  // balls-and-bins (no state, duplicates relay again).
  const bool track_ids = header.id_ttl_ms > 0;
  if (track_ids) {
    auto it = dedup_.find(env.id);
    if (it != dedup_.end() && it->second.expires_at_us <= now_us)
      dedup_.erase(it), it = dedup_.end();
    if (it != dedup_.end()) {
      // Already infected. Request-response targets still owe the sender a
      // reply ("with a value or with a fault") so its aggregation can
      // complete without waiting for the timeout.
      if (env.style == Style::request_response && !header.filter.empty())
        actions.push_back(
            ReplyAction{from, ReplyEnvelope{env.id, {}, "duplicate"}});
      return actions;
    }
    dedup_[env.id] = {now_us + header.id_ttl_ms * kMsToUs, from};
  }
  if (header.data_ttl_ms > 0)
    store_[env.id] = {env, now_us, now_us + header.data_ttl_ms * kMsToUs};
  requested_.erase(env.id);

  deliver_local(env, now_us);

  std::vector<Address> targets;
  const bool relays = !is_pull_variant(cfg_.variant) && header.hops > 1;
  if (relays) {
    targets = relay_targets(header, from, now_us, rng);
    Envelope outgoing = env;
    outgoing.header->hops -= 1;
    for (const auto& t : targets) actions.push_back(make_relay(t, outgoing));
  }

  if (env.style == Style::request_response) {
    if (!header.filter.empty()) {
      PendingAggregation agg;
      agg.upstream = from;
      agg.filter = header.filter;
      agg.expected = targets.size();
      agg.local_payload = local_reply_payload();
      agg.deadline_us = now_us + cfg_.aggregation_timeout_ms * kMsToUs;
      pending_[env.id] = std::move(agg);
      if (targets.empty()) {
        if (auto out = resolve_aggregation(env.id)) actions.push_back(*out);
      }
    } else {
      actions.push_back(
          ReplyAction{from, ReplyEnvelope{env.id, local_reply_payload(), {}}});
    }
  }
  return actions;
}

std::vector<Action> Node::push(std::span<const Envelope> envelopes,
                               const Address& from, int64_t now_us, Rng& rng) {
  std::vector<Action> actions;
  for (const auto& env : envelopes) {
    auto part = handle_receive(env, from, now_us, rng);
    actions.insert(actions.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
  }
  return actions;
}

std::vector<MessageId> Node::push_ids(std::span<const MessageId> ids,
                                      const Address& from, int64_t now_us) {
  (void)from;
  std::vector<MessageId> wanted;
  for (const auto& id : ids) {
    auto d = dedup_.find(id);
    if (d != dedup_.end() && d->second.expires_at_us > now_us) continue;
    auto s = store_.find(id);
    if (s != store_.end() && s->second.expires_at_us > now_us) continue;
    auto r = requested_.find(id);
    if (r != requested_.end() && r->second > now_us) continue;
    if (std::find(wanted.begin(), wanted.end(), id) != wanted.end()) continue;
    requested_[id] = now_us + cfg_.fetch_retry_ms * kMsToUs;
    wanted.push_back(id);
  }
  return wanted;
}

std::vector<Envelope> Node::pull(int64_t window_ms, int64_t now_us) {
  std::vector<Envelope> out;
  const int64_t from_us = now_us - window_ms * kMsToUs;
  for (const auto& [id, entry] : store_) {
    if (entry.expires_at_us <= now_us) continue;
    if (entry.received_at_us < from_us || entry.received_at_us > now_us)
      continue;
    if (!entry.envelope.header || entry.envelope.header->hops < 2) continue;
    Envelope copy = entry.envelope;
    copy.header->hops -= 1;
    out.push_back(std::move(copy));
  }
  return out;
}

std::vector<MessageId> Node::pull_ids(int64_t now_us) {
  std::vector<MessageId> out;
  for (const auto& [id, entry] : store_)
    if (entry.expires_at_us > now_us) out.push_back(id);
  return out;
}

std::vector<Envelope> Node::fetch(std::span<const MessageId> ids,
                                  int64_t now_us) {
  std::vector<Envelope> out;
  for (const auto& id : ids) {
    auto it = store_.find(id);
    if (it == store_.end() || it->second.expires_at_us <= now_us) continue;
    if (!it->second.envelope.header || it->second.envelope.header->hops < 2)
      continue;
    Envelope copy = it->second.envelope;
    copy.header->hops -= 1;
    out.push_back(std::move(copy));
  }
  return out;
}

std::optional<ReplyAction> Node::resolve_aggregation(const MessageId& id) {
  auto it = pending_.find(id);
  if (it == pending_.end()) return std::nullopt;
  PendingAggregation agg = std::move(it->second);
  pending_.erase(it);  // resolved exactly once
  ReplyEnvelope reply{id, apply_filter(agg.filter, agg.local_payload,
                                       agg.received),
                      {}};
  if (agg.upstream.empty()) {
    root_replies_.push_back(std::move(reply));
    return std::nullopt;
  }
  return ReplyAction{agg.upstream, std::move(reply)};
}

std::optional<ReplyAction> Node::handle_reply(const ReplyEnvelope& reply,
                                              int64_t now_us) {
  auto p = pending_.find(reply.in_reply_to);
  if (p != pending_.end()) {
    p->second.received.push_back(reply);
    if (p->second.received.size() >= p->second.expected)
      return resolve_aggregation(reply.in_reply_to);
    return std::nullopt;
  }
  auto d = dedup_.find(reply.in_reply_to);
  if (d == dedup_.end() || d->second.expires_at_us <= now_us) {
    ++dropped_replies_;
    return std::nullopt;
  }
  if (!d->second.initiator) {
    root_replies_.push_back(reply);
    return std::nullopt;
  }
  return ReplyAction{*d->second.initiator, reply};
}

std::vector<Action> Node::tick(int64_t now_us, Rng& rng) {
  std::vector<Action> actions;
  sweep_expired(dedup_, now_us);
  sweep_expired(store_, now_us);
  sweep_expired(requested_, now_us);

  std::vector<MessageId> due;
  for (const auto& [id, agg] : pending_)
    if (agg.deadline_us <= now_us) due.push_back(id);
  for (const auto& id : due)
    if (auto out = resolve_aggregation(id)) actions.push_back(*out);

  if (is_pull_variant(cfg_.variant)) {
    if (next_pull_at_us_ < 0)
      next_pull_at_us_ = cfg_.pull_period_ms * kMsToUs;
    while (next_pull_at_us_ <= now_us) {
      next_pull_at_us_ += cfg_.pull_period_ms * kMsToUs;
      const auto targets =
          sample(view_, cfg_.fanout, std::vector<Address>{address_}, rng);
      for (const auto& t : targets) {
        if (cfg_.variant == Variant::eager_pull)
          actions.push_back(PullAction{t, cfg_.pull_window_ms});
        else
          actions.push_back(PullIdsAction{t});
      }
    }
  }

  if (newscast_) {
    if (auto req = exchange_request(view_, now_us, rng))
      actions.push_back(ExchangeAction{req->target, std::move(req->entries)});
  }
  return actions;
}

std::vector<Delivery> Node::take_delivered() {
  std::vector<Delivery> out;
  out.swap(delivered_);
  return out;
}

bool is_known_filter(const std::string& filter) {
  return filter == "max" || filter == "min" || filter == "sum" ||
         filter == "count";
}

std::string apply_filter(const std::string& filter,
                         const std::string& local_payload,
                         std::span<const ReplyEnvelope> replies) {
  // count aggregates subtree sizes; the other filters fold numeric payloads.
  double acc = filter == "count" ? 1.0
                                 : parse_float_payload(local_payload).value_or(0.0);
  for (const auto& r : replies) {
    if (!r.fault.empty()) continue;
    const auto v = parse_float_payload(r.payload);
    if (!v) continue;
    if (filter == "max")
      acc = std::max(acc, *v);
    else if (filter == "min")
      acc = std::min(acc, *v);
    else  // sum, count
      acc += *v;
  }
  return float_payload(acc);
}

}  // namespace gossipsim
