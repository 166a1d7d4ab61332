#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "core.hpp"
#include "rng.hpp"

using namespace gossipsim;

namespace {

constexpr int64_t kSec = 1000000;

GossipConfig cfg_push(uint32_t fanout = 2, uint32_t hops = 3,
                      int64_t id_ttl = 30000, int64_t data_ttl = 0) {
  GossipConfig cfg;
  cfg.variant = Variant::eager_push;
  cfg.fanout = fanout;
  cfg.initial_hops = hops;
  cfg.id_ttl_ms = id_ttl;
  cfg.data_ttl_ms = data_ttl;
  cfg.duplicate_policy = id_ttl == 0 ? DuplicatePolicy::balls_and_bins
                                     : DuplicatePolicy::infect_and_die;
  return cfg;
}

Node make_node(const std::string& addr, GossipConfig cfg, size_t peers) {
  Node node(addr, std::move(cfg));
  std::vector<PeerEntry> entries;
  for (size_t i = 0; i < peers; ++i)
    entries.push_back({"p" + std::to_string(i), "sim-node", "", 0});
  node.view() = make_view(peers + 4, 10 * kSec);
  merge(node.view(), entries, addr);
  return node;
}

Envelope incoming(const std::string& id, uint32_t hops, uint32_t fanout = 2,
                  int64_t id_ttl = 30000, int64_t data_ttl = 0,
                  const std::string& scope = "lan") {
  Envelope e;
  e.id = id;
  e.action = "set";
  e.payload = float_payload(21.5);
  GossipHeader h;
  h.scope = scope;
  h.fanout = fanout;
  h.hops = hops;
  h.id_ttl_ms = id_ttl;
  h.data_ttl_ms = data_ttl;
  e.header = h;
  e.origin_hops = hops + 1;
  return e;
}

Envelope incoming_query(const std::string& id, uint32_t hops,
                        const std::string& filter, uint32_t fanout = 2) {
  Envelope e = incoming(id, hops, fanout);
  e.action = "read";
  e.style = Style::request_response;
  e.reply_to = "client";
  e.header->filter = filter;
  return e;
}

size_t count_data_actions(const std::vector<Action>& actions) {
  size_t n = 0;
  for (const auto& a : actions)
    if (std::holds_alternative<PushAction>(a)) ++n;
  return n;
}

std::set<Address> action_targets(const std::vector<Action>& actions) {
  std::set<Address> out;
  for (const auto& a : actions)
    std::visit([&](const auto& act) { out.insert(act.to); }, a);
  return out;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("initiate: fanout distinct targets, local delivery, state") {
    Rng rng(1);
    auto node = make_node("self", cfg_push(8, 5, 30000, 1000), 20);
    auto actions = node.initiate("set", float_payload(21.5), Style::one_way,
                                 "", 0, rng);
    REQUIRE(actions.size() == 8);
    auto targets = action_targets(actions);
    CHECK(targets.size() == 8);
    CHECK(targets.count("self") == 0);
    for (const auto& a : actions) {
      const auto& push = std::get<PushAction>(a);
      REQUIRE(push.envelopes.size() == 1);
      const Envelope& env = push.envelopes[0];
      CHECK(env.header->hops == 5);      // wire copies carry initial_hops
      CHECK(env.origin_hops == 6);       // budget at origination
      CHECK(env.payload == float_payload(21.5));
    }
    auto delivered = node.take_delivered();
    REQUIRE(delivered.size() == 1);
    CHECK(node.has_dedup_entry(delivered[0].envelope.id));
    CHECK(node.has_store_entry(delivered[0].envelope.id));
    CHECK(node.service_value() == 21.5);
  }

  TEST_CASE("initiate: clamps to known peers") {
    Rng rng(2);
    auto node = make_node("self", cfg_push(8, 5), 3);
    auto actions =
        node.initiate("set", float_payload(1.0), Style::one_way, "", 0, rng);
    CHECK(actions.size() == 3);
  }

  TEST_CASE("initiate: empty view fails") {
    Rng rng(3);
    Node node("self", cfg_push());
    node.view() = make_view(4, 10 * kSec);
    CHECK_THROWS_AS(
        node.initiate("set", "1", Style::one_way, "", 0, rng),
        EmptyViewError);
  }

  TEST_CASE("initiate: request-response under balls-and-bins is rejected") {
    Rng rng(4);
    auto node = make_node("self", cfg_push(2, 3, 0), 5);
    CHECK_THROWS_AS(
        node.initiate("read", "", Style::request_response, "", 0, rng),
        ConfigError);
  }

  TEST_CASE("handle_receive: hops = 1 delivers without relaying") {
    Rng rng(5);
    auto node = make_node("self", cfg_push(), 6);
    auto actions = node.handle_receive(incoming("m1", 1), "p0", 0, rng);
    CHECK(actions.empty());
    CHECK(node.take_delivered().size() == 1);
  }

  TEST_CASE("handle_receive: relays with hops - 1, excluding self and sender") {
    Rng rng(6);
    auto node = make_node("self", cfg_push(2, 3), 3);  // p0 p1 p2
    auto actions = node.handle_receive(incoming("m1", 3), "p0", 0, rng);
    REQUIRE(count_data_actions(actions) == 2);
    auto targets = action_targets(actions);
    CHECK(targets == std::set<Address>{"p1", "p2"});
    for (const auto& a : actions) {
      const Envelope& env = std::get<PushAction>(a).envelopes[0];
      CHECK(env.header->hops == 2);
      Envelope expected = incoming("m1", 3);
      expected.header->hops = 2;
      CHECK(env == expected);  // relayed copy differs only in hops
    }
  }

  TEST_CASE("handle_receive: duplicate under infect-and-die is silent") {
    Rng rng(7);
    auto node = make_node("self", cfg_push(2, 3), 6);
    auto first = node.handle_receive(incoming("m1", 3), "p0", 0, rng);
    CHECK_FALSE(first.empty());
    CHECK(node.take_delivered().size() == 1);

    auto second = node.handle_receive(incoming("m1", 3), "p1", 1000, rng);
    CHECK(second.empty());
    CHECK(node.take_delivered().empty());
  }

  TEST_CASE("handle_receive: balls-and-bins relays duplicates again") {
    Rng rng(8);
    auto node = make_node("self", cfg_push(2, 3, 0), 6);
    auto first =
        node.handle_receive(incoming("m1", 3, 2, 0), "p0", 0, rng);
    auto second =
        node.handle_receive(incoming("m1", 3, 2, 0), "p1", 1000, rng);
    CHECK(count_data_actions(first) == 2);
    CHECK(count_data_actions(second) == 2);
    CHECK(node.take_delivered().size() == 2);
  }

  TEST_CASE("handle_receive: scope mismatch drops silently and counts") {
    Rng rng(9);
    auto node = make_node("self", cfg_push(), 6);
    auto actions = node.handle_receive(
        incoming("m1", 3, 2, 30000, 0, "zoneB"), "p0", 0, rng);
    CHECK(actions.empty());
    CHECK(node.take_delivered().empty());
    CHECK(node.scope_mismatches() == 1);
  }

  TEST_CASE("infect-and-die: at most one relay burst per live id") {
    Rng rng(10);
    auto node = make_node("self", cfg_push(3, 5), 10);
    size_t relays = 0;
    for (int i = 0; i < 5; ++i) {
      auto actions = node.handle_receive(
          incoming("m1", 5 - static_cast<uint32_t>(i)),
          "p" + std::to_string(i), i * 1000, rng);
      relays += count_data_actions(actions);
    }
    CHECK(relays == 3);  // only the first receive relayed
  }

  TEST_CASE("hops monotonicity: outgoing copies are one less, never <= 0") {
    Rng rng(11);
    auto node = make_node("self", cfg_push(3, 6, 0), 10);
    for (int i = 0; i < 200; ++i) {
      const uint32_t h = 1 + static_cast<uint32_t>(rng.bounded(6));
      auto actions = node.handle_receive(
          incoming("m" + std::to_string(i), h, 3, 0), "p0", i * 100, rng);
      for (const auto& a : actions) {
        if (const auto* push = std::get_if<PushAction>(&a)) {
          for (const auto& env : push->envelopes) {
            CHECK(env.header->hops == h - 1);
            CHECK(env.header->hops >= 1);
          }
        }
      }
      if (h == 1) CHECK(actions.empty());
    }
  }

  TEST_CASE("push: empty batch, sequencing, duplicate within batch") {
    Rng rng(12);
    auto node = make_node("self", cfg_push(2, 3), 6);
    CHECK(node.push(std::vector<Envelope>{}, "p0", 0, rng).empty());
    CHECK(node.take_delivered().empty());

    const std::vector<Envelope> batch{incoming("a", 3), incoming("b", 3)};
    auto actions = node.push(batch, "p0", 0, rng);
    CHECK(count_data_actions(actions) == 4);  // two relays per envelope
    CHECK(node.take_delivered().size() == 2);

    const std::vector<Envelope> dup{incoming("c", 3), incoming("c", 3)};
    node.push(dup, "p0", 0, rng);
    CHECK(node.take_delivered().size() == 1);
  }

  TEST_CASE("push_ids: set difference against dedup, store, in-flight") {
    Rng rng(13);
    auto node = make_node("self", cfg_push(2, 3, 30000, 30000), 6);
    node.handle_receive(incoming("a", 3, 2, 30000, 30000), "p0", 0, rng);

    const std::vector<MessageId> ids{"a", "b"};
    CHECK(node.push_ids(ids, "p1", 100) == std::vector<MessageId>{"b"});
    // "b" is now an in-flight fetch: a second advertisement is ignored
    CHECK(node.push_ids(ids, "p2", 200).empty());

    const std::vector<MessageId> known{"a"};
    CHECK(node.push_ids(known, "p1", 300).empty());
  }

  TEST_CASE("pull: receipt-time window") {
    Rng rng(14);
    auto node = make_node("self", cfg_push(2, 3, 30000, 60000), 6);
    CHECK(node.pull(5000, 0).empty());

    node.handle_receive(incoming("e", 3, 2, 30000, 60000), "p0", 0, rng);
    // received 2 s ago, window 5 s -> included
    auto got = node.pull(5000, 2 * kSec);
    REQUIRE(got.size() == 1);
    CHECK(got[0].id == "e");
    CHECK(got[0].header->hops == 2);  // served copies are decremented
    // received 10 s ago, window 5 s -> excluded
    CHECK(node.pull(5000, 10 * kSec).empty());
  }

  TEST_CASE("pull_ids: unexpired ids, TTL interaction with tick") {
    Rng rng(15);
    auto node = make_node("self", cfg_push(2, 3, 30000, 1000), 6);
    CHECK(node.pull_ids(0).empty());

    node.handle_receive(incoming("e1", 3, 2, 30000, 1000), "p0", 0, rng);
    node.handle_receive(incoming("e2", 3, 2, 30000, 5000), "p1", 0, rng);
    auto ids = node.pull_ids(100);
    CHECK(std::set<MessageId>(ids.begin(), ids.end()) ==
          std::set<MessageId>{"e1", "e2"});

    node.tick(2 * kSec, rng);  // e1 expired at 1 s
    CHECK(node.pull_ids(2 * kSec) == std::vector<MessageId>{"e2"});
  }

  TEST_CASE("fetch: present, absent, expired, non-retransmittable") {
    Rng rng(16);
    auto node = make_node("self", cfg_push(2, 3, 30000, 1000), 6);
    CHECK(node.fetch(std::vector<MessageId>{"x"}, 0).empty());

    node.handle_receive(incoming("a", 3, 2, 30000, 1000), "p0", 0, rng);
    node.handle_receive(incoming("t", 1, 2, 30000, 1000), "p0", 0, rng);

    auto got = node.fetch(std::vector<MessageId>{"a", "t", "x"}, 100);
    REQUIRE(got.size() == 1);  // t has hops 1: serving would hit zero
    CHECK(got[0].id == "a");
    CHECK(got[0].header->hops == 2);

    CHECK(node.fetch(std::vector<MessageId>{"a"}, 2 * kSec).empty());
  }

  TEST_CASE("handle_reply: passthrough to the stored initiator") {
    Rng rng(17);
    auto node = make_node("self", cfg_push(2, 3), 6);
    node.handle_receive(incoming_query("q1", 1, ""), "pA", 0, rng);
    // leaf: replies immediately with its own value on receive
    node.set_service_value(4.5);

    const ReplyEnvelope reply{"q1", float_payload(7.0), ""};
    auto out = node.handle_reply(reply, 100);
    REQUIRE(out.has_value());
    CHECK(out->to == "pA");
    CHECK(out->reply == reply);  // forwarded unchanged
  }

  TEST_CASE("handle_reply: unknown request id is dropped and counted") {
    Rng rng(18);
    auto node = make_node("self", cfg_push(2, 3), 6);
    CHECK_FALSE(node.handle_reply({"ghost", "1", ""}, 0).has_value());
    CHECK(node.dropped_replies() == 1);
  }

  TEST_CASE("request-response without filter replies upstream immediately") {
    Rng rng(19);
    auto node = make_node("self", cfg_push(2, 3), 6);
    node.set_service_value(3.25);
    auto actions = node.handle_receive(incoming_query("q1", 3, ""), "pA", 0, rng);
    bool found_reply = false;
    for (const auto& a : actions) {
      if (const auto* r = std::get_if<ReplyAction>(&a)) {
        found_reply = true;
        CHECK(r->to == "pA");
        CHECK(r->reply.in_reply_to == "q1");
        CHECK(r->reply.payload == float_payload(3.25));
      }
    }
    CHECK(found_reply);
  }

  TEST_CASE("max filter aggregates three replies into 9.5") {
    Rng rng(20);
    auto node = make_node("self", cfg_push(3, 4), 8);
    auto actions = node.handle_receive(incoming_query("q1", 4, "max", 3),
                                       "up", 0, rng);
    CHECK(count_data_actions(actions) == 3);
    CHECK(node.pending_count() == 1);

    CHECK_FALSE(node.handle_reply({"q1", float_payload(3.0), ""}, 10).has_value());
    CHECK_FALSE(node.handle_reply({"q1", float_payload(9.5), ""}, 20).has_value());
    auto out = node.handle_reply({"q1", float_payload(7.1), ""}, 30);
    REQUIRE(out.has_value());
    CHECK(out->to == "up");
    CHECK(out->reply.payload == float_payload(9.5));
    CHECK(node.pending_count() == 0);
  }

  TEST_CASE("aggregation folds the local value and skips faults") {
    Rng rng(21);
    auto node = make_node("self", cfg_push(2, 4), 6);
    node.set_service_value(11.0);
    node.handle_receive(incoming_query("q1", 4, "max"), "up", 0, rng);

    CHECK_FALSE(node.handle_reply({"q1", "", "duplicate"}, 10).has_value());
    auto out = node.handle_reply({"q1", float_payload(2.0), ""}, 20);
    REQUIRE(out.has_value());
    CHECK(out->reply.payload == float_payload(11.0));  // local wins
  }

  TEST_CASE("aggregation deadline resolves with what arrived") {
    Rng rng(22);
    GossipConfig cfg = cfg_push(3, 4);
    cfg.aggregation_timeout_ms = 500;
    auto node = make_node("self", cfg, 8);
    node.handle_receive(incoming_query("q1", 4, "max", 3), "up", 0, rng);
    node.handle_reply({"q1", float_payload(6.5), ""}, 1000);

    auto actions = node.tick(600 * 1000, rng);
    REQUIRE(actions.size() == 1);
    const auto& reply = std::get<ReplyAction>(actions[0]);
    CHECK(reply.to == "up");
    CHECK(reply.reply.payload == float_payload(6.5));
    CHECK(node.pending_count() == 0);
    // resolved exactly once: a later tick emits nothing
    CHECK(node.tick(700 * 1000, rng).empty());
  }

  TEST_CASE("duplicate request-response with filter answers with a fault") {
    Rng rng(23);
    auto node = make_node("self", cfg_push(2, 4), 6);
    node.handle_receive(incoming_query("q1", 4, "max"), "pA", 0, rng);
    auto actions = node.handle_receive(incoming_query("q1", 4, "max"), "pB",
                                       100, rng);
    REQUIRE(actions.size() == 1);
    const auto& reply = std::get<ReplyAction>(actions[0]);
    CHECK(reply.to == "pB");
    CHECK(reply.reply.in_reply_to == "q1");
    CHECK_FALSE(reply.reply.fault.empty());
    CHECK(node.take_delivered().size() == 1);  // delivered only once
  }

  TEST_CASE("leaf with filter replies immediately with its own value") {
    Rng rng(24);
    auto node = make_node("self", cfg_push(2, 4), 6);
    node.set_service_value(5.5);
    auto actions = node.handle_receive(incoming_query("q1", 1, "max"), "up",
                                       0, rng);
    REQUIRE(actions.size() == 1);
    const auto& reply = std::get<ReplyAction>(actions[0]);
    CHECK(reply.to == "up");
    CHECK(reply.reply.payload == float_payload(5.5));
  }

  TEST_CASE("initiate request-response: own reply lands at the root") {
    Rng rng(25);
    auto node = make_node("self", cfg_push(2, 3), 6);
    node.set_service_value(2.5);
    node.initiate("read", "", Style::request_response, "", 0, rng);
    REQUIRE(node.root_replies().size() == 1);
    CHECK(node.root_replies()[0].payload == float_payload(2.5));
  }

  TEST_CASE("tick: dedup expiry allows redelivery") {
    Rng rng(26);
    auto node = make_node("self", cfg_push(2, 3, 1000), 6);
    node.handle_receive(incoming("m1", 3, 2, 1000), "p0", 0, rng);
    CHECK(node.take_delivered().size() == 1);

    CHECK(node.handle_receive(incoming("m1", 3, 2, 1000), "p1", 500 * 1000,
                              rng).empty());

    node.tick(2 * kSec, rng);  // entry expired at 1 s
    CHECK_FALSE(node.has_dedup_entry("m1"));
    auto actions = node.handle_receive(incoming("m1", 3, 2, 1000), "p1",
                                       2 * kSec + 1, rng);
    CHECK_FALSE(actions.empty());
    CHECK(node.take_delivered().size() == 1);
  }

  TEST_CASE("tick: push variant with nothing expired does nothing") {
    Rng rng(27);
    auto node = make_node("self", cfg_push(), 6);
    CHECK(node.tick(1000, rng).empty());
  }

  TEST_CASE("tick: pull variants poll fanout peers every period") {
    for (auto variant : {Variant::eager_pull, Variant::lazy_pull}) {
      Rng rng(28);
      GossipConfig cfg = cfg_push(3, 5, 30000, 30000);
      cfg.variant = variant;
      cfg.pull_period_ms = 1000;
      auto node = make_node("self", cfg, 10);

      CHECK(node.tick(500 * 1000, rng).empty());  // before the first period
      auto actions = node.tick(1000 * 1000, rng);
      REQUIRE(actions.size() == 3);
      for (const auto& a : actions) {
        if (variant == Variant::eager_pull) {
          const auto& pull = std::get<PullAction>(a);
          CHECK(pull.window_ms == 2000);  // default window = 2 * period
        } else {
          CHECK(std::holds_alternative<PullIdsAction>(a));
        }
      }
      // catch-up: two periods elapsed -> two rounds
      CHECK(node.tick(3000 * 1000, rng).size() == 6);
    }
  }

  TEST_CASE("lazy-push switches from eager to advertisements by hop threshold") {
    Rng rng(29);
    GossipConfig cfg = cfg_push(2, 5, 30000, 30000);
    cfg.variant = Variant::lazy_push;  // default threshold: initial_hops - 2 = 3
    auto node = make_node("self", cfg, 8);

    // outgoing hops 4 > 3: still eager
    auto eager = node.handle_receive(incoming("a", 5, 2, 30000, 30000), "p0",
                                     0, rng);
    CHECK(count_data_actions(eager) == 2);

    // outgoing hops 3 <= 3: advertise instead
    auto lazy = node.handle_receive(incoming("b", 4, 2, 30000, 30000), "p0",
                                    100, rng);
    size_t ads = 0;
    for (const auto& a : lazy)
      if (const auto* adv = std::get_if<PushIdsAction>(&a)) {
        ++ads;
        CHECK(adv->ids == std::vector<MessageId>{"b"});
      }
    CHECK(ads == 2);
    CHECK(count_data_actions(lazy) == 0);
  }

  TEST_CASE("lazy-push degenerates to eager when data_ttl is zero") {
    Rng rng(30);
    GossipConfig cfg = cfg_push(2, 5, 30000, 0);
    cfg.variant = Variant::lazy_push;
    auto node = make_node("self", cfg, 8);
    auto actions = node.handle_receive(incoming("a", 2), "p0", 0, rng);
    CHECK(count_data_actions(actions) == 2);  // no advertisements possible
  }

  TEST_CASE("pull variants do not push-relay received envelopes") {
    Rng rng(31);
    GossipConfig cfg = cfg_push(3, 5, 30000, 30000);
    cfg.variant = Variant::eager_pull;
    cfg.pull_period_ms = 1000;
    auto node = make_node("self", cfg, 8);
    auto actions = node.handle_receive(incoming("a", 5, 3, 30000, 30000),
                                       "p0", 0, rng);
    CHECK(actions.empty());
    CHECK(node.take_delivered().size() == 1);
    CHECK(node.has_store_entry("a"));
  }

  TEST_CASE("config validation") {
    GossipConfig ok = cfg_push(2, 5);
    CHECK_NOTHROW(validate(ok));
    CHECK(ok.eager_hops_threshold == 3);  // derived default

    GossipConfig bad = cfg_push(0, 5);
    CHECK_THROWS_AS(validate(bad), ConfigError);

    GossipConfig mismatch = cfg_push(2, 5, 0);
    mismatch.duplicate_policy = DuplicatePolicy::infect_and_die;
    CHECK_THROWS_AS(validate(mismatch), ConfigError);

    GossipConfig pull = cfg_push(2, 5);
    pull.variant = Variant::eager_pull;
    CHECK_THROWS_AS(validate(pull), ConfigError);  // pull_period missing
    pull.pull_period_ms = 500;
    CHECK_NOTHROW(validate(pull));
    CHECK(pull.pull_window_ms == 1000);
  }

  TEST_CASE("filters") {
    const std::vector<ReplyEnvelope> replies{
        {"q", float_payload(3.0), ""},
        {"q", float_payload(-1.0), ""},
        {"q", "", "duplicate"},
    };
    CHECK(apply_filter("max", float_payload(2.0), replies) ==
          float_payload(3.0));
    CHECK(apply_filter("min", float_payload(2.0), replies) ==
          float_payload(-1.0));
    CHECK(apply_filter("sum", float_payload(2.0), replies) ==
          float_payload(4.0));
    CHECK(apply_filter("count", float_payload(2.0), replies) ==
          float_payload(3.0));  // self + two numeric children
    CHECK(is_known_filter("max"));
    CHECK_FALSE(is_known_filter("median"));
  }

  TEST_CASE("determinism: same state, inputs and seed give same actions") {
    for (int round = 0; round < 2; ++round) {
      Rng rng(77);
      auto node = make_node("self", cfg_push(3, 5), 12);
      auto a1 = node.handle_receive(incoming("m1", 5, 3), "p0", 0, rng);
      auto a2 = node.handle_receive(incoming("m2", 4, 3), "p1", 10, rng);
      static std::set<Address> first_targets;
      auto targets = action_targets(a1);
      auto t2 = action_targets(a2);
      targets.insert(t2.begin(), t2.end());
      if (round == 0)
        first_targets = targets;
      else
        CHECK(first_targets == targets);
    }
  }
}
