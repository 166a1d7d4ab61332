#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "envelope.hpp"
#include "rng.hpp"

namespace gossipsim {

// One known peer. The heartbeat counts messages observed from that peer;
// it never decreases while the entry is live.
struct PeerEntry {
  Address address;
  std::string service_type;
  std::string device_id;  // empty when the service has no device
  uint64_t heartbeat = 0;

  bool operator==(const PeerEntry&) const = default;
};

// Bounded peer cache. Entries are kept ordered by (heartbeat desc, address
// asc) so eviction and iteration are deterministic; the owner's own address
// is never stored.
struct PeerView {
  std::vector<PeerEntry> entries;
  size_t capacity = 0;
  int64_t last_exchange_us = 0;
  int64_t exchange_timeframe_us = 0;
};

PeerView make_view(size_t capacity, int64_t exchange_timeframe_us);

const PeerEntry* find_entry(const PeerView& view, const Address& address);

// min(k, eligible) distinct addresses drawn uniformly without replacement
// from the view minus `exclude`.
std::vector<Address> sample(const PeerView& view, size_t k,
                            std::span<const Address> exclude, Rng& rng);

struct ExchangeRequest {
  Address target;
  std::vector<PeerEntry> entries;
};

// Fires when no exchange has been seen for a full timeframe; stamps
// last_exchange on fire.
std::optional<ExchangeRequest> exchange_request(PeerView& view, int64_t now_us,
                                                Rng& rng);

// Union by address keeping the higher heartbeat, self filtered out, lowest
// heartbeats evicted first when over capacity (address breaks ties).
void merge(PeerView& view, std::span<const PeerEntry> remote,
           const Address& self);

// Receiver side of the shuffle: returns the pre-merge local list for the
// response, resets the exchange timer, merges the remote list.
std::vector<PeerEntry> handle_exchange_request(PeerView& view,
                                               std::span<const PeerEntry> remote,
                                               const Address& self,
                                               int64_t now_us);

// Membership events observed from the network.
struct Announce {
  PeerEntry entry;
};
struct Bye {
  Address address;
};
struct MessageFrom {
  Address address;
};
using PeerEvent = std::variant<Announce, Bye, MessageFrom>;

void observe(PeerView& view, const PeerEvent& event, const Address& self);

// Stand-in for a discovery proxy: a control-plane directory of live nodes,
// populated by start-up announcements.
class Registry {
 public:
  void announce(PeerEntry entry, std::string scope);
  void bye(const Address& address);
  std::vector<PeerEntry> snapshot(const std::string& scope) const;

 private:
  struct Row {
    PeerEntry entry;
    std::string scope;
  };
  std::vector<Row> rows_;  // announce order, unique by address
};

}  // namespace gossipsim
