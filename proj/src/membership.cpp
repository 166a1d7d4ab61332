#include "membership.hpp"

#include <algorithm>
#include <map>

namespace gossipsim {

namespace {

// Keep-worthiness: higher heartbeat first, address breaks ties.
bool stale_order(const PeerEntry& a, const PeerEntry& b) {
  if (a.heartbeat != b.heartbeat) return a.heartbeat > b.heartbeat;
  return a.address < b.address;
}

bool address_order(const PeerEntry& a, const PeerEntry& b) {
  return a.address < b.address;
}

// Evict lowest-heartbeat entries first when over capacity; the surviving
// set is deterministic and kept in address order.
void enforce_capacity(PeerView& view) {
  if (view.entries.size() <= view.capacity) return;
  std::sort(view.entries.begin(), view.entries.end(), stale_order);
  view.entries.resize(view.capacity);
  std::sort(view.entries.begin(), view.entries.end(), address_order);
}

}  // namespace

PeerView make_view(size_t capacity, int64_t exchange_timeframe_us) {
  PeerView view;
  view.capacity = capacity;
  view.exchange_timeframe_us = exchange_timeframe_us;
  return view;
}

const PeerEntry* find_entry(const PeerView& view, const Address& address) {
  for (const auto& e : view.entries)
    if (e.address == address) return &e;
  return nullptr;
}

std::vector<Address> sample(const PeerView& view, size_t k,
                            std::span<const Address> exclude, Rng& rng) {
  std::vector<Address> pool;
  pool.reserve(view.entries.size());
  for (const auto& e : view.entries) {
    bool excluded = false;
    for (const auto& x : exclude)
      if (x == e.address) {
        excluded = true;
        break;
      }
    if (!excluded) pool.push_back(e.address);
  }
  const size_t take = std::min(k, pool.size());
  // Partial Fisher-Yates: the first `take` slots end up a uniform subset.
  for (size_t i = 0; i < take; ++i) {
    const size_t j = i + static_cast<size_t>(rng.bounded(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  return pool;
}

std::optional<ExchangeRequest> exchange_request(PeerView& view, int64_t now_us,
                                                Rng& rng) {
  if (view.entries.empty()) return std::nullopt;
  if (now_us - view.last_exchange_us < view.exchange_timeframe_us)
    return std::nullopt;
  view.last_exchange_us = now_us;
  const size_t idx = static_cast<size_t>(rng.bounded(view.entries.size()));
  return ExchangeRequest{view.entries[idx].address, view.entries};
}

void merge(PeerView& view, std::span<const PeerEntry> remote,
           const Address& self) {
  std::map<Address, PeerEntry> by_address;
  for (const auto& e : view.entries) by_address[e.address] = e;
  for (const auto& e : remote) {
    if (e.address == self) continue;
    auto it = by_address.find(e.address);
    if (it == by_address.end()) {
      by_address[e.address] = e;
    } else if (e.heartbeat > it->second.heartbeat) {
      it->second = e;
    }
  }
  view.entries.clear();
  view.entries.reserve(by_address.size());
  for (auto& [addr, entry] : by_address) view.entries.push_back(entry);
  enforce_capacity(view);
}

std::vector<PeerEntry> handle_exchange_request(PeerView& view,
                                               std::span<const PeerEntry> remote,
                                               const Address& self,
                                               int64_t now_us) {
  std::vector<PeerEntry> reply = view.entries;
  view.last_exchange_us = now_us;
  merge(view, remote, self);
  return reply;
}

void observe(PeerView& view, const PeerEvent& event, const Address& self) {
  if (const auto* a = std::get_if<Announce>(&event)) {
    if (a->entry.address == self) return;
    for (auto& e : view.entries) {
      if (e.address == a->entry.address) {
        e.service_type = a->entry.service_type;
        e.device_id = a->entry.device_id;
        e.heartbeat = std::max(e.heartbeat, a->entry.heartbeat);
        return;
      }
    }
    view.entries.push_back(a->entry);
    enforce_capacity(view);
  } else if (const auto* b = std::get_if<Bye>(&event)) {
    std::erase_if(view.entries,
                  [&](const PeerEntry& e) { return e.address == b->address; });
  } else if (const auto* m = std::get_if<MessageFrom>(&event)) {
    for (auto& e : view.entries) {
      if (e.address == m->address) {
        ++e.heartbeat;
        return;
      }
    }
  }
}

void Registry::announce(PeerEntry entry, std::string scope) {
  for (auto& row : rows_) {
    if (row.entry.address == entry.address) {
      row.entry = std::move(entry);
      row.scope = std::move(scope);
      return;
    }
  }
  rows_.push_back({std::move(entry), std::move(scope)});
}

void Registry::bye(const Address& address) {
  std::erase_if(rows_,
                [&](const Row& row) { return row.entry.address == address; });
}

std::vector<PeerEntry> Registry::snapshot(const std::string& scope) const {
  std::vector<PeerEntry> out;
  for (const auto& row : rows_)
    if (row.scope == scope) out.push_back(row.entry);
  return out;
}

}  // namespace gossipsim
