#pragma once

#include <stdexcept>
#include <vector>

#include "archer/overlay/node_id.hpp"

namespace archer::overlay {

struct IsolatedNodeError : std::runtime_error {
  IsolatedNodeError() : std::runtime_error("routing: node has an empty table and is not the destination") {}
};

// Per-node view of the ring: a few exact neighbors each way plus long-range
// shortcuts sampled log-uniformly over ring distance.
struct RoutingTable {
  std::vector<NodeId> successors;    // clockwise, nearest first
  std::vector<NodeId> predecessors;  // counter-clockwise, nearest first
  std::vector<NodeId> shortcuts;

  std::vector<NodeId> all_entries() const {
    std::vector<NodeId> out;
    out.reserve(successors.size() + predecessors.size() + shortcuts.size());
    out.insert(out.end(), successors.begin(), successors.end());
    out.insert(out.end(), predecessors.begin(), predecessors.end());
    out.insert(out.end(), shortcuts.begin(), shortcuts.end());
    return out;
  }

  bool empty() const { return successors.empty() && predecessors.empty() && shortcuts.empty(); }
};

struct RouteDecision {
  bool deliver_to_self = false;
  NodeId next;  // valid only when forwarding
};

// Greedy step: forward to the entry strictly closer to dest than the owner,
// minimizing (ring distance to dest, id). Owner keeps the frame when no entry
// improves on its own distance.
inline RouteDecision route_next_hop(const RoutingTable& table, const NodeId& owner, const NodeId& dest,
                                    unsigned bits) {
  if (owner == dest) return {.deliver_to_self = true, .next = owner};
  if (table.empty()) throw IsolatedNodeError{};

  const NodeId own_dist = ring_distance(owner, dest, bits);
  bool found = false;
  NodeId best;
  NodeId best_dist;
  for (const NodeId& cand : table.all_entries()) {
    const NodeId d = ring_distance(cand, dest, bits);
    if (!(d < own_dist)) continue;
    if (!found || d < best_dist || (d == best_dist && cand < best)) {
      found = true;
      best = cand;
      best_dist = d;
    }
  }
  if (!found) return {.deliver_to_self = true, .next = owner};
  return {.deliver_to_self = false, .next = best};
}

}  // namespace archer::overlay
