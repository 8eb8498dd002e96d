#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>

#include "archer/classad/ad.hpp"
#include "archer/classad/eval.hpp"
#include "archer/overlay/node_id.hpp"

namespace archer::classad {

inline constexpr std::string_view kRequirementsAttr = "requirements";
inline constexpr std::string_view kRankAttr = "rank";

// One side of the handshake: this ad's requirements, evaluated with itself
// as "my" and the counterpart as "other". A missing requirements attribute
// evaluates to Undefined, which is a refusal.
inline Value requirements_verdict(const Ad& mine, const Ad& counterpart) {
  const ExprPtr* req = mine.lookup(kRequirementsAttr);
  if (!req) return Value::undefined();
  return evaluate(*req, mine, counterpart);
}

// Both parties must say literally true. Undefined means no match: an ad
// that cannot prove compatibility is treated as incompatible.
inline bool symmetric_match(const Ad& job, const Ad& resource) {
  return requirements_verdict(job, resource).is_true() &&
         requirements_verdict(resource, job).is_true();
}

// Job's preference for a resource. Absent or non-numeric rank scores 0.0.
inline double rank_score(const Ad& job, const Ad& resource) {
  const ExprPtr* rank = job.lookup(kRankAttr);
  if (!rank) return 0.0;
  Value v = evaluate(*rank, job, resource);
  if (!v.is_numeric()) return 0.0;
  return v.numeric();
}

struct Candidate {
  overlay::NodeId id;
  const Ad* ad;
};

// Picks the matching candidate with the highest rank; equal scores fall to
// the smaller node id so selection is order-independent.
inline std::optional<std::size_t> select_best(const Ad& job, std::span<const Candidate> candidates) {
  std::optional<std::size_t> best;
  double best_score = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!symmetric_match(job, *candidates[i].ad)) continue;
    double score = rank_score(job, *candidates[i].ad);
    if (!best || score > best_score ||
        (score == best_score && candidates[i].id < candidates[*best].id)) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

}  // namespace archer::classad
