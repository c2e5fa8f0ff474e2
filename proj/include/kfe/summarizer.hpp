#pragma once

#include "kfe/descriptor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace kfe {

/// The auxiliary element e0 (zero vector) sits at distance exactly 1 from
/// every unit descriptor; loss terms are capped there.
inline constexpr double kAuxDistance = 1.0;

/// Average distance from each scan's descriptor to its nearest keyframe.
/// With `with_aux`, the auxiliary element joins the keyframe set (so the
/// per-scan distance is capped at 1). Throws when the keyframe set is empty
/// and the auxiliary element is not included.
double kmedoid_loss(std::span<const Descriptor> keyframes, std::span<const Descriptor> scans,
                    bool with_aux = false);

/// Summarization objective: L(e0) - L(K union e0), computed as the mean
/// per-scan improvement so f(empty) is exactly 0 and f <= 1.
double summary_objective(std::span<const Descriptor> keyframes,
                         std::span<const Descriptor> scans);

/// Same objective on a subset of the scans themselves, identified by index.
double summary_objective_ids(std::span<const Descriptor> scans, std::span<const int> ids);

/// Marginal gain of adding scan `e` to the subset `ids` (mean improvement of
/// capped min distances). Matches the evaluators used by greedy and sieve.
double summary_marginal(std::span<const Descriptor> scans, std::span<const int> ids, int e);

struct SummaryResult {
  std::vector<int> ids;                      // selected scan indices, ascending
  double objective = 0.0;                    // fresh evaluation of the returned set
  double loss = 0.0;                         // L(ids union e0)
  std::size_t marginal_evaluations = 0;      // objective-marginal calls
  int guesses = 0;                           // sieve only: grid size
};

/// Single-pass sieve-streaming maximization with the instance-independent
/// guess grid {(1+eps)^i : 1 <= (1+eps)^i <= k} (the max singleton value on
/// the unit sphere with e0 is 1). Per element and guess, one marginal
/// evaluation against that guess's cached state; candidate sets never exceed
/// k elements and previously streamed elements are never revisited.
SummaryResult sieve_stream_summarize(std::span<const Descriptor> scans, int k, double epsilon);

/// Exact best-marginal greedy; one pass over the dataset per selected
/// element, ties to the lowest scan id.
SummaryResult greedy_summarize(std::span<const Descriptor> scans, int k);

/// Exhaustive optimum over all k-subsets. Guarded to |E| <= 20, k <= 4.
SummaryResult brute_force_summary(std::span<const Descriptor> scans, int k);

}  // namespace kfe
