#pragma once

#include "kfe/geometry.hpp"
#include "kfe/hessian.hpp"
#include "kfe/kdtree.hpp"

#include <functional>
#include <span>
#include <vector>

namespace kfe {

/// Keyframe with a prebuilt spatial index, ready to serve as a submap
/// candidate. Built once per keyframe, read-only afterwards.
struct PreparedKeyframe {
  int id = 0;
  Pose pose;
  PointCloud cloud;  // world frame, with normals (and covariances when available)
  KdTree3 tree;
};

PreparedKeyframe prepare_keyframe(int id, const Pose& pose, PointCloud world_cloud);

struct SubmapConfig {
  int max_size = 10;           // cardinality budget N
  double sensor_range = 60.0;  // candidates farther than 2x this are gated out
  double max_corr_dist = 0.5;
  double tau_gain = 1e-9;      // stop threshold on marginal gains
  bool prune = true;           // Weyl upper-bound pruning
  bool shadow_audit = false;   // disable pruning, record every marginal (tests)
};

struct CandidateBound {
  int id = 0;
  double bound = 0.0;  // lambda_max of H_tt(scan, keyframe): caps any marginal gain
};

/// Marginal eigenvalue gains of one candidate in one greedy iteration,
/// ordered (d lambda_min, d lambda_mid, d lambda_max).
struct AuditEntry {
  int id = 0;
  Vec3 gains{0.0, 0.0, 0.0};
  double bound = 0.0;
};

struct IterationRecord {
  int chosen_id = -1;
  Vec3 gains{0.0, 0.0, 0.0};
  int evaluated = 0;
  int pruned = 0;
  std::vector<AuditEntry> audit;  // filled in shadow-audit mode only
};

struct SubmapSelection {
  std::vector<int> ids;                  // selection order
  std::vector<double> marginal_gains;    // effective gain of each accepted keyframe
  std::vector<double> lambda_min_gains;  // d lambda_min of each accepted keyframe
  double lambda_min = 0.0;               // of the accumulated Hessian
  Mat3 hessian = Mat3::Zero();
  std::size_t correspondence_count = 0;
  int candidates_considered = 0;  // marginals actually evaluated
  int candidates_pruned = 0;
  std::vector<IterationRecord> iterations;
};

/// Keyframes within twice the sensor range of the scan position (strict).
std::vector<int> candidate_gate(std::span<const PreparedKeyframe> keyframes,
                                const Vec3& scan_position, double sensor_range);

/// Per-candidate lambda_max of the scan-vs-keyframe Hessian, sorted by
/// (bound descending, id ascending).
std::vector<CandidateBound> precompute_upper_bounds(const PointCloud& scan,
                                                    std::span<const PreparedKeyframe> keyframes,
                                                    std::span<const int> candidate_ids,
                                                    double max_corr_dist);

/// Greedy submap generation maximizing lambda_min of the accumulated
/// translational Hessian. Scan points matched to an accepted keyframe are
/// removed before later candidates are matched, so each point feeds at most
/// one sub-Hessian. Candidates whose upper bound cannot beat the incumbent
/// marginal are skipped unless shadow_audit is set.
SubmapSelection generate_submap(const PointCloud& scan, const Vec3& scan_position,
                                std::span<const PreparedKeyframe> keyframes,
                                const SubmapConfig& config);

/// Accumulate sub-Hessians over a fixed keyframe order (same point-removal
/// rule as generate_submap); used to score baseline submaps consistently.
struct SubmapScore {
  Mat3 hessian = Mat3::Zero();
  double lambda_min = 0.0;
  std::size_t correspondence_count = 0;
};
SubmapScore evaluate_submap(const PointCloud& scan, std::span<const PreparedKeyframe> keyframes,
                            std::span<const int> ordered_ids, double max_corr_dist);

struct BruteForceSubmap {
  std::vector<int> ids;  // best ordered construction
  double value = 0.0;    // lambda_min achieved
};

/// Exhaustive maximum of lambda_min over all ordered constructions of size
/// <= N under the same sub-Hessian rule. Guarded to <= 12 candidates, N <= 4.
BruteForceSubmap brute_force_submap(const PointCloud& scan,
                                    std::span<const PreparedKeyframe> keyframes, int max_size,
                                    double max_corr_dist);

/// Exhaustive submodularity ratio: minimum over L subseteq base and disjoint
/// S (1 <= |S| <= kappa, S from ground \ L) of the marginal-sum ratio.
/// Pairs with near-zero denominators are skipped; 1 when nothing qualifies.
/// Guarded to ground sets of at most 10 elements.
double submodularity_ratio(const std::function<double(const std::vector<int>&)>& objective,
                           const std::vector<int>& base, const std::vector<int>& ground,
                           int kappa);

}  // namespace kfe
