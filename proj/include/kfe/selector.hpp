#pragma once

#include "kfe/descriptor.hpp"
#include "kfe/geometry.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace kfe {

enum class Trigger {
  kBootstrap,   // first scan, unconditional
  kFeature,     // descriptor distance above alpha
  kDegeneracy,  // alignment degeneracy above beta
  kDistance,    // distance-threshold baseline policy (not used by the selector)
};

std::string_view to_string(Trigger t);

struct Keyframe {
  int id = 0;       // selection order, strictly increasing
  int scan_id = 0;  // originating scan
  Pose pose;
  PointCloud cloud;  // world frame
  Descriptor descriptor;
  Trigger trigger = Trigger::kBootstrap;
  double gamma = 0.0;  // suboptimality increment; 0 unless degeneracy-triggered
};

/// Smallest descriptor distance to any keyframe and the achieving id
/// (lowest id on ties). Throws std::invalid_argument on an empty set.
std::pair<double, int> min_descriptor_distance(const Descriptor& d,
                                               std::span<const Keyframe> keyframes);

/// Sum over keyframes (chronological order) of the distance to the nearest
/// strictly earlier keyframe; empty and singleton sets score 0.
double selection_objective(std::span<const Keyframe> keyframes);

struct SelectorConfig {
  double alpha = 0.25;  // feature-distance threshold, in (0, 2)
  double beta = 10.0;   // degeneracy threshold, > 0
};

struct Decision {
  bool selected = false;
  Trigger trigger = Trigger::kBootstrap;
  double gamma = 0.0;
  double feature_distance = 0.0;  // NaN when there was no keyframe yet
  int nearest_id = -1;
};

struct BoundReport {
  double bound = 0.0;      // alpha * counted - gamma_sum
  double gamma_sum = 0.0;
  int counted = 0;         // non-bootstrap keyframes
};

/// Online keyframe selection: feature-distance trigger, degeneracy trigger,
/// and the running suboptimality ledger. Owned by one stream context;
/// mutation is serialized.
class SelectorState {
 public:
  explicit SelectorState(SelectorConfig config);

  /// Pure decision for a scan given its descriptor and the degeneracy of the
  /// most recent submap alignment.
  Decision consider(const Descriptor& descriptor, double degeneracy) const;

  /// Appends the keyframe for a positive decision (id assigned here) and
  /// updates the ledger. The decision must come from consider() on the
  /// current state.
  const Keyframe& commit(int scan_id, const Decision& decision, const Pose& pose,
                         PointCloud world_cloud, const Descriptor& descriptor);

  /// Decision plus commit: when selected, appends the keyframe and updates
  /// the ledger.
  Decision observe(int scan_id, const Descriptor& descriptor, double degeneracy,
                   const Pose& pose, PointCloud world_cloud);

  const std::vector<Keyframe>& keyframes() const { return keyframes_; }
  const SelectorConfig& config() const { return config_; }
  double gamma_sum() const { return gamma_sum_; }
  double running_objective() const { return objective_; }
  BoundReport suboptimality_bound() const;

 private:
  SelectorConfig config_;
  std::vector<Keyframe> keyframes_;
  double gamma_sum_ = 0.0;
  double objective_ = 0.0;
  int non_bootstrap_ = 0;
};

}  // namespace kfe
