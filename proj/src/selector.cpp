#include "kfe/selector.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kfe {

std::string_view to_string(Trigger t) {
  switch (t) {
    case Trigger::kBootstrap: return "bootstrap";
    case Trigger::kFeature: return "feature";
    case Trigger::kDegeneracy: return "degeneracy";
    case Trigger::kDistance: return "distance";
  }
  return "unknown";
}

std::pair<double, int> min_descriptor_distance(const Descriptor& d,
                                               std::span<const Keyframe> keyframes) {
  if (keyframes.empty()) {
    throw std::invalid_argument("min_descriptor_distance: empty keyframe set");
  }
  double best = std::numeric_limits<double>::infinity();
  int best_id = -1;
  for (const Keyframe& kf : keyframes) {
    double dist = descriptor_distance(d, kf.descriptor);
    if (dist < best || (dist == best && kf.id < best_id)) {
      best = dist;
      best_id = kf.id;
    }
  }
  return {best, best_id};
}

double selection_objective(std::span<const Keyframe> keyframes) {
  double total = 0.0;
  for (std::size_t i = 1; i < keyframes.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < i; ++j) {
      best = std::min(best, descriptor_distance(keyframes[i].descriptor, keyframes[j].descriptor));
    }
    total += best;
  }
  return total;
}

SelectorState::SelectorState(SelectorConfig config) : config_(config) {
  if (!(config_.alpha > 0.0) || !(config_.alpha < 2.0)) {
    throw std::invalid_argument("SelectorState: alpha must be in (0, 2)");
  }
  if (!(config_.beta > 0.0)) {
    throw std::invalid_argument("SelectorState: beta must be positive");
  }
}

Decision SelectorState::consider(const Descriptor& descriptor, double degeneracy) const {
  Decision d;
  if (keyframes_.empty()) {
    d.selected = true;
    d.trigger = Trigger::kBootstrap;
    d.gamma = 0.0;
    d.feature_distance = std::numeric_limits<double>::quiet_NaN();
    return d;
  }
  auto [dist, id] = min_descriptor_distance(descriptor, keyframes_);
  d.feature_distance = dist;
  d.nearest_id = id;
  if (dist > config_.alpha) {
    d.selected = true;
    d.trigger = Trigger::kFeature;
    d.gamma = 0.0;
  } else if (degeneracy >= config_.beta) {
    d.selected = true;
    d.trigger = Trigger::kDegeneracy;
    d.gamma = config_.alpha - dist;  // marginal value accounted as alpha - gamma
  }
  return d;
}

const Keyframe& SelectorState::commit(int scan_id, const Decision& decision, const Pose& pose,
                                      PointCloud world_cloud, const Descriptor& descriptor) {
  if (!decision.selected) {
    throw std::invalid_argument("SelectorState::commit: decision was not a selection");
  }
  Keyframe kf;
  kf.id = static_cast<int>(keyframes_.size());
  kf.scan_id = scan_id;
  kf.pose = pose;
  kf.cloud = std::move(world_cloud);
  kf.descriptor = descriptor;
  kf.trigger = decision.trigger;
  kf.gamma = decision.gamma;

  if (decision.trigger != Trigger::kBootstrap) {
    objective_ += decision.feature_distance;  // this keyframe's term of the objective
    ++non_bootstrap_;
  }
  gamma_sum_ += decision.gamma;
  keyframes_.push_back(std::move(kf));
  return keyframes_.back();
}

Decision SelectorState::observe(int scan_id, const Descriptor& descriptor, double degeneracy,
                                const Pose& pose, PointCloud world_cloud) {
  Decision d = consider(descriptor, degeneracy);
  if (d.selected) commit(scan_id, d, pose, std::move(world_cloud), descriptor);
  return d;
}

BoundReport SelectorState::suboptimality_bound() const {
  BoundReport r;
  r.counted = non_bootstrap_;
  r.gamma_sum = gamma_sum_;
  r.bound = config_.alpha * static_cast<double>(non_bootstrap_) - gamma_sum_;
  return r;
}

}  // namespace kfe
