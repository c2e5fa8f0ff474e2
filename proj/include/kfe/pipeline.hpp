#pragma once

#include "kfe/descriptor.hpp"
#include "kfe/selector.hpp"
#include "kfe/session_io.hpp"
#include "kfe/submap.hpp"
#include "kfe/synthworld.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kfe {

enum class KeyframePolicy { kDescriptor, kDistance };

struct PipelineConfig {
  double alpha = 0.25;
  double beta = 10.0;
  int submap_size = 10;  // N
  double sensor_range = 60.0;
  double max_corr_dist = 0.5;
  double subsample_fraction = 0.25;
  double keyframe_voxel = 0.25;  // keyframe clouds are stored downsampled
  int normal_k = 10;
  std::uint64_t seed = 1;
  DescriptorBackend backend = RangeHistogramBackend{};
  KeyframePolicy policy = KeyframePolicy::kDescriptor;
  double distance_threshold = 5.0;  // distance policy: meters from last keyframe
  bool shadow_audit = false;
  bool record_timing = true;  // false pins elapsed fields to 0 for byte-stable logs
};

struct SelectionLogRecord {
  int scan_id = 0;
  bool selected = false;
  std::string trigger;  // empty when not selected
  double feature_distance = 0.0;  // NaN serialized as null
  double degeneracy = 0.0;
  double gamma = 0.0;
  double running_bound = 0.0;
};

struct SubmapLogRecord {
  int scan_id = 0;
  std::vector<int> selected_ids;
  std::vector<double> marginals;
  double lambda_min = 0.0;
  int candidates_considered = 0;
  int candidates_pruned = 0;
  double elapsed_ms = 0.0;
};

struct SelectRunResult {
  std::vector<Keyframe> keyframes;
  std::vector<SelectionLogRecord> selection_log;
  std::vector<SubmapLogRecord> submap_log;
  std::vector<MetricsRecord> metrics;
  BoundReport final_bound;
};

/// Streaming keyframe selection over a session: descriptor, submap against
/// the current keyframes, degeneracy, trigger decision, persistence records.
SelectRunResult run_select(std::span<const SessionScan> session, const PipelineConfig& config);

struct EvalRow {
  int scan_id = 0;
  int greedy_size = 0;
  double greedy_lambda_min = 0.0;
  double greedy_ms = 0.0;
  int nearest_size = 0;
  double nearest_lambda_min = 0.0;
  double nearest_ms = 0.0;
};

struct EvalRunResult {
  std::vector<EvalRow> rows;
  double avg_greedy_size = 0.0;
  double avg_greedy_lambda = 0.0;
  double avg_greedy_ms = 0.0;
  double avg_nearest_size = 0.0;
  double avg_nearest_lambda = 0.0;
  double avg_nearest_ms = 0.0;
};

/// Fig-style comparison: keyframes placed by the distance policy, then for
/// every scan an eigenvalue-greedy submap versus the k-nearest baseline,
/// both scored with the same accumulated sub-Hessian evaluation.
EvalRunResult run_eval(std::span<const SessionScan> session, const PipelineConfig& config,
                       int nearest_k);

/// Oracle-backend tag for a session pose: the position lifted to a unit
/// 4-vector so distinct positions get distinct descriptors.
Eigen::VectorXd oracle_tag(const Pose& pose);

Descriptor scan_descriptor(const SessionScan& scan, const DescriptorBackend& backend);

void write_selection_log(std::span<const SelectionLogRecord> records,
                         const std::filesystem::path& path);
void write_submap_log(std::span<const SubmapLogRecord> records,
                      const std::filesystem::path& path);
void write_eval_csv(const EvalRunResult& result, const std::filesystem::path& path);

}  // namespace kfe
