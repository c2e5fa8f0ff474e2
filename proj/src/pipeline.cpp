#include "kfe/pipeline.hpp"

#include "kfe/hessian.hpp"
#include "kfe/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

namespace kfe {

using nlohmann::json;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

Eigen::VectorXd oracle_tag(const Pose& pose) {
  Eigen::VectorXd tag(4);
  tag << pose.t.x(), pose.t.y(), pose.t.z(), 10.0;  // lift keeps the embedding injective
  return tag;
}

Descriptor scan_descriptor(const SessionScan& scan, const DescriptorBackend& backend) {
  if (std::holds_alternative<OracleBackend>(backend)) {
    return compute_descriptor(scan.cloud, backend, oracle_tag(scan.pose));
  }
  return compute_descriptor(scan.cloud, backend);
}

SelectRunResult run_select(std::span<const SessionScan> session, const PipelineConfig& config) {
  SelectRunResult result;
  SelectorState selector(SelectorConfig{config.alpha, config.beta});
  std::vector<PreparedKeyframe> prepared;
  std::uint64_t rss_total = 0;
  Vec3 last_keyframe_pos = Vec3::Zero();  // distance policy

  SubmapConfig submap_cfg;
  submap_cfg.max_size = config.submap_size;
  submap_cfg.sensor_range = config.sensor_range;
  submap_cfg.max_corr_dist = config.max_corr_dist;
  submap_cfg.shadow_audit = config.shadow_audit;

  for (const SessionScan& scan : session) {
    double t0 = config.record_timing ? now_ms() : 0.0;

    if (scan.cloud.empty()) {  // no returns: nothing to describe or align
      SelectionLogRecord log;
      log.scan_id = scan.scan_id;
      log.feature_distance = std::numeric_limits<double>::quiet_NaN();
      log.degeneracy = std::numeric_limits<double>::infinity();
      log.running_bound = selector.suboptimality_bound().bound;
      result.selection_log.push_back(std::move(log));
      continue;
    }

    Descriptor descriptor = scan_descriptor(scan, config.backend);
    PointCloud world_cloud = transform_cloud(scan.cloud, scan.pose);
    PointCloud sub = subsample_scan(world_cloud, config.subsample_fraction,
                                    rng::derive(config.seed, scan.scan_id));
    if (sub.size() >= static_cast<std::size_t>(config.normal_k)) {
      sub = estimate_normals_covariances(sub, config.normal_k);
    }

    SubmapSelection submap;
    double degen = std::numeric_limits<double>::infinity();
    if (!prepared.empty() && !sub.empty()) {
      submap = generate_submap(sub, scan.pose.t, prepared, submap_cfg);
      DegeneracyParams params{config.sensor_range,
                              std::max<double>(1.0, static_cast<double>(submap.correspondence_count)),
                              config.beta};
      degen = degeneracy_from_lambda_min(submap.lambda_min, params);
    }

    Decision decision;
    if (config.policy == KeyframePolicy::kDescriptor) {
      decision = selector.consider(descriptor, degen);
    } else {
      decision.feature_distance = std::numeric_limits<double>::quiet_NaN();
      decision.selected = prepared.empty() ||
                          (scan.pose.t - last_keyframe_pos).norm() >= config.distance_threshold;
      decision.trigger = prepared.empty() ? Trigger::kBootstrap : Trigger::kDistance;
    }

    if (decision.selected) {
      PointCloud kf_cloud = voxel_downsample(world_cloud, config.keyframe_voxel);
      if (kf_cloud.size() >= static_cast<std::size_t>(config.normal_k)) {
        kf_cloud = estimate_normals_covariances(kf_cloud, config.normal_k);
      }
      if (config.policy == KeyframePolicy::kDescriptor) {
        result.keyframes.push_back(
            selector.commit(scan.scan_id, decision, scan.pose, kf_cloud, descriptor));
      } else {
        Keyframe kf;
        kf.id = static_cast<int>(result.keyframes.size());
        kf.scan_id = scan.scan_id;
        kf.pose = scan.pose;
        kf.cloud = kf_cloud;
        kf.descriptor = descriptor;
        kf.trigger = decision.trigger;
        result.keyframes.push_back(std::move(kf));
      }
      prepared.push_back(
          prepare_keyframe(result.keyframes.back().id, scan.pose, std::move(kf_cloud)));
      rss_total += keyframe_rss_proxy(result.keyframes.back());
      last_keyframe_pos = scan.pose.t;
    }

    double elapsed = config.record_timing ? now_ms() - t0 : 0.0;
    BoundReport bound = selector.suboptimality_bound();

    SelectionLogRecord log;
    log.scan_id = scan.scan_id;
    log.selected = decision.selected;
    log.trigger = decision.selected ? std::string(to_string(decision.trigger)) : "";
    log.feature_distance = decision.feature_distance;
    log.degeneracy = degen;
    log.gamma = decision.selected ? decision.gamma : 0.0;
    log.running_bound = bound.bound;
    result.selection_log.push_back(std::move(log));

    SubmapLogRecord srec;
    srec.scan_id = scan.scan_id;
    srec.selected_ids = submap.ids;
    srec.marginals = submap.marginal_gains;
    srec.lambda_min = submap.lambda_min;
    srec.candidates_considered = submap.candidates_considered;
    srec.candidates_pruned = submap.candidates_pruned;
    srec.elapsed_ms = elapsed;
    result.submap_log.push_back(std::move(srec));

    MetricsRecord m;
    m.scan_id = scan.scan_id;
    m.keyframe_count = static_cast<int>(result.keyframes.size());
    m.submap_size = static_cast<int>(submap.ids.size());
    m.lambda_min = submap.lambda_min;
    m.degeneracy = degen;
    m.elapsed_ms = elapsed;
    m.rss_proxy_bytes = rss_total;
    result.metrics.push_back(m);
  }

  result.final_bound = selector.suboptimality_bound();
  return result;
}

EvalRunResult run_eval(std::span<const SessionScan> session, const PipelineConfig& config,
                       int nearest_k) {
  // Identical keyframe sets for both strategies: the distance policy.
  PipelineConfig kf_config = config;
  kf_config.policy = KeyframePolicy::kDistance;
  SelectRunResult kf_run = run_select(session, kf_config);

  std::vector<PreparedKeyframe> prepared;
  prepared.reserve(kf_run.keyframes.size());
  for (const Keyframe& kf : kf_run.keyframes) {
    prepared.push_back(prepare_keyframe(kf.id, kf.pose, kf.cloud));
  }

  SubmapConfig submap_cfg;
  submap_cfg.max_size = config.submap_size;
  submap_cfg.sensor_range = config.sensor_range;
  submap_cfg.max_corr_dist = config.max_corr_dist;

  EvalRunResult result;
  for (const SessionScan& scan : session) {
    PointCloud world_cloud = transform_cloud(scan.cloud, scan.pose);
    PointCloud sub = subsample_scan(world_cloud, config.subsample_fraction,
                                    rng::derive(config.seed, scan.scan_id));
    if (sub.size() >= static_cast<std::size_t>(config.normal_k)) {
      sub = estimate_normals_covariances(sub, config.normal_k);
    }
    if (sub.empty()) continue;

    EvalRow row;
    row.scan_id = scan.scan_id;

    double t0 = config.record_timing ? now_ms() : 0.0;
    SubmapSelection greedy = generate_submap(sub, scan.pose.t, prepared, submap_cfg);
    row.greedy_ms = config.record_timing ? now_ms() - t0 : 0.0;
    row.greedy_size = static_cast<int>(greedy.ids.size());
    row.greedy_lambda_min = greedy.lambda_min;

    t0 = config.record_timing ? now_ms() : 0.0;
    std::vector<std::pair<double, int>> by_dist;
    for (const PreparedKeyframe& kf : prepared) {
      double dist = (kf.pose.t - scan.pose.t).norm();
      if (dist < 2.0 * config.sensor_range) by_dist.emplace_back(dist, kf.id);
    }
    std::sort(by_dist.begin(), by_dist.end());
    std::vector<int> nearest_ids;
    for (std::size_t i = 0; i < by_dist.size() && static_cast<int>(i) < nearest_k; ++i) {
      nearest_ids.push_back(by_dist[i].second);
    }
    SubmapScore nearest = evaluate_submap(sub, prepared, nearest_ids, config.max_corr_dist);
    row.nearest_ms = config.record_timing ? now_ms() - t0 : 0.0;
    row.nearest_size = static_cast<int>(nearest_ids.size());
    row.nearest_lambda_min = nearest.lambda_min;

    result.rows.push_back(row);
  }

  if (!result.rows.empty()) {
    double n = static_cast<double>(result.rows.size());
    for (const EvalRow& r : result.rows) {
      result.avg_greedy_size += r.greedy_size / n;
      result.avg_greedy_lambda += r.greedy_lambda_min / n;
      result.avg_greedy_ms += r.greedy_ms / n;
      result.avg_nearest_size += r.nearest_size / n;
      result.avg_nearest_lambda += r.nearest_lambda_min / n;
      result.avg_nearest_ms += r.nearest_ms / n;
    }
  }
  return result;
}

void write_selection_log(std::span<const SelectionLogRecord> records,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open '" + path.string() + "' for writing");
  for (const SelectionLogRecord& r : records) {
    json rec{{"scan_id", r.scan_id},
             {"selected", r.selected},
             {"trigger", r.trigger},
             {"d_f", finite_or_null(r.feature_distance)},
             {"degeneracy", finite_or_null(r.degeneracy)},
             {"gamma", r.gamma},
             {"running_bound", r.running_bound}};
    out << rec.dump() << "\n";
  }
}

void write_submap_log(std::span<const SubmapLogRecord> records,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open '" + path.string() + "' for writing");
  for (const SubmapLogRecord& r : records) {
    json rec{{"scan_id", r.scan_id},
             {"selected_ids", r.selected_ids},
             {"marginals", r.marginals},
             {"lambda_min", r.lambda_min},
             {"candidates_considered", r.candidates_considered},
             {"candidates_pruned", r.candidates_pruned},
             {"elapsed", r.elapsed_ms}};
    out << rec.dump() << "\n";
  }
}

void write_eval_csv(const EvalRunResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open '" + path.string() + "' for writing");
  out << "scan_id,greedy_size,greedy_lambda_min,greedy_ms,nearest_size,nearest_lambda_min,"
         "nearest_ms\n";
  for (const EvalRow& r : result.rows) {
    out << r.scan_id << "," << r.greedy_size << "," << r.greedy_lambda_min << "," << r.greedy_ms
        << "," << r.nearest_size << "," << r.nearest_lambda_min << "," << r.nearest_ms << "\n";
  }
}

}  // namespace kfe
