// kfe: keyframe selection, eigenvalue-optimal submaps, and map summarization
// for LiDAR-style point-cloud streams, on synthetic ray-cast worlds.
//
// Subcommands: simulate, select, submap, summarize, eval.
// Exit codes: 0 success, 2 usage or input error, 3 internal error.

#include "kfe/parallel.hpp"
#include "kfe/pipeline.hpp"
#include "kfe/rng.hpp"
#include "kfe/session_io.hpp"
#include "kfe/summarizer.hpp"
#include "kfe/synthworld.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

// Expands --config file.json into synthetic "--key=value" arguments placed
// before the user's flags, so explicit flags override the file.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw kfe::io_error("cannot open config file '" + config_path + "'");
  json doc = json::parse(in, nullptr, true, true);

  std::vector<std::string> expanded;
  // Keep the subcommand name (first non-flag argument) in front.
  std::size_t insert_at = 0;
  if (!args.empty() && !args[0].empty() && args[0][0] != '-') {
    expanded.push_back(args[0]);
    insert_at = 1;
  }
  auto given_on_cli = [&](const std::string& key) {
    std::string flag = "--" + key;
    for (const std::string& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  for (const auto& [key, value] : doc.items()) {
    if (given_on_cli(key)) continue;  // explicit flags win
    if (value.is_boolean()) {
      if (value.get<bool>()) expanded.push_back("--" + key);
    } else if (value.is_string()) {
      expanded.push_back("--" + key + "=" + value.get<std::string>());
    } else if (value.is_number() || value.is_number_integer()) {
      expanded.push_back("--" + key + "=" + value.dump());
    }
  }
  for (std::size_t i = insert_at; i < args.size(); ++i) expanded.push_back(args[i]);
  return expanded;
}

struct CommonOptions {
  double alpha = 0.25;
  double beta = 10.0;
  int submap_size = 10;
  double sensor_range = 60.0;
  double max_corr_dist = 0.5;
  double fraction = 0.25;
  double keyframe_voxel = 0.25;
  int normal_k = 10;
  std::uint64_t seed = 1;
  std::string backend = "range-histogram";
  int descriptor_dim = kfe::kDefaultDescriptorDim;
  std::string policy = "descriptor";
  bool no_timing = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--alpha", o.alpha, "Feature-distance threshold, in (0,2)")
      ->capture_default_str();
  cmd->add_option("--beta", o.beta, "Degeneracy threshold")->capture_default_str();
  cmd->add_option("--submap-size", o.submap_size, "Submap cardinality budget N")
      ->capture_default_str();
  cmd->add_option("--sensor-range", o.sensor_range, "Sensor max range, meters")
      ->capture_default_str();
  cmd->add_option("--corr-dist", o.max_corr_dist, "Correspondence max distance, meters")
      ->capture_default_str();
  cmd->add_option("--fraction", o.fraction, "Scan subsample fraction, in (0,1]")
      ->capture_default_str();
  cmd->add_option("--keyframe-voxel", o.keyframe_voxel, "Keyframe cloud voxel size, meters")
      ->capture_default_str();
  cmd->add_option("--normal-k", o.normal_k, "Neighborhood size for normal estimation")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  cmd->add_option("--backend", o.backend, "Descriptor backend: range-histogram | oracle")
      ->capture_default_str();
  cmd->add_option("--descriptor-dim", o.descriptor_dim, "Descriptor dimension p")
      ->capture_default_str();
  cmd->add_option("--policy", o.policy,
                  "Keyframe policy: descriptor | distance:<meters>")
      ->capture_default_str();
  cmd->add_flag("--no-timing", o.no_timing, "Pin elapsed fields to 0 for reproducible logs");
  cmd->add_option("--config", "JSON config file; explicit flags override")
      ->expected(1);
}

kfe::PipelineConfig to_pipeline_config(const CommonOptions& o) {
  kfe::PipelineConfig c;
  c.alpha = o.alpha;
  c.beta = o.beta;
  c.submap_size = o.submap_size;
  c.sensor_range = o.sensor_range;
  c.max_corr_dist = o.max_corr_dist;
  c.subsample_fraction = o.fraction;
  c.keyframe_voxel = o.keyframe_voxel;
  c.normal_k = o.normal_k;
  c.seed = o.seed;
  c.record_timing = !o.no_timing;
  if (o.backend == "oracle") {
    c.backend = kfe::OracleBackend{o.seed, o.descriptor_dim};
  } else if (o.backend == "range-histogram") {
    kfe::RangeHistogramBackend b;
    b.dim = o.descriptor_dim;
    b.max_range = o.sensor_range;
    c.backend = b;
  } else {
    throw CLI::ValidationError("--backend", "unknown backend '" + o.backend + "'");
  }
  if (o.policy == "descriptor") {
    c.policy = kfe::KeyframePolicy::kDescriptor;
  } else if (o.policy.rfind("distance:", 0) == 0) {
    c.policy = kfe::KeyframePolicy::kDistance;
    std::string v = o.policy.substr(9);
    if (!v.empty() && v.back() == 'm') v.pop_back();
    c.distance_threshold = std::stod(v);
  } else {
    throw CLI::ValidationError("--policy", "unknown policy '" + o.policy + "'");
  }
  return c;
}

std::string backend_label(const kfe::DescriptorBackend& b) {
  if (const auto* rh = std::get_if<kfe::RangeHistogramBackend>(&b)) {
    return "range-histogram(" + std::to_string(rh->rows) + "x" + std::to_string(rh->cols) +
           ",dim=" + std::to_string(rh->dim) + ")";
  }
  const auto& ob = std::get<kfe::OracleBackend>(b);
  return "oracle(seed=" + std::to_string(ob.seed) + ",dim=" + std::to_string(ob.dim) + ")";
}

int descriptor_dim_of(const kfe::DescriptorBackend& b) {
  if (const auto* rh = std::get_if<kfe::RangeHistogramBackend>(&b)) return rh->dim;
  return std::get<kfe::OracleBackend>(b).dim;
}

// ---- simulate ----------------------------------------------------------

int cmd_simulate(const std::string& preset, const std::string& world_file,
                 const std::string& out_dir, double interval, int rings, int steps, double range,
                 double sigma, std::uint64_t seed) {
  kfe::WorldSpec spec;
  kfe::Trajectory traj;
  if (!world_file.empty()) {
    kfe::WorldDocument doc = kfe::load_world_json(world_file);
    spec = doc.spec;
    traj = doc.trajectory;
  } else {
    spec = kfe::preset_world(preset, seed);
    traj = kfe::preset_trajectory(preset);
  }
  if (interval > 0.0) traj.scan_interval = interval;

  kfe::BeamPattern pattern;
  pattern.rings = rings;
  pattern.azimuth_steps = steps;
  pattern.max_range = range;
  pattern.noise_sigma = sigma;

  kfe::World world(spec);
  auto session = kfe::generate_session(world, traj, pattern, seed);
  kfe::save_session(session, out_dir);
  std::cout << "wrote " << session.size() << " scans to " << out_dir << "\n";
  return kExitOk;
}

// ---- select ------------------------------------------------------------

int cmd_select(const std::string& session_dir, const std::string& out_dir,
               const CommonOptions& opts, const std::string& metrics_format) {
  auto session = kfe::load_session(session_dir);
  kfe::PipelineConfig config = to_pipeline_config(opts);
  kfe::SelectRunResult run = kfe::run_select(session, config);

  fs::create_directories(out_dir);
  kfe::DatabaseInfo info;
  info.descriptor_dim = descriptor_dim_of(config.backend);
  info.backend = backend_label(config.backend);
  kfe::save_database(run.keyframes, info, fs::path(out_dir) / "db");
  kfe::write_selection_log(run.selection_log, fs::path(out_dir) / "selection.jsonl");
  kfe::write_submap_log(run.submap_log, fs::path(out_dir) / "submap.jsonl");
  kfe::write_metrics(run.metrics, fs::path(out_dir) / ("metrics." + metrics_format),
                     metrics_format == "json" ? kfe::MetricsFormat::kJson
                                              : kfe::MetricsFormat::kCsv);

  std::cout << "scans: " << session.size() << "\n"
            << "keyframes: " << run.keyframes.size() << "\n"
            << "bound: " << run.final_bound.bound << " (gamma sum " << run.final_bound.gamma_sum
            << ", counted " << run.final_bound.counted << ")\n";
  return kExitOk;
}

// ---- submap ------------------------------------------------------------

int cmd_submap(const std::string& session_dir, const std::string& db_dir,
               const std::string& out_file, const CommonOptions& opts) {
  auto session = kfe::load_session(session_dir);
  kfe::LoadedDatabase db = kfe::load_database(db_dir);

  std::vector<kfe::PreparedKeyframe> prepared;
  for (const kfe::Keyframe& kf : db.keyframes) {
    kfe::PointCloud cloud = kf.cloud;
    if (!cloud.has_normals() && cloud.size() >= static_cast<std::size_t>(opts.normal_k)) {
      cloud = kfe::estimate_normals_covariances(cloud, opts.normal_k);
    }
    prepared.push_back(kfe::prepare_keyframe(kf.id, kf.pose, std::move(cloud)));
  }

  kfe::SubmapConfig scfg;
  scfg.max_size = opts.submap_size;
  scfg.sensor_range = opts.sensor_range;
  scfg.max_corr_dist = opts.max_corr_dist;

  std::vector<kfe::SubmapLogRecord> records;
  for (const auto& scan : session) {
    if (scan.cloud.empty()) continue;
    double t0 = opts.no_timing ? 0.0 : now_ms();
    kfe::PointCloud world_cloud = kfe::transform_cloud(scan.cloud, scan.pose);
    kfe::PointCloud sub = kfe::subsample_scan(world_cloud, opts.fraction,
                                              kfe::rng::derive(opts.seed, scan.scan_id));
    if (sub.size() >= static_cast<std::size_t>(opts.normal_k)) {
      sub = kfe::estimate_normals_covariances(sub, opts.normal_k);
    }
    kfe::SubmapSelection sel = kfe::generate_submap(sub, scan.pose.t, prepared, scfg);

    kfe::SubmapLogRecord rec;
    rec.scan_id = scan.scan_id;
    rec.selected_ids = sel.ids;
    rec.marginals = sel.marginal_gains;
    rec.lambda_min = sel.lambda_min;
    rec.candidates_considered = sel.candidates_considered;
    rec.candidates_pruned = sel.candidates_pruned;
    rec.elapsed_ms = opts.no_timing ? 0.0 : now_ms() - t0;
    records.push_back(std::move(rec));
  }
  kfe::write_submap_log(records, out_file);
  std::cout << "wrote " << records.size() << " submap records to " << out_file << "\n";
  return kExitOk;
}

// ---- summarize ---------------------------------------------------------

int cmd_summarize(const std::string& session_dir, const std::string& db_dir, int k,
                  std::uint64_t byte_budget, double epsilon, const std::string& method,
                  const std::string& out_file, const std::string& merged_ply,
                  const CommonOptions& opts) {
  std::vector<kfe::Descriptor> descriptors;
  std::vector<kfe::PointCloud> clouds;
  std::vector<kfe::Pose> poses;
  std::vector<int>source_ids;

  if (!db_dir.empty()) {
    kfe::LoadedDatabase db = kfe::load_database(db_dir);
    for (const kfe::Keyframe& kf : db.keyframes) {
      descriptors.push_back(kf.descriptor);
      clouds.push_back(kf.cloud);
      poses.push_back(kf.pose);
      source_ids.push_back(kf.id);
    }
  } else {
    auto session = kfe::load_session(session_dir);
    kfe::PipelineConfig config = to_pipeline_config(opts);
    for (const auto& scan : session) {
      if (scan.cloud.empty()) continue;
      descriptors.push_back(kfe::scan_descriptor(scan, config.backend));
      clouds.push_back(kfe::transform_cloud(scan.cloud, scan.pose));
      poses.push_back(scan.pose);
      source_ids.push_back(scan.scan_id);
    }
  }
  if (descriptors.empty()) {
    throw kfe::io_error("no scans or keyframes to summarize");
  }

  if (byte_budget > 0) {
    // Convert the byte budget to k via the median serialized element size.
    std::vector<std::uint64_t> sizes;
    for (std::size_t i = 0; i < clouds.size(); ++i) {
      std::uint64_t bytes = 4 + 8 * static_cast<std::uint64_t>(descriptors[i].size());
      bytes += clouds[i].points.size() * sizeof(kfe::Vec3);
      bytes += clouds[i].normals.size() * sizeof(kfe::Vec3);
      sizes.push_back(bytes);
    }
    std::vector<std::uint64_t> sorted = sizes;
    std::sort(sorted.begin(), sorted.end());
    std::uint64_t median = sorted[sorted.size() / 2];
    k = static_cast<int>(byte_budget / std::max<std::uint64_t>(1, median));
    if (k < 1) {
      std::cerr << "error: byte budget smaller than one median keyframe (" << median
                << " bytes)\n";
      return kExitUsage;
    }
    k = std::min<int>(k, static_cast<int>(descriptors.size()));
  }
  if (k < 1) {
    std::cerr << "error: k must be >= 1\n";
    return kExitUsage;
  }

  double t0 = now_ms();
  kfe::SummaryResult res;
  if (method == "greedy") {
    res = kfe::greedy_summarize(descriptors, k);
  } else if (method == "sieve") {
    res = kfe::sieve_stream_summarize(descriptors, k, epsilon);
  } else {
    std::cerr << "error: unknown method '" << method << "'\n";
    return kExitUsage;
  }
  double elapsed = now_ms() - t0;

  // Trim to the byte budget if measured sizes overshoot (drop latest picks).
  if (byte_budget > 0) {
    auto total_bytes = [&]() {
      std::uint64_t total = 0;
      for (int i : res.ids) {
        total += 4 + 8 * static_cast<std::uint64_t>(descriptors[i].size());
        total += clouds[i].points.size() * sizeof(kfe::Vec3);
        total += clouds[i].normals.size() * sizeof(kfe::Vec3);
      }
      return total;
    };
    while (!res.ids.empty() && total_bytes() > byte_budget) res.ids.pop_back();
    res.objective = kfe::summary_objective_ids(descriptors, res.ids);
  }

  json manifest;
  json ids = json::array();
  for (int i : res.ids) ids.push_back(source_ids[i]);
  manifest["selected_ids"] = std::move(ids);
  manifest["objective"] = res.objective;
  manifest["loss"] = res.loss;
  manifest["k"] = k;
  manifest["method"] = method;
  manifest["epsilon"] = epsilon;
  manifest["marginal_evaluations"] = res.marginal_evaluations;
  manifest["guesses"] = res.guesses;
  manifest["elapsed_ms"] = opts.no_timing ? 0.0 : elapsed;
  std::ofstream out(out_file);
  if (!out) throw kfe::io_error("cannot write '" + out_file + "'");
  out << manifest.dump(2) << "\n";

  if (!merged_ply.empty()) {
    kfe::PointCloud merged;
    for (int i : res.ids) {
      for (const auto& p : clouds[i].points) merged.points.push_back(p);
    }
    kfe::save_ply(merged, merged_ply);
  }

  std::cout << "selected " << res.ids.size() << " of " << descriptors.size()
            << " | f = " << res.objective << " | loss = " << res.loss << " | evals = "
            << res.marginal_evaluations << " | " << elapsed << " ms\n";
  return kExitOk;
}

// ---- eval --------------------------------------------------------------

int cmd_eval(const std::string& session_dir, const std::string& out_file, int nearest_k,
             const CommonOptions& opts) {
  auto session = kfe::load_session(session_dir);
  kfe::PipelineConfig config = to_pipeline_config(opts);
  kfe::EvalRunResult result = kfe::run_eval(session, config, nearest_k);
  kfe::write_eval_csv(result, out_file);
  std::cout << "rows: " << result.rows.size() << "\n"
            << "greedy : avg size " << result.avg_greedy_size << ", avg lambda_min "
            << result.avg_greedy_lambda << ", avg ms " << result.avg_greedy_ms << "\n"
            << "nearest: avg size " << result.avg_nearest_size << ", avg lambda_min "
            << result.avg_nearest_lambda << ", avg ms " << result.avg_nearest_ms << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  kfe::init_threads();
  CLI::App app{"Submodular keyframe selection, eigenvalue-optimal submaps, and streaming "
               "map summarization for LiDAR-style point-cloud streams"};
  app.require_subcommand(1);

  // simulate
  std::string preset = "corner-room", world_file, sim_out = "session";
  double sim_interval = 0.0, sim_range = 60.0, sim_sigma = 0.01;
  int sim_rings = 16, sim_steps = 360;
  std::uint64_t sim_seed = 1;
  CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic ray-cast session");
  simulate->add_option("--preset", preset, "World preset: corner-room | corridor | loop | forest-proxy")
      ->capture_default_str();
  simulate->add_option("--world", world_file, "World JSON file (overrides --preset)");
  simulate->add_option("--out", sim_out, "Output session directory")->capture_default_str();
  simulate->add_option("--interval", sim_interval, "Scan interval in meters (0 = preset default)")
      ->capture_default_str();
  simulate->add_option("--rings", sim_rings, "Beam rings")->capture_default_str();
  simulate->add_option("--steps", sim_steps, "Azimuth steps")->capture_default_str();
  simulate->add_option("--range", sim_range, "Max range, meters")->capture_default_str();
  simulate->add_option("--sigma", sim_sigma, "Range noise sigma, meters")->capture_default_str();
  simulate->add_option("--seed", sim_seed, "Random seed")->capture_default_str();
  simulate->add_option("--config", "JSON config file; explicit flags override")->expected(1);

  // select
  CommonOptions sel_opts;
  std::string sel_session, sel_out = "run";
  std::string metrics_format = "csv";
  CLI::App* select = app.add_subcommand("select", "Stream a session through keyframe selection");
  select->add_option("--session", sel_session, "Session directory")->required();
  select->add_option("--out", sel_out, "Output directory")->capture_default_str();
  select->add_option("--metrics-format", metrics_format, "csv | json")->capture_default_str();
  add_common(select, sel_opts);

  // submap
  CommonOptions sub_opts;
  std::string sub_session, sub_db, sub_out = "submap.jsonl";
  CLI::App* submap = app.add_subcommand("submap", "Per-scan submap generation against a database");
  submap->add_option("--session", sub_session, "Session directory")->required();
  submap->add_option("--db", sub_db, "Keyframe database directory")->required();
  submap->add_option("--out", sub_out, "Output JSONL file")->capture_default_str();
  add_common(submap, sub_opts);

  // summarize
  CommonOptions sum_opts;
  std::string sum_session, sum_db, sum_out = "summary.json", merged_ply;
  std::string method = "sieve";
  int k = 0;
  std::uint64_t byte_budget = 0;
  double epsilon = 0.1;
  CLI::App* summarize = app.add_subcommand("summarize", "Summarize a session or database");
  summarize->add_option("--session", sum_session, "Session directory");
  summarize->add_option("--db", sum_db, "Keyframe database directory");
  summarize->add_option("-k,--keyframes", k, "Summary budget (element count)");
  summarize->add_option("--bytes", byte_budget, "Summary budget in bytes (overrides -k)");
  summarize->add_option("--epsilon", epsilon, "Sieve granularity, in (0,1)")->capture_default_str();
  summarize->add_option("--method", method, "sieve | greedy")->capture_default_str();
  summarize->add_option("--out", sum_out, "Summary manifest path")->capture_default_str();
  summarize->add_option("--merged-ply", merged_ply, "Optional merged summary-map PLY");
  add_common(summarize, sum_opts);

  // eval
  CommonOptions eval_opts;
  std::string eval_session, eval_out = "eval.csv";
  int nearest_k = 10;
  CLI::App* evalc = app.add_subcommand("eval", "Greedy vs k-nearest submap comparison");
  evalc->add_option("--session", eval_session, "Session directory")->required();
  evalc->add_option("--out", eval_out, "Output CSV path")->capture_default_str();
  evalc->add_option("--nearest-k", nearest_k, "Baseline submap size")->capture_default_str();
  add_common(evalc, eval_opts);

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::vector<const char*> cargs;
    cargs.push_back(argv[0]);
    for (const std::string& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const kfe::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) {
      return cmd_simulate(preset, world_file, sim_out, sim_interval, sim_rings, sim_steps,
                          sim_range, sim_sigma, sim_seed);
    }
    if (select->parsed()) {
      return cmd_select(sel_session, sel_out, sel_opts, metrics_format);
    }
    if (submap->parsed()) {
      return cmd_submap(sub_session, sub_db, sub_out, sub_opts);
    }
    if (summarize->parsed()) {
      if (sum_session.empty() && sum_db.empty()) {
        std::cerr << "error: summarize needs --session or --db\n";
        return kExitUsage;
      }
      return cmd_summarize(sum_session, sum_db, k, byte_budget, epsilon, method, sum_out,
                           merged_ply, sum_opts);
    }
    if (evalc->parsed()) {
      return cmd_eval(eval_session, eval_out, nearest_k, eval_opts);
    }
  } catch (const kfe::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
