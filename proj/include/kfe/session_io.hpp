#pragma once

#include "kfe/descriptor.hpp"
#include "kfe/geometry.hpp"
#include "kfe/selector.hpp"
#include "kfe/synthworld.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kfe {

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ply_error : io_error {
  using io_error::io_error;
};
struct version_mismatch_error : io_error {
  using io_error::io_error;
};
struct blob_error : io_error {  // truncated or corrupt descriptor blob
  using io_error::io_error;
};
struct missing_cloud_error : io_error {
  using io_error::io_error;
};

/// ASCII PLY with float properties x, y, z and optional nx, ny, nz.
/// The reader rejects binary PLY with a clear error.
void save_ply(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud load_ply(const std::filesystem::path& path);

/// Session directory: session.jsonl (one record per scan) plus per-scan PLYs.
void save_session(std::span<const SessionScan> session, const std::filesystem::path& dir);
std::vector<SessionScan> load_session(const std::filesystem::path& dir);

/// World document: either {"preset": name, "seed": n} or explicit panel,
/// cylinder, and trajectory arrays. Preset trajectories can be overridden.
struct WorldDocument {
  WorldSpec spec;
  Trajectory trajectory;
};
WorldDocument load_world_json(const std::filesystem::path& path);

inline constexpr std::string_view kDatabaseFormatVersion = "kfe-1";

struct DatabaseInfo {
  int descriptor_dim = kDefaultDescriptorDim;
  std::string backend = "range-histogram";
};

struct LoadedDatabase {
  std::vector<Keyframe> keyframes;
  DatabaseInfo info;
};

/// Keyframe database directory: manifest.json, descriptors.bin (per keyframe
/// a 4-byte little-endian dimension count followed by little-endian doubles),
/// and clouds/kf_*.ply. Descriptors round-trip bit-exactly; the manifest
/// records an FNV-1a hash of the blob that is verified on load.
void save_database(std::span<const Keyframe> keyframes, const DatabaseInfo& info,
                   const std::filesystem::path& dir);
LoadedDatabase load_database(const std::filesystem::path& dir);

struct MetricsRecord {
  int scan_id = 0;
  int keyframe_count = 0;
  int submap_size = 0;
  double lambda_min = 0.0;
  double degeneracy = 0.0;
  double elapsed_ms = 0.0;
  std::uint64_t rss_proxy_bytes = 0;
};

enum class MetricsFormat { kCsv, kJson };

void write_metrics(std::span<const MetricsRecord> records, const std::filesystem::path& path,
                   MetricsFormat format);

/// Deterministic memory proxy: in-memory bytes of the keyframe's cloud,
/// normals, covariances, and serialized descriptor.
std::uint64_t keyframe_rss_proxy(const Keyframe& kf);

std::uint64_t fnv1a_hash(std::span<const std::uint8_t> bytes);

}  // namespace kfe
