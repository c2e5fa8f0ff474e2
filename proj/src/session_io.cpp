#include "kfe/session_io.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace kfe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void append_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64_le(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint32_t read_u32_le(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

double read_f64_le(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

json pose_to_json(const Pose& p) {
  return json{{"t", {p.t.x(), p.t.y(), p.t.z()}},
              {"q", {p.q.w(), p.q.x(), p.q.y(), p.q.z()}}};
}

Pose pose_from_json(const json& j) {
  Pose p;
  const auto& t = j.at("t");
  const auto& q = j.at("q");
  p.t = Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
  p.q = Eigen::Quaterniond(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                           q.at(3).get<double>());
  return p;
}

Trigger trigger_from_string(const std::string& s) {
  if (s == "bootstrap") return Trigger::kBootstrap;
  if (s == "feature") return Trigger::kFeature;
  if (s == "degeneracy") return Trigger::kDegeneracy;
  if (s == "distance") return Trigger::kDistance;
  throw io_error("unknown trigger '" + s + "'");
}

}  // namespace

std::uint64_t fnv1a_hash(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

void save_ply(const PointCloud& cloud, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open '" + path.string() + "' for writing");
  const bool normals = cloud.has_normals();
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (normals) {
    out << "property double nx\nproperty double ny\nproperty double nz\n";
  }
  out << "end_header\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    out << p.x() << " " << p.y() << " " << p.z();
    if (normals) {
      const Vec3& n = cloud.normals[i];
      out << " " << n.x() << " " << n.y() << " " << n.z();
    }
    out << "\n";
  }
  if (!out) throw io_error("write failed for '" + path.string() + "'");
}

PointCloud load_ply(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "ply") {
    throw ply_error("'" + path.string() + "' is not a PLY file");
  }

  std::size_t vertex_count = 0;
  std::vector<std::string> properties;
  bool in_vertex_element = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string token;
    ls >> token;
    if (token == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") {
        throw ply_error("binary PLY is not supported ('" + path.string() + "')");
      }
    } else if (token == "element") {
      std::string name;
      ls >> name >> vertex_count;
      in_vertex_element = (name == "vertex");
    } else if (token == "property" && in_vertex_element) {
      std::string type, name;
      ls >> type >> name;
      properties.push_back(name);
    } else if (token == "end_header") {
      break;
    }
  }
  if (!in) throw ply_error("truncated PLY header in '" + path.string() + "'");

  int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
  for (std::size_t i = 0; i < properties.size(); ++i) {
    if (properties[i] == "x") ix = static_cast<int>(i);
    if (properties[i] == "y") iy = static_cast<int>(i);
    if (properties[i] == "z") iz = static_cast<int>(i);
    if (properties[i] == "nx") inx = static_cast<int>(i);
    if (properties[i] == "ny") iny = static_cast<int>(i);
    if (properties[i] == "nz") inz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) {
    throw ply_error("PLY vertex element lacks x/y/z in '" + path.string() + "'");
  }
  const bool normals = inx >= 0 && iny >= 0 && inz >= 0;

  PointCloud cloud;
  cloud.points.reserve(vertex_count);
  std::vector<double> row(properties.size());
  for (std::size_t v = 0; v < vertex_count; ++v) {
    if (!std::getline(in, line)) {
      throw ply_error("truncated PLY body in '" + path.string() + "'");
    }
    std::istringstream ls(line);
    for (double& f : row) {
      if (!(ls >> f)) throw ply_error("malformed PLY row in '" + path.string() + "'");
    }
    cloud.points.emplace_back(row[ix], row[iy], row[iz]);
    if (normals) cloud.normals.emplace_back(row[inx], row[iny], row[inz]);
  }
  return cloud;
}

void save_session(std::span<const SessionScan> session, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "session.jsonl");
  if (!out) throw io_error("cannot write session.jsonl in '" + dir.string() + "'");
  for (const SessionScan& scan : session) {
    char name[32];
    std::snprintf(name, sizeof(name), "scan_%05d.ply", scan.scan_id);
    save_ply(scan.cloud, dir / name);
    json rec{{"scan_id", scan.scan_id},
             {"timestamp", scan.timestamp},
             {"pose", pose_to_json(scan.pose)},
             {"cloud_file", name}};
    out << rec.dump() << "\n";
  }
}

std::vector<SessionScan> load_session(const fs::path& dir) {
  std::ifstream in(dir / "session.jsonl");
  if (!in) throw io_error("cannot open session at '" + dir.string() + "'");
  std::vector<SessionScan> session;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec = json::parse(line);
    SessionScan scan;
    scan.scan_id = rec.at("scan_id").get<int>();
    scan.timestamp = rec.at("timestamp").get<double>();
    scan.pose = pose_from_json(rec.at("pose"));
    scan.cloud = load_ply(dir / rec.at("cloud_file").get<std::string>());
    session.push_back(std::move(scan));
  }
  return session;
}

WorldDocument load_world_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open world file '" + path.string() + "'");
  json doc = json::parse(in, nullptr, true, true);

  WorldDocument out;
  std::uint64_t seed = doc.value("seed", 0ull);
  if (doc.contains("preset")) {
    std::string preset = doc.at("preset").get<std::string>();
    out.spec = preset_world(preset, seed);
    out.trajectory = preset_trajectory(preset);
  }
  if (doc.contains("panels")) {
    out.spec.panels.clear();
    for (const json& p : doc.at("panels")) {
      Panel panel;
      panel.axis = p.at("axis").get<int>();
      panel.offset = p.at("offset").get<double>();
      panel.umin = p.at("u").at(0).get<double>();
      panel.umax = p.at("u").at(1).get<double>();
      panel.vmin = p.at("v").at(0).get<double>();
      panel.vmax = p.at("v").at(1).get<double>();
      out.spec.panels.push_back(panel);
    }
  }
  if (doc.contains("cylinders")) {
    out.spec.cylinders.clear();
    for (const json& c : doc.at("cylinders")) {
      Cylinder cyl;
      cyl.cx = c.at("cx").get<double>();
      cyl.cy = c.at("cy").get<double>();
      cyl.radius = c.at("radius").get<double>();
      cyl.zmin = c.at("z").at(0).get<double>();
      cyl.zmax = c.at("z").at(1).get<double>();
      out.spec.cylinders.push_back(cyl);
    }
  }
  if (doc.contains("trajectory")) {
    const json& t = doc.at("trajectory");
    out.trajectory.waypoints.clear();
    Vec3 prev = Vec3::Zero();
    bool first = true;
    for (const json& w : t.at("waypoints")) {
      Vec3 p(w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>());
      Pose pose;
      pose.t = p;
      if (!first) {
        Vec3 d = p - prev;
        pose.q = Eigen::Quaterniond(Eigen::AngleAxisd(std::atan2(d.y(), d.x()), Vec3::UnitZ()));
      }
      out.trajectory.waypoints.push_back(pose);
      prev = p;
      first = false;
    }
    if (t.contains("scan_interval")) {
      out.trajectory.scan_interval = t.at("scan_interval").get<double>();
    }
  }
  if (out.spec.panels.empty() && out.spec.cylinders.empty()) {
    throw io_error("world file '" + path.string() + "' defines no surfaces");
  }
  return out;
}

void save_database(std::span<const Keyframe> keyframes, const DatabaseInfo& info,
                   const fs::path& dir) {
  fs::create_directories(dir / "clouds");

  std::string blob;
  json manifest;
  manifest["format_version"] = std::string(kDatabaseFormatVersion);
  manifest["descriptor_dim"] = info.descriptor_dim;
  manifest["backend"] = info.backend;
  manifest["blob_file"] = "descriptors.bin";
  json records = json::array();
  for (const Keyframe& kf : keyframes) {
    char name[32];
    std::snprintf(name, sizeof(name), "clouds/kf_%05d.ply", kf.id);
    save_ply(kf.cloud, dir / name);

    json rec;
    rec["id"] = kf.id;
    rec["scan_id"] = kf.scan_id;
    rec["pose"] = pose_to_json(kf.pose);
    rec["gamma"] = kf.gamma;
    rec["trigger"] = std::string(to_string(kf.trigger));
    rec["cloud_file"] = name;
    rec["descriptor_offset"] = blob.size();
    records.push_back(std::move(rec));

    append_u32_le(blob, static_cast<std::uint32_t>(kf.descriptor.size()));
    for (Eigen::Index i = 0; i < kf.descriptor.size(); ++i) {
      append_f64_le(blob, kf.descriptor[i]);
    }
  }
  manifest["keyframes"] = std::move(records);

  {
    std::ofstream out(dir / "descriptors.bin", std::ios::binary);
    if (!out) throw io_error("cannot write descriptor blob in '" + dir.string() + "'");
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  }
  manifest["blob_hash"] = fnv1a_hash(
      {reinterpret_cast<const std::uint8_t*>(blob.data()), blob.size()});

  std::ofstream out(dir / "manifest.json");
  if (!out) throw io_error("cannot write manifest in '" + dir.string() + "'");
  out << manifest.dump(2) << "\n";
}

LoadedDatabase load_database(const fs::path& dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw io_error("cannot open database manifest in '" + dir.string() + "'");
  json manifest = json::parse(min);

  if (manifest.value("format_version", "") != kDatabaseFormatVersion) {
    throw version_mismatch_error("database format version mismatch (want '" +
                                 std::string(kDatabaseFormatVersion) + "', got '" +
                                 manifest.value("format_version", "<missing>") + "')");
  }

  LoadedDatabase db;
  db.info.descriptor_dim = manifest.at("descriptor_dim").get<int>();
  db.info.backend = manifest.value("backend", "");

  std::string blob;
  {
    std::ifstream bin(dir / manifest.value("blob_file", "descriptors.bin"), std::ios::binary);
    if (!bin) throw blob_error("descriptor blob missing in '" + dir.string() + "'");
    std::ostringstream ss;
    ss << bin.rdbuf();
    blob = ss.str();
  }
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(blob.data());

  const std::size_t count = manifest.at("keyframes").size();
  const std::size_t expected =
      count * (4 + 8 * static_cast<std::size_t>(db.info.descriptor_dim));
  if (blob.size() != expected) {
    throw blob_error("descriptor blob has " + std::to_string(blob.size()) +
                     " bytes, expected " + std::to_string(expected));
  }
  if (manifest.contains("blob_hash") &&
      manifest.at("blob_hash").get<std::uint64_t>() != fnv1a_hash({bytes, blob.size()})) {
    throw blob_error("descriptor blob hash mismatch");
  }

  for (const json& rec : manifest.at("keyframes")) {
    Keyframe kf;
    kf.id = rec.at("id").get<int>();
    kf.scan_id = rec.at("scan_id").get<int>();
    kf.pose = pose_from_json(rec.at("pose"));
    kf.gamma = rec.at("gamma").get<double>();
    kf.trigger = trigger_from_string(rec.at("trigger").get<std::string>());

    std::size_t offset = rec.at("descriptor_offset").get<std::size_t>();
    if (offset + 4 > blob.size()) throw blob_error("descriptor offset out of range");
    std::uint32_t dim = read_u32_le(bytes + offset);
    if (dim != static_cast<std::uint32_t>(db.info.descriptor_dim) ||
        offset + 4 + 8 * static_cast<std::size_t>(dim) > blob.size()) {
      throw blob_error("descriptor record corrupt");
    }
    kf.descriptor.resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
      kf.descriptor[i] = read_f64_le(bytes + offset + 4 + 8 * i);
    }

    fs::path cloud_path = dir / rec.at("cloud_file").get<std::string>();
    if (!fs::exists(cloud_path)) {
      throw missing_cloud_error("cloud file missing: '" + cloud_path.string() + "'");
    }
    kf.cloud = load_ply(cloud_path);
    db.keyframes.push_back(std::move(kf));
  }
  return db;
}

void write_metrics(std::span<const MetricsRecord> records, const fs::path& path,
                   MetricsFormat format) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open '" + path.string() + "' for writing");
  if (format == MetricsFormat::kCsv) {
    out << "scan_id,keyframe_count,submap_size,lambda_min,degeneracy,elapsed_ms,"
           "rss_proxy_bytes\n";
    for (const MetricsRecord& r : records) {
      out << r.scan_id << "," << r.keyframe_count << "," << r.submap_size << ","
          << format_double(r.lambda_min) << "," << format_double(r.degeneracy) << ","
          << format_double(r.elapsed_ms) << "," << r.rss_proxy_bytes << "\n";
    }
  } else {
    json arr = json::array();
    for (const MetricsRecord& r : records) {
      // Infinities are not representable in JSON; nlohmann emits null.
      arr.push_back(json{{"scan_id", r.scan_id},
                         {"keyframe_count", r.keyframe_count},
                         {"submap_size", r.submap_size},
                         {"lambda_min", r.lambda_min},
                         {"degeneracy", r.degeneracy},
                         {"elapsed_ms", r.elapsed_ms},
                         {"rss_proxy_bytes", r.rss_proxy_bytes}});
    }
    out << arr.dump(2) << "\n";
  }
}

std::uint64_t keyframe_rss_proxy(const Keyframe& kf) {
  std::uint64_t bytes = 0;
  bytes += kf.cloud.points.size() * sizeof(Vec3);
  bytes += kf.cloud.normals.size() * sizeof(Vec3);
  bytes += kf.cloud.covariances.size() * sizeof(Mat3);
  bytes += 4 + 8 * static_cast<std::uint64_t>(kf.descriptor.size());
  return bytes;
}

}  // namespace kfe
