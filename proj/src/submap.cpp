#include "kfe/submap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace kfe {

namespace {

// Eigenvalues as (min, mid, max) for gain bookkeeping.
Vec3 ascending_eigenvalues(const Mat3& h) {
  Vec3 desc = eigenvalues3(h);
  return Vec3(desc[2], desc[1], desc[0]);
}

// Gains below tau count as zero so noise-level lambda_min improvements do
// not outrank genuine rank growth.
Vec3 thresholded(const Vec3& gains, double tau) {
  Vec3 out;
  for (int i = 0; i < 3; ++i) out[i] = gains[i] > tau ? gains[i] : 0.0;
  return out;
}

bool lex_better(const Vec3& a, int id_a, const Vec3& b, int id_b) {
  for (int i = 0; i < 3; ++i) {
    if (a[i] != b[i]) return a[i] > b[i];
  }
  return id_a < id_b;
}

int rank_of(const Vec3& ascending, double tau) {
  int r = 0;
  for (int i = 0; i < 3; ++i) {
    if (ascending[i] > tau) ++r;
  }
  return r;
}

const PreparedKeyframe* find_keyframe(std::span<const PreparedKeyframe> keyframes, int id) {
  for (const PreparedKeyframe& kf : keyframes) {
    if (kf.id == id) return &kf;
  }
  return nullptr;
}

}  // namespace

PreparedKeyframe prepare_keyframe(int id, const Pose& pose, PointCloud world_cloud) {
  PreparedKeyframe kf;
  kf.id = id;
  kf.pose = pose;
  kf.cloud = std::move(world_cloud);
  kf.tree.build(kf.cloud.points);
  return kf;
}

std::vector<int> candidate_gate(std::span<const PreparedKeyframe> keyframes,
                                const Vec3& scan_position, double sensor_range) {
  if (!(sensor_range > 0.0)) {
    throw std::invalid_argument("candidate_gate: sensor_range must be positive");
  }
  std::vector<int> ids;
  for (const PreparedKeyframe& kf : keyframes) {
    if ((kf.pose.t - scan_position).norm() < 2.0 * sensor_range) ids.push_back(kf.id);
  }
  return ids;
}

std::vector<CandidateBound> precompute_upper_bounds(const PointCloud& scan,
                                                    std::span<const PreparedKeyframe> keyframes,
                                                    std::span<const int> candidate_ids,
                                                    double max_corr_dist) {
  std::vector<CandidateBound> bounds;
  bounds.reserve(candidate_ids.size());
  for (int id : candidate_ids) {
    const PreparedKeyframe* kf = find_keyframe(keyframes, id);
    if (!kf) throw std::invalid_argument("precompute_upper_bounds: unknown keyframe id");
    auto corr = find_correspondences(scan, kf->cloud, kf->tree, max_corr_dist);
    bounds.push_back(CandidateBound{id, lambda_max(translational_hessian(corr))});
  }
  std::sort(bounds.begin(), bounds.end(), [](const CandidateBound& a, const CandidateBound& b) {
    return a.bound > b.bound || (a.bound == b.bound && a.id < b.id);
  });
  return bounds;
}

SubmapSelection generate_submap(const PointCloud& scan, const Vec3& scan_position,
                                std::span<const PreparedKeyframe> keyframes,
                                const SubmapConfig& config) {
  if (config.max_size < 1) {
    throw std::invalid_argument("generate_submap: max_size must be >= 1");
  }
  if (scan.empty()) {
    throw std::invalid_argument("generate_submap: scan must be non-empty");
  }

  SubmapSelection sel;
  std::vector<int> gated = candidate_gate(keyframes, scan_position, config.sensor_range);
  if (gated.empty()) return sel;  // degenerate: lambda_min stays 0

  struct Candidate {
    const PreparedKeyframe* kf = nullptr;
    double bound = 0.0;
    std::vector<Correspondence> first_corr;  // cached from the bound pass
    bool selected = false;
  };
  std::vector<Candidate> cands;
  cands.reserve(gated.size());
  for (int id : gated) {
    Candidate c;
    c.kf = find_keyframe(keyframes, id);
    c.first_corr = find_correspondences(scan, c.kf->cloud, c.kf->tree, config.max_corr_dist);
    c.bound = lambda_max(translational_hessian(c.first_corr));
    cands.push_back(std::move(c));
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return a.bound > b.bound || (a.bound == b.bound && a.kf->id < b.kf->id);
  });

  std::vector<char> active(scan.size(), 1);
  Mat3 accumulated = Mat3::Zero();
  Vec3 current = Vec3::Zero();  // eigenvalues of `accumulated`, ascending
  const bool pruning = config.prune && !config.shadow_audit;
  bool first_iteration = true;

  while (static_cast<int>(sel.ids.size()) < config.max_size) {
    IterationRecord rec;
    struct Best {
      bool valid = false;
      Vec3 gains{0.0, 0.0, 0.0};
      Vec3 key{0.0, 0.0, 0.0};
      int id = -1;
      Candidate* cand = nullptr;
      std::vector<Correspondence> corr;
    } best;

    for (Candidate& c : cands) {
      if (c.selected) continue;
      if (pruning) {
        if (c.bound <= config.tau_gain ||
            (best.valid && c.bound < best.key[0])) {
          ++rec.pruned;
          continue;
        }
      }
      std::vector<Correspondence> corr =
          first_iteration ? c.first_corr
                          : find_correspondences(scan, c.kf->cloud, c.kf->tree,
                                                 config.max_corr_dist, &active);
      Mat3 dh = translational_hessian(corr);
      Vec3 with = ascending_eigenvalues(accumulated + dh);
      Vec3 gains = with - current;
      Vec3 key = thresholded(gains, config.tau_gain);
      ++rec.evaluated;
      if (config.shadow_audit) rec.audit.push_back(AuditEntry{c.kf->id, gains, c.bound});
      if (!best.valid || lex_better(key, c.kf->id, best.key, best.id)) {
        best.valid = true;
        best.gains = gains;
        best.key = key;
        best.id = c.kf->id;
        best.cand = &c;
        best.corr = std::move(corr);
      }
    }

    sel.candidates_considered += rec.evaluated;
    sel.candidates_pruned += rec.pruned;

    // Accept a direct lambda_min improvement, or a new constrained direction
    // (rank growth) while lambda_min is still pinned at zero.
    bool accept = false;
    double effective = 0.0;
    if (best.valid) {
      int rank = rank_of(current, config.tau_gain);
      if (best.key[0] > 0.0) {
        accept = true;
        effective = best.gains[0];
      } else if (rank == 0 && best.key[2] > 0.0) {
        accept = true;
        effective = best.gains[2];
      } else if (rank == 1 && best.key[1] > 0.0) {
        accept = true;
        effective = best.gains[1];
      }
    }
    if (!accept) {
      sel.iterations.push_back(std::move(rec));
      break;
    }

    rec.chosen_id = best.id;
    rec.gains = best.gains;
    best.cand->selected = true;
    accumulated += translational_hessian(best.corr);
    current = ascending_eigenvalues(accumulated);
    for (const Correspondence& c : best.corr) active[c.scan_index] = 0;
    sel.correspondence_count += best.corr.size();
    sel.ids.push_back(best.id);
    sel.marginal_gains.push_back(effective);
    sel.lambda_min_gains.push_back(best.gains[0]);
    sel.iterations.push_back(std::move(rec));
    first_iteration = false;
  }

  sel.hessian = accumulated;
  sel.lambda_min = current[0];
  return sel;
}

SubmapScore evaluate_submap(const PointCloud& scan, std::span<const PreparedKeyframe> keyframes,
                            std::span<const int> ordered_ids, double max_corr_dist) {
  SubmapScore score;
  std::vector<char> active(scan.size(), 1);
  for (int id : ordered_ids) {
    const PreparedKeyframe* kf = find_keyframe(keyframes, id);
    if (!kf) throw std::invalid_argument("evaluate_submap: unknown keyframe id");
    auto corr = find_correspondences(scan, kf->cloud, kf->tree, max_corr_dist, &active);
    score.hessian += translational_hessian(corr);
    for (const Correspondence& c : corr) active[c.scan_index] = 0;
    score.correspondence_count += corr.size();
  }
  score.lambda_min = eigenvalues3(score.hessian)[2];
  return score;
}

BruteForceSubmap brute_force_submap(const PointCloud& scan,
                                    std::span<const PreparedKeyframe> keyframes, int max_size,
                                    double max_corr_dist) {
  if (keyframes.size() > 12 || max_size > 4) {
    throw std::invalid_argument("brute_force_submap: instance too large (<=12 candidates, N<=4)");
  }
  if (max_size < 1) throw std::invalid_argument("brute_force_submap: max_size must be >= 1");

  // Match table: which keyframes claim each scan point, with what plane.
  struct Match {
    Vec3 normal;
    double weight;
    std::uint32_t scan_index;
  };
  std::vector<std::vector<Match>> matches(keyframes.size());
  std::vector<int> ids(keyframes.size());
  for (std::size_t k = 0; k < keyframes.size(); ++k) {
    ids[k] = keyframes[k].id;
    auto corr = find_correspondences(scan, keyframes[k].cloud, keyframes[k].tree, max_corr_dist);
    matches[k].reserve(corr.size());
    for (const Correspondence& c : corr) {
      matches[k].push_back(Match{c.normal, c.weight, c.scan_index});
    }
  }

  BruteForceSubmap best;
  best.value = -1.0;  // any construction (lambda_min >= 0) beats the sentinel
  std::vector<char> removed(scan.size(), 0);
  std::vector<int> sequence;
  std::vector<char> used(keyframes.size(), 0);

  // Depth-first over ordered constructions; keyframe k's sub-Hessian uses
  // only scan points not already claimed by earlier picks.
  auto recurse = [&](auto&& self, const Mat3& h) -> void {
    if (static_cast<int>(sequence.size()) >= max_size) return;
    for (std::size_t k = 0; k < keyframes.size(); ++k) {
      if (used[k]) continue;
      Mat3 dh = Mat3::Zero();
      std::vector<std::uint32_t> claimed;
      for (const Match& m : matches[k]) {
        if (removed[m.scan_index]) continue;
        dh += m.weight * (m.normal * m.normal.transpose());
        claimed.push_back(m.scan_index);
      }
      Mat3 next = h + dh;
      double value = eigenvalues3(next)[2];
      used[k] = 1;
      for (std::uint32_t i : claimed) removed[i] = 1;
      sequence.push_back(ids[k]);
      if (value > best.value) {
        best.value = value;
        best.ids = sequence;
      }
      self(self, next);
      sequence.pop_back();
      for (std::uint32_t i : claimed) removed[i] = 0;
      used[k] = 0;
    }
  };
  recurse(recurse, Mat3::Zero());
  if (best.value < 0.0) best.value = 0.0;  // no candidates at all
  return best;
}

double submodularity_ratio(const std::function<double(const std::vector<int>&)>& objective,
                           const std::vector<int>& base, const std::vector<int>& ground,
                           int kappa) {
  if (ground.size() > 10) {
    throw std::invalid_argument("submodularity_ratio: ground set larger than 10");
  }
  if (kappa < 1) throw std::invalid_argument("submodularity_ratio: kappa must be >= 1");

  std::map<std::vector<int>, double> memo;
  auto eval = [&](std::vector<int> set) {
    std::sort(set.begin(), set.end());
    auto it = memo.find(set);
    if (it != memo.end()) return it->second;
    double v = objective(set);
    memo.emplace(std::move(set), v);
    return v;
  };

  double gamma = std::numeric_limits<double>::infinity();
  const std::size_t nb = base.size();
  for (std::uint64_t lmask = 0; lmask < (1ull << nb); ++lmask) {
    std::vector<int> l;
    for (std::size_t i = 0; i < nb; ++i) {
      if (lmask & (1ull << i)) l.push_back(base[i]);
    }
    std::vector<int> rest;
    for (int g : ground) {
      if (std::find(l.begin(), l.end(), g) == l.end()) rest.push_back(g);
    }
    double fl = eval(l);
    const std::size_t nr = rest.size();
    for (std::uint64_t smask = 1; smask < (1ull << nr); ++smask) {
      if (std::popcount(smask) > kappa) continue;
      std::vector<int> ls = l;
      double num = 0.0;
      for (std::size_t i = 0; i < nr; ++i) {
        if (!(smask & (1ull << i))) continue;
        std::vector<int> li = l;
        li.push_back(rest[i]);
        num += eval(li) - fl;
        ls.push_back(rest[i]);
      }
      double fls = eval(ls);
      double den = fls - fl;
      // Zero-denominator pairs are skipped; "zero" is relative to the
      // objective scale so eigenvalue noise does not leak into the ratio.
      if (den <= 1e-9 * std::max(1.0, std::abs(fls) + std::abs(fl))) continue;
      gamma = std::min(gamma, num / den);
    }
  }
  return std::isfinite(gamma) ? gamma : 1.0;
}

}  // namespace kfe
