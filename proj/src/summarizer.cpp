#include "kfe/summarizer.hpp"

#include "kfe/parallel.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace kfe {

namespace {

// ||scans[j] - e|| for all j, parallel map; the serial callers fold in index
// order so results do not depend on the thread count.
void distance_vector(std::span<const Descriptor> scans, const Descriptor& e,
                     std::vector<double>& out) {
  const std::int64_t n = static_cast<std::int64_t>(scans.size());
  out.resize(scans.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_count())
#endif
  for (std::int64_t j = 0; j < n; ++j) {
    out[j] = (scans[j] - e).norm();
  }
}

// Mean improvement of capped min distances; the marginal of Eq.-style
// facility objectives. curmin entries are already capped at 1. Vectorized:
// the reduction order is fixed, so results are run-to-run identical.
double marginal_from(const std::vector<double>& curmin, const std::vector<double>& dvec) {
  const auto n = static_cast<Eigen::Index>(curmin.size());
  Eigen::Map<const Eigen::ArrayXd> cm(curmin.data(), n);
  Eigen::Map<const Eigen::ArrayXd> dv(dvec.data(), n);
  return (cm - dv).max(0.0).sum() / static_cast<double>(n);
}

void apply_to(std::vector<double>& curmin, const std::vector<double>& dvec) {
  const auto n = static_cast<Eigen::Index>(curmin.size());
  Eigen::Map<Eigen::ArrayXd> cm(curmin.data(), n);
  Eigen::Map<const Eigen::ArrayXd> dv(dvec.data(), n);
  cm = cm.min(dv);
}

// curmin[j] is exactly min(1, min over selected of d(j, .)): taking minima
// never rounds, so loss and objective read off the cached state bit-for-bit
// as a fresh evaluation would produce, in O(|E|) instead of O(k |E| p).
void report_from_state(const std::vector<double>& curmin, SummaryResult& result) {
  double loss = 0.0, objective = 0.0;
  for (double c : curmin) {
    loss += c;
    objective += kAuxDistance - c;
  }
  result.loss = loss / static_cast<double>(curmin.size());
  result.objective = objective / static_cast<double>(curmin.size());
}

}  // namespace

double kmedoid_loss(std::span<const Descriptor> keyframes, std::span<const Descriptor> scans,
                    bool with_aux) {
  if (scans.empty()) throw std::invalid_argument("kmedoid_loss: scan set must be non-empty");
  if (keyframes.empty() && !with_aux) {
    throw std::invalid_argument("kmedoid_loss: empty keyframe set without auxiliary element");
  }
  double sum = 0.0;
  for (const Descriptor& s : scans) {
    double best = with_aux ? kAuxDistance : std::numeric_limits<double>::infinity();
    for (const Descriptor& k : keyframes) best = std::min(best, (s - k).norm());
    sum += best;
  }
  return sum / static_cast<double>(scans.size());
}

double summary_objective(std::span<const Descriptor> keyframes,
                         std::span<const Descriptor> scans) {
  if (scans.empty()) throw std::invalid_argument("summary_objective: scan set must be non-empty");
  double sum = 0.0;
  for (const Descriptor& s : scans) {
    double best = kAuxDistance;
    for (const Descriptor& k : keyframes) best = std::min(best, (s - k).norm());
    sum += kAuxDistance - best;
  }
  return sum / static_cast<double>(scans.size());
}

double summary_objective_ids(std::span<const Descriptor> scans, std::span<const int> ids) {
  std::vector<Descriptor> subset;
  subset.reserve(ids.size());
  for (int i : ids) subset.push_back(scans[i]);
  return summary_objective(subset, scans);
}

double summary_marginal(std::span<const Descriptor> scans, std::span<const int> ids, int e) {
  std::vector<double> curmin(scans.size(), kAuxDistance);
  std::vector<double> dvec;
  for (int i : ids) {
    distance_vector(scans, scans[i], dvec);
    apply_to(curmin, dvec);
  }
  distance_vector(scans, scans[e], dvec);
  return marginal_from(curmin, dvec);
}

SummaryResult sieve_stream_summarize(std::span<const Descriptor> scans, int k, double epsilon) {
  if (k < 1) throw std::invalid_argument("sieve_stream_summarize: k must be >= 1");
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
    throw std::invalid_argument("sieve_stream_summarize: epsilon must be in (0, 1)");
  }
  const std::size_t n = scans.size();
  SummaryResult result;
  if (n == 0) return result;

  struct Guess {
    double v = 1.0;
    std::vector<int> ids;
    std::vector<double> curmin;
    double f = 0.0;
  };
  std::vector<Guess> guesses;
  for (int i = 0;; ++i) {
    double v = std::pow(1.0 + epsilon, i);
    if (v > static_cast<double>(k) * (1.0 + 1e-12)) break;
    Guess g;
    g.v = v;
    g.curmin.assign(n, kAuxDistance);
    guesses.push_back(std::move(g));
  }
  result.guesses = static_cast<int>(guesses.size());

  std::vector<double> dvec;
  for (std::size_t e = 0; e < n; ++e) {
    bool have_dvec = false;
    for (Guess& g : guesses) {
      if (static_cast<int>(g.ids.size()) >= k) continue;
      if (!have_dvec) {
        distance_vector(scans, scans[e], dvec);  // shared across guesses
        have_dvec = true;
      }
      double gain = marginal_from(g.curmin, dvec);
      ++result.marginal_evaluations;
      double threshold = (g.v / 2.0 - g.f) / static_cast<double>(k - g.ids.size());
      if (gain >= threshold) {
        g.ids.push_back(static_cast<int>(e));
        apply_to(g.curmin, dvec);
        g.f += gain;
      }
    }
  }

  const Guess* best = &guesses.front();
  for (const Guess& g : guesses) {
    if (g.f > best->f) best = &g;
  }
  result.ids = best->ids;
  report_from_state(best->curmin, result);
  return result;
}

SummaryResult greedy_summarize(std::span<const Descriptor> scans, int k) {
  if (k < 1) throw std::invalid_argument("greedy_summarize: k must be >= 1");
  const std::size_t n = scans.size();
  SummaryResult result;
  if (n == 0) return result;

  std::vector<double> curmin(n, kAuxDistance);
  std::vector<char> selected(n, 0);
  const int rounds = std::min<int>(k, static_cast<int>(n));

  // One pass over the dataset per selected keyframe: distances are
  // recomputed each round rather than cached as an n x n matrix.
  std::vector<double> gains(n);
  std::vector<double> dvec;
  for (int round = 0; round < rounds; ++round) {
    const std::int64_t nn = static_cast<std::int64_t>(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_count())
#endif
    for (std::int64_t c = 0; c < nn; ++c) {
      if (selected[c]) {
        gains[c] = -1.0;
        continue;
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double improve = curmin[j] - (scans[j] - scans[c]).norm();
        if (improve > 0.0) sum += improve;
      }
      gains[c] = sum / static_cast<double>(n);
    }
    int best = -1;
    for (std::size_t c = 0; c < n; ++c) {
      if (selected[c]) continue;
      ++result.marginal_evaluations;
      if (best < 0 || gains[c] > gains[best]) best = static_cast<int>(c);
    }
    selected[best] = 1;
    result.ids.push_back(best);
    distance_vector(scans, scans[best], dvec);
    apply_to(curmin, dvec);
  }

  std::sort(result.ids.begin(), result.ids.end());
  report_from_state(curmin, result);
  return result;
}

SummaryResult brute_force_summary(std::span<const Descriptor> scans, int k) {
  if (k < 1) throw std::invalid_argument("brute_force_summary: k must be >= 1");
  const int n = static_cast<int>(scans.size());
  if (n > 20 || (k <= n && k > 4)) {
    throw std::invalid_argument("brute_force_summary: instance too large (|E| <= 20, k <= 4)");
  }
  SummaryResult result;
  if (n == 0) return result;

  if (k >= n) {
    result.ids.resize(n);
    for (int i = 0; i < n; ++i) result.ids[i] = i;
  } else {
    std::vector<int> combo(k);
    for (int i = 0; i < k; ++i) combo[i] = i;
    double best = -1.0;
    while (true) {
      double v = summary_objective_ids(scans, combo);
      ++result.marginal_evaluations;
      if (v > best) {
        best = v;
        result.ids = combo;
      }
      int i = k - 1;
      while (i >= 0 && combo[i] == n - k + i) --i;
      if (i < 0) break;
      ++combo[i];
      for (int j = i + 1; j < k; ++j) combo[j] = combo[j - 1] + 1;
    }
  }
  result.objective = summary_objective_ids(scans, result.ids);
  std::vector<Descriptor> chosen;
  for (int i : result.ids) chosen.push_back(scans[i]);
  result.loss = kmedoid_loss(chosen, scans, true);
  return result;
}

}  // namespace kfe
