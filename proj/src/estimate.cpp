#include "cphmm/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cphmm/errors.hpp"
#include "cphmm/inference.hpp"

namespace cphmm {

namespace {

struct PrefixSums {
  std::vector<double> sum;    // sum[i] = x_0 + ... + x_{i-1}
  std::vector<double> sumsq;

  explicit PrefixSums(const std::vector<double>& x)
      : sum(x.size() + 1, 0.0), sumsq(x.size() + 1, 0.0) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      sum[i + 1] = sum[i] + x[i];
      sumsq[i + 1] = sumsq[i] + x[i] * x[i];
    }
  }

  // Within-segment sum of squared deviations over [a, b] inclusive.
  double sse(std::size_t a, std::size_t b) const {
    const double len = static_cast<double>(b - a + 1);
    const double s = sum[b + 1] - sum[a];
    const double q = sumsq[b + 1] - sumsq[a];
    return q - s * s / len;
  }
};

}  // namespace

std::vector<std::size_t> greedy_ls_changepoints(const ObservationSeries& data,
                                                std::size_t K) {
  if (K < 1) throw Error("need at least one segment");
  if (data.observed_count() != data.size())
    throw Error("greedy initialization requires fully observed data");
  const std::size_t n = data.size();
  if (n < K)
    throw InfeasibleEvidenceError("cannot place " + std::to_string(K) +
                                  " segments on " + std::to_string(n) +
                                  " observations");
  const PrefixSums ps(data.values);
  // Segment starts, kept sorted; segment j spans [starts[j], starts[j+1]-1].
  std::vector<std::size_t> starts{0};
  for (std::size_t round = 1; round < K; ++round) {
    double best_gain = -1.0;
    std::size_t best_split = 0;
    for (std::size_t j = 0; j < starts.size(); ++j) {
      const std::size_t a = starts[j];
      const std::size_t b = (j + 1 < starts.size() ? starts[j + 1] : n) - 1;
      if (a == b) continue;
      const double whole = ps.sse(a, b);
      for (std::size_t i = a; i < b; ++i) {
        const double gain = whole - ps.sse(a, i) - ps.sse(i + 1, b);
        // candidates arrive in increasing i, so strict > keeps the
        // smallest index on ties
        if (gain > best_gain) {
          best_gain = gain;
          best_split = i;
        }
      }
    }
    if (best_gain < 0.0)
      throw DegenerateSegmentError("no further split possible");
    starts.insert(
        std::upper_bound(starts.begin(), starts.end(), best_split + 1),
        best_split + 1);
  }
  std::vector<std::size_t> cps(starts.begin() + 1, starts.end());
  for (std::size_t& c : cps) --c;  // change-point = last index of the segment
  return cps;
}

namespace {

struct Segments {
  std::vector<std::size_t> start;  // per segment, inclusive
  std::vector<std::size_t> end;    // per segment, inclusive
};

Segments segments_from_changepoints(std::size_t n,
                                    const std::vector<std::size_t>& cps) {
  Segments seg;
  std::size_t begin = 0;
  for (std::size_t c : cps) {
    if (c >= n - 1 || c < begin)
      throw DegenerateSegmentError(
          "change-points must be strictly increasing within [0, n-2]");
    seg.start.push_back(begin);
    seg.end.push_back(c);
    begin = c + 1;
  }
  seg.start.push_back(begin);
  seg.end.push_back(n - 1);
  return seg;
}

struct GroupStats {
  double sum = 0.0;
  double count = 0.0;
  double mean() const { return sum / count; }
};

GroupStats segment_stats(const ObservationSeries& data, std::size_t a,
                         std::size_t b) {
  GroupStats st;
  for (std::size_t i = a; i <= b; ++i) {
    if (data.is_missing(i)) continue;
    st.sum += data.values[i];
    st.count += 1.0;
  }
  if (st.count == 0.0)
    throw DegenerateSegmentError("segment has no observed values");
  return st;
}

// Threshold merge: walk segments in order, joining each to the closest
// existing group whose pooled mean is within the threshold.
std::vector<std::size_t> merge_by_threshold(const std::vector<GroupStats>& seg,
                                            double threshold) {
  std::vector<std::size_t> level_of_segment(seg.size());
  std::vector<GroupStats> groups;
  for (std::size_t j = 0; j < seg.size(); ++j) {
    std::size_t best = groups.size();
    double best_gap = threshold;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const double gap = std::abs(groups[g].mean() - seg[j].mean());
      if (gap < best_gap) {
        best_gap = gap;
        best = g;
      }
    }
    if (best == groups.size()) groups.push_back(GroupStats{});
    groups[best].sum += seg[j].sum;
    groups[best].count += seg[j].count;
    level_of_segment[j] = best;
  }
  return level_of_segment;
}

SegmentationEstimate estimate_from_assignment(
    const ObservationSeries& data, const Segments& seg, EmissionFamily family,
    ChainKind kind, const std::vector<std::size_t>& level_of_segment) {
  const std::size_t n = data.size();
  const std::size_t n_segments = seg.start.size();
  std::size_t n_states = 0;
  for (std::size_t lv : level_of_segment) n_states = std::max(n_states, lv + 1);

  // Pooled per-state statistics.
  std::vector<GroupStats> st(n_states);
  std::vector<std::size_t> state_of_pos(n);
  for (std::size_t j = 0; j < n_segments; ++j) {
    const std::size_t lv = level_of_segment[j];
    for (std::size_t i = seg.start[j]; i <= seg.end[j]; ++i) {
      state_of_pos[i] = lv;
      if (data.is_missing(i)) continue;
      st[lv].sum += data.values[i];
      st[lv].count += 1.0;
    }
  }
  for (const GroupStats& g : st)
    if (g.count == 0.0)
      throw DegenerateSegmentError("a level has no observed values");

  std::vector<double> means(n_states);
  for (std::size_t s = 0; s < n_states; ++s) means[s] = st[s].mean();

  EmissionModel emissions;
  if (family == EmissionFamily::Poisson) {
    std::vector<double> rates = means;
    for (double& r : rates) r = std::max(r, kMinScale);
    emissions = EmissionModel::poisson(std::move(rates));
  } else {
    double rss = 0.0;
    double observed = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (data.is_missing(i)) continue;
      const double d = data.values[i] - means[state_of_pos[i]];
      rss += d * d;
      observed += 1.0;
    }
    const double sigma = std::max(std::sqrt(rss / observed), kMinScale);
    emissions = EmissionModel::normal(means, sigma);
  }

  ChainSpec chain;
  if (kind == ChainKind::Segment) {
    chain = ChainSpec::segment(n_states);
  } else {
    // Exit probability of level r: observed exits over occupancy, the final
    // position excluded since it cannot transition. A level that never exits
    // gets 1/n rather than a locking zero.
    std::vector<double> exits(n_states, 0.0), occupancy(n_states, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      occupancy[state_of_pos[i]] += 1.0;
      if (state_of_pos[i + 1] != state_of_pos[i]) exits[state_of_pos[i]] += 1.0;
    }
    std::vector<double> eta(n_states);
    for (std::size_t r = 0; r < n_states; ++r)
      eta[r] = exits[r] > 0.0 ? exits[r] / occupancy[r]
                              : 1.0 / static_cast<double>(n);
    chain = ChainSpec::level(n_states, std::move(eta));
  }

  SegmentationEstimate out;
  out.emissions = std::move(emissions);
  out.chain = std::move(chain);
  out.level_of_segment = level_of_segment;
  return out;
}

}  // namespace

SegmentationEstimate mle_from_segmentation(
    const ObservationSeries& data, const std::vector<std::size_t>& changepoints,
    EmissionFamily family, ChainKind kind, double merge_threshold) {
  const Segments seg = segments_from_changepoints(data.size(), changepoints);
  std::vector<std::size_t> level_of_segment(seg.start.size());
  if (kind == ChainKind::Segment) {
    for (std::size_t j = 0; j < level_of_segment.size(); ++j)
      level_of_segment[j] = j;
  } else {
    std::vector<GroupStats> stats;
    for (std::size_t j = 0; j < seg.start.size(); ++j)
      stats.push_back(segment_stats(data, seg.start[j], seg.end[j]));
    level_of_segment = merge_by_threshold(stats, merge_threshold);
  }
  return estimate_from_assignment(data, seg, family, kind, level_of_segment);
}

SegmentationEstimate mle_from_segmentation(
    const ObservationSeries& data, const std::vector<std::size_t>& changepoints,
    EmissionFamily family, ChainKind kind,
    const std::vector<std::size_t>& level_of_segment) {
  const Segments seg = segments_from_changepoints(data.size(), changepoints);
  if (level_of_segment.size() != seg.start.size())
    throw Error("need one level per segment");
  if (kind == ChainKind::Segment)
    for (std::size_t j = 0; j < level_of_segment.size(); ++j)
      if (level_of_segment[j] != j)
        throw Error("segment kind does not admit merged segments");
  // Levels must be labeled 0..L-1 in order of first appearance.
  std::size_t next = 0;
  for (std::size_t lv : level_of_segment) {
    if (lv > next) throw Error("levels must be numbered by first appearance");
    if (lv == next) ++next;
  }
  return estimate_from_assignment(data, seg, family, kind, level_of_segment);
}

FitResult em_fit(const ObservationSeries& data, const FitConfig& config,
                 const EmissionModel& init_emissions,
                 const ChainSpec& init_chain) {
  if (config.max_iterations < 1) throw Error("max_iterations must be >= 1");
  if (!(config.tolerance > 0.0)) throw Error("tolerance must be positive");
  if (init_chain.kind != config.kind ||
      init_emissions.family != config.family ||
      init_chain.state_count != config.state_count ||
      init_emissions.state_count() != config.state_count)
    throw Error("initial parameters do not match the fit configuration");
  if (data.observed_count() == 0)
    throw Error("cannot fit a fully unobserved series");

  const std::size_t n = data.size();
  const std::size_t m = config.state_count;
  const Evidence ev = make_evidence(init_chain, n);

  FitResult res;
  res.emissions = init_emissions;
  res.chain = init_chain;

  for (std::size_t iter = 0;; ++iter) {
    const Lattice lat = make_lattice(res.chain, res.emissions, data, ev);
    if (is_log_zero(lat.log_evidence))
      throw UndefinedPosteriorError("evidence probability is zero");
    res.log_evidence_trace.push_back(lat.log_evidence);
    const std::size_t k = res.log_evidence_trace.size();
    if (k > 1 && std::abs(res.log_evidence_trace[k - 1] -
                          res.log_evidence_trace[k - 2]) < config.tolerance) {
      res.converged = true;
      break;
    }
    if (iter == config.max_iterations) break;

    // M-step. Emission means first; sums run over observed positions only.
    const Matrix gamma = posterior_states(lat);
    std::vector<double> weighted(m, 0.0), mass(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (data.is_missing(i)) continue;
      for (std::size_t s = 0; s < m; ++s) {
        weighted[s] += data.values[i] * gamma(i, s);
        mass[s] += gamma(i, s);
      }
    }
    std::vector<double> new_means = res.emissions.params;
    for (std::size_t s = 0; s < m; ++s) {
      if (mass[s] < 1e-12) {
        res.warnings.push_back("state " + std::to_string(s + 1) +
                               " has vanishing posterior mass; parameter "
                               "frozen this iteration");
        continue;
      }
      new_means[s] = weighted[s] / mass[s];
      if (config.family == EmissionFamily::Poisson)
        new_means[s] = std::max(new_means[s], kMinScale);
    }
    if (config.family == EmissionFamily::NormalHomoscedastic) {
      double rss = 0.0, observed = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (data.is_missing(i)) continue;
        observed += 1.0;
        for (std::size_t s = 0; s < m; ++s) {
          const double d = data.values[i] - new_means[s];
          rss += d * d * gamma(i, s);
        }
      }
      res.emissions.sigma = std::max(std::sqrt(rss / observed), kMinScale);
    }
    res.emissions.params = std::move(new_means);

    // Transition update: nothing to do for the segment kind.
    if (config.kind == ChainKind::Level && m > 1) {
      std::vector<double> exit_mass(m, 0.0), stay_mass(m, 0.0);
      for (std::size_t i = 0; i + 1 < n; ++i)
        for (std::size_t r = 0; r < m; ++r) {
          stay_mass[r] += gamma(i, r);
          for (std::size_t s = 0; s < m; ++s)
            if (s != r) exit_mass[r] += posterior_pair(lat, i, r, s);
        }
      for (std::size_t r = 0; r < m; ++r) {
        if (stay_mass[r] < 1e-12) continue;  // freeze, as with emissions
        res.chain.exit_probs[r] =
            std::clamp(exit_mass[r] / stay_mass[r], 0.0, 1.0);
      }
    }
  }
  return res;
}

FitResult fit(const ObservationSeries& data, const FitConfig& config,
              std::size_t init_segments, double merge_threshold) {
  const std::size_t k = init_segments == 0 ? config.state_count : init_segments;
  const std::vector<std::size_t> cps = greedy_ls_changepoints(data, k);
  const SegmentationEstimate init = mle_from_segmentation(
      data, cps, config.family, config.kind, merge_threshold);
  if (init.chain.state_count != config.state_count)
    throw Error("initializer produced " +
                std::to_string(init.chain.state_count) + " states, expected " +
                std::to_string(config.state_count) +
                "; adjust init_segments or the merge threshold");
  FitResult res = em_fit(data, config, init.emissions, init.chain);
  res.initial_changepoints = cps;
  return res;
}

}  // namespace cphmm
