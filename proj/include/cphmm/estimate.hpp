#ifndef CPHMM_ESTIMATE_HPP
#define CPHMM_ESTIMATE_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cphmm/model.hpp"

namespace cphmm {

// ---------------------------------------------------------------------------
// Initialization from a hard segmentation

// Greedy least-squares binary segmentation: repeatedly split the segment
// whose best single split most reduces the total within-segment sum of
// squared deviations, until K segments exist. Ties break toward the smallest
// split index. Returns the K-1 sorted change-points; index i means the
// change happens between positions i and i+1 (0-based). Requires fully
// observed data and n >= K.
std::vector<std::size_t> greedy_ls_changepoints(const ObservationSeries& data,
                                                std::size_t K);

// Maximum-likelihood parameters implied by a hard segmentation.
struct SegmentationEstimate {
  EmissionModel emissions;
  ChainSpec chain;
  // level kind only: which level each segment was assigned to
  std::vector<std::size_t> level_of_segment;
};

// Segment kind: one parameter per segment, eta fixed at 0.5. Level kind:
// segments whose means differ by less than merge_threshold share a level;
// each exit probability is the observed exit count of the level divided by
// its occupancy (final position excluded), or 1/n for a level that never
// exits. The shared normal sigma is the pooled within-group standard
// deviation with denominator n.
SegmentationEstimate mle_from_segmentation(
    const ObservationSeries& data, const std::vector<std::size_t>& changepoints,
    EmissionFamily family, ChainKind kind, double merge_threshold = 0.2);

// Same, with an explicit segment-to-level assignment instead of the
// threshold rule.
SegmentationEstimate mle_from_segmentation(
    const ObservationSeries& data, const std::vector<std::size_t>& changepoints,
    EmissionFamily family, ChainKind kind,
    const std::vector<std::size_t>& level_of_segment);

// ---------------------------------------------------------------------------
// EM

struct FitConfig {
  std::size_t max_iterations = 500;
  double tolerance = 1e-8;  // absolute change of the log evidence
  EmissionFamily family = EmissionFamily::Poisson;
  ChainKind kind = ChainKind::Level;
  std::size_t state_count = 1;
};

struct FitResult {
  EmissionModel emissions;
  ChainSpec chain;
  std::vector<double> log_evidence_trace;  // one entry per E-step
  bool converged = false;
  std::vector<std::size_t> initial_changepoints;  // when a greedy init ran
  std::vector<std::string> warnings;
};

// Alternates posterior computation with the closed-form parameter updates
// until the log evidence moves less than the tolerance or the iteration cap
// is hit. The trace is non-decreasing; the returned parameters are the ones
// that produced its last entry. A state whose posterior mass vanishes keeps
// its parameters for that iteration and adds a warning.
FitResult em_fit(const ObservationSeries& data, const FitConfig& config,
                 const EmissionModel& init_emissions,
                 const ChainSpec& init_chain);

// Greedy initialization followed by EM. init_segments controls how many
// segments the initializer uses (defaults to the state count; a level model
// may start from more segments than levels, which then merge).
FitResult fit(const ObservationSeries& data, const FitConfig& config,
              std::size_t init_segments = 0, double merge_threshold = 0.2);

}  // namespace cphmm

#endif  // CPHMM_ESTIMATE_HPP
