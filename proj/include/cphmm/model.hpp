#ifndef CPHMM_MODEL_HPP
#define CPHMM_MODEL_HPP

#include <cstddef>
#include <optional>
#include <vector>

#include "cphmm/logsum.hpp"

namespace cphmm {

// All indices in this API are 0-based. The CLI and the file formats convert
// to the 1-based convention used in the documentation; a change-point at
// (0-based) index i separates positions i and i+1.

// ---------------------------------------------------------------------------
// Observations

// Ordered real-valued or count data with optional missing positions.
// A missing position's stored value is ignored by every computation.
struct ObservationSeries {
  std::vector<double> values;
  std::vector<bool> missing;  // empty means fully observed

  ObservationSeries() = default;
  explicit ObservationSeries(std::vector<double> vals,
                             std::vector<bool> miss = {});

  std::size_t size() const { return values.size(); }
  bool is_missing(std::size_t i) const {
    return !missing.empty() && missing[i];
  }
  std::size_t observed_count() const;
};

// ---------------------------------------------------------------------------
// Emission models

enum class EmissionFamily { Poisson, NormalHomoscedastic };

// Per-state emission distributions: Poisson rates, or per-state normal means
// with one shared standard deviation.
struct EmissionModel {
  EmissionFamily family = EmissionFamily::Poisson;
  std::vector<double> params;  // rates (Poisson) or means (normal)
  double sigma = 1.0;          // normal only

  static EmissionModel poisson(std::vector<double> rates);
  static EmissionModel normal(std::vector<double> means, double sigma);

  std::size_t state_count() const { return params.size(); }
};

// Smallest admissible sigma or rate; updates are floored here to avoid
// degenerate densities.
inline constexpr double kMinScale = 1e-12;

// log beta_state(x); log 1 = 0 when x is missing. Throws
// InvalidObservationError for a negative or non-integer x under Poisson.
double log_emission(const EmissionModel& model, std::size_t state,
                    double x, bool missing = false);

// Convenience: log emission of position i of a series.
double log_emission_at(const EmissionModel& model, std::size_t state,
                       const ObservationSeries& data, std::size_t i);

// ---------------------------------------------------------------------------
// Hidden chains

enum class ChainKind { Level, Segment };

// Level chain: L states, per-state exit probabilities eta_r, transitions
// allowed between any pair of states. Segment chain: K states, the state may
// only stay or increment, with a single fixed eta (its value does not affect
// any posterior conditioned on segment evidence).
struct ChainSpec {
  ChainKind kind = ChainKind::Level;
  std::size_t state_count = 1;
  std::vector<double> exit_probs;  // level only, one per state
  double eta = 0.5;                // segment only
  std::vector<double> initial;     // level only; segment starts in state 0

  // Level initial distribution defaults to uniform; the documentation never
  // pins it, so expose it and let evidence constraints override when needed.
  static ChainSpec level(std::size_t L, std::vector<double> exit_probs,
                         std::vector<double> initial = {});
  static ChainSpec segment(std::size_t K, double eta = 0.5);

  double transition(std::size_t r, std::size_t s) const;
  double log_transition(std::size_t r, std::size_t s) const;
  double log_initial(std::size_t s) const;
};

// log alpha(r, s); -infinity for forbidden segment transitions.
double transition_log(const ChainSpec& chain, std::size_t r, std::size_t s);

// ---------------------------------------------------------------------------
// Evidence

// Per-position allowed hidden-state sets. Observation constraints (missing
// values) travel with ObservationSeries.
class Evidence {
 public:
  Evidence() = default;
  // All states allowed everywhere.
  Evidence(std::size_t n, std::size_t state_count);

  std::size_t length() const { return n_; }
  std::size_t state_count() const { return m_; }

  bool allowed(std::size_t i, std::size_t s) const {
    return allowed_[i * m_ + s];
  }
  // Number of allowed states at position i (always >= 1 after construction
  // unless forbid() emptied it; the lattice treats an empty set as
  // probability zero, not as an error).
  std::size_t allowed_count(std::size_t i) const;

  void forbid(std::size_t i, std::size_t s) { allowed_[i * m_ + s] = false; }
  // Restrict position i to exactly the given states.
  void restrict_to(std::size_t i, const std::vector<std::size_t>& states);

 private:
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::vector<bool> allowed_;
};

// Standard evidence: every state allowed at every position.
Evidence make_level_evidence(std::size_t n, std::size_t L);

// Segment evidence: state 0 at the first position, state K-1 at the last.
// Throws InfeasibleEvidenceError when n < K.
Evidence make_segment_evidence(std::size_t n, std::size_t K);

// Evidence matching the chain kind.
Evidence make_evidence(const ChainSpec& chain, std::size_t n);

}  // namespace cphmm

#endif  // CPHMM_MODEL_HPP
