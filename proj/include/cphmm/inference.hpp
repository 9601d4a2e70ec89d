#ifndef CPHMM_INFERENCE_HPP
#define CPHMM_INFERENCE_HPP

#include <cstdint>
#include <cstddef>
#include <utility>
#include <vector>

#include "cphmm/logsum.hpp"
#include "cphmm/matrix.hpp"
#include "cphmm/model.hpp"

namespace cphmm {

// ---------------------------------------------------------------------------
// Lattice

// Log-domain forward and backward tables plus the log evidence probability.
// The masked emission table (state masks folded in as -infinity, missing
// observations as zero terms) is kept so that posterior and sampling
// computations are self-contained.
struct Lattice {
  ChainSpec chain;
  Matrix log_emission;  // n x M, masked
  Matrix log_forward;   // n x M
  Matrix log_backward;  // n x M
  double log_evidence = kLogZero;

  std::size_t length() const { return log_forward.rows(); }
  std::size_t state_count() const { return log_forward.cols(); }
};

// n x M table of log beta_s(x_i) with evidence masks folded in:
// -infinity where the state is disallowed, 0 contribution where the
// observation is missing.
Matrix masked_emission_table(const ChainSpec& chain,
                             const EmissionModel& emissions,
                             const ObservationSeries& data,
                             const Evidence& ev);

// Forward table: log F_i(s), the joint log probability of the evidence up to
// position i and state s at i. Infeasible evidence is not an error; it
// surfaces as an all-(-infinity) final row.
Matrix forward(const ChainSpec& chain, const EmissionModel& emissions,
               const ObservationSeries& data, const Evidence& ev);

// Backward table: log B_i(s) with the convention B at the last position
// equal to 1 for allowed states (-infinity where masked).
Matrix backward(const ChainSpec& chain, const EmissionModel& emissions,
                const ObservationSeries& data, const Evidence& ev);

// Runs both recursions and the evidence probability. The segment kind costs
// O(Kn); the level kind O(n L^2).
Lattice make_lattice(const ChainSpec& chain, const EmissionModel& emissions,
                     const ObservationSeries& data, const Evidence& ev);

double log_evidence(const Lattice& lattice);

// Largest deviation over positions i of logsumexp_s(F_i + B_i) from the
// log evidence; the classic lattice consistency check.
double max_separator_deviation(const Lattice& lattice);

// ---------------------------------------------------------------------------
// Posteriors

// n x M table of P(S_i = s | E). Rows sum to 1. Throws
// UndefinedPosteriorError when the evidence has probability zero.
Matrix posterior_states(const Lattice& lattice);

// P(S_i = r, S_{i+1} = s | E) for i in [0, n-2].
double posterior_pair(const Lattice& lattice, std::size_t i, std::size_t r,
                      std::size_t s);

// Posterior change-point distributions, normalized by the evidence
// probability. Level kind: probs is 1 x (n-1), entry i the probability of
// any state change between positions i and i+1. Segment kind: probs is
// (K-1) x (n-1); row r is the distribution of the (r+1)-th change-point,
// i.e. the last position of segment r+1, and sums to 1.
struct ChangePointPosterior {
  ChainKind kind = ChainKind::Level;
  Matrix probs;
};

ChangePointPosterior changepoint_posterior(const Lattice& lattice);

// ---------------------------------------------------------------------------
// Decoding and sampling

using StatePath = std::vector<std::size_t>;

// Most probable state path under the evidence and its log joint probability.
// Ties break toward the lowest state index. Throws NoPathError when the
// evidence is infeasible.
std::pair<StatePath, double> viterbi(const ChainSpec& chain,
                                     const EmissionModel& emissions,
                                     const ObservationSeries& data,
                                     const Evidence& ev);

// Log joint probability of a specific path together with the evidence;
// -infinity if the path violates a mask or a forbidden transition.
double path_log_joint(const ChainSpec& chain, const EmissionModel& emissions,
                      const ObservationSeries& data, const Evidence& ev,
                      const StatePath& path);

enum class SampleDirection { Forward, Backward };

// count i.i.d. paths from P(S | E). Each path owns an RNG stream derived
// from (seed, path index), so results do not depend on thread count.
std::vector<StatePath> sample_paths(const Lattice& lattice,
                                    SampleDirection direction,
                                    std::size_t count, std::uint64_t seed);

}  // namespace cphmm

#endif  // CPHMM_INFERENCE_HPP
