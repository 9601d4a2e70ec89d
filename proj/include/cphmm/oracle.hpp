#ifndef CPHMM_ORACLE_HPP
#define CPHMM_ORACLE_HPP

#include <cstddef>

#include "cphmm/inference.hpp"
#include "cphmm/matrix.hpp"
#include "cphmm/model.hpp"

// Exact brute-force references at desk scale. Deliberately naive: every
// consistent hidden-state assignment is enumerated and the joint summed
// directly, so these implementations share nothing with the recursions they
// are used to check.
namespace cphmm::oracle {

struct EnumerationBudget {
  std::size_t max_sequences = 2'000'000;
};

struct Result {
  double log_evidence = kLogZero;
  Matrix posterior;       // n x M state marginals
  Matrix pair_posterior;  // (n-1) x (M*M); column r*M+s holds P(S_i=r, S_{i+1}=s | E)
  ChangePointPosterior changepoints;

  double pair(std::size_t i, std::size_t r, std::size_t s) const {
    return pair_posterior(i, r * posterior.cols() + s);
  }
};

// Sums the joint over all state_count^n sequences consistent with the
// evidence. Throws BudgetError when the enumeration would exceed the budget.
Result level(const ObservationSeries& data, const ChainSpec& chain,
             const EmissionModel& emissions, const Evidence& ev,
             EnumerationBudget budget = {});

// Enumerates every segmentation into K contiguous segments, weighting each
// by its likelihood under a uniform segmentation prior. eta only shifts the
// reported log evidence to the constrained-chain convention; it cannot move
// any posterior.
Result segment(const ObservationSeries& data, std::size_t K,
               const EmissionModel& emissions, double eta = 0.5,
               EnumerationBudget budget = {});

}  // namespace cphmm::oracle

#endif  // CPHMM_ORACLE_HPP
