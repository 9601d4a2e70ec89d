#ifndef CPHMM_REFERENCE_HPP
#define CPHMM_REFERENCE_HPP

#include <cstdint>
#include <vector>

#include "cphmm/inference.hpp"
#include "cphmm/matrix.hpp"
#include "cphmm/model.hpp"

// Plain serial implementations of the data-parallel kernels, kept as the
// ground truth the OpenMP versions are tested and benchmarked against, plus
// a linear-domain forward-backward that shows why the log scale is needed.
namespace cphmm::reference {

// Serial counterparts of the kernels in cphmm/inference.hpp. Same
// element-wise arithmetic, no parallel pragmas; results are bitwise equal.
Matrix masked_emission_table(const ChainSpec& chain,
                             const EmissionModel& emissions,
                             const ObservationSeries& data,
                             const Evidence& ev);
Matrix posterior_states(const Lattice& lattice);
ChangePointPosterior changepoint_posterior(const Lattice& lattice);
std::vector<StatePath> sample_paths(const Lattice& lattice,
                                    SampleDirection direction,
                                    std::size_t count, std::uint64_t seed);

// Forward-backward on raw probabilities. Underflows for long series; useful
// only at desk scale and for demonstrating the failure mode.
struct LinearLattice {
  Matrix forward_table;   // n x M
  Matrix backward_table;  // n x M
  double evidence = 0.0;  // becomes exactly 0 once the products underflow
};

LinearLattice linear_lattice(const ChainSpec& chain,
                             const EmissionModel& emissions,
                             const ObservationSeries& data,
                             const Evidence& ev);

Matrix posterior_states(const LinearLattice& lattice);

}  // namespace cphmm::reference

#endif  // CPHMM_REFERENCE_HPP
