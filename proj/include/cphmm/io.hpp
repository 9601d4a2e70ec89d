#ifndef CPHMM_IO_HPP
#define CPHMM_IO_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "cphmm/inference.hpp"
#include "cphmm/matrix.hpp"
#include "cphmm/model.hpp"

namespace cphmm::io {

// Reads a single-column CSV (optional header). An empty field or the token
// NA marks a missing observation. Throws ParseError with the offending line.
ObservationSeries read_series(std::istream& in);
ObservationSeries read_series_file(const std::string& path);

// Formats a probability with 10 significant digits.
std::string format_probability(double p);

// Writes the posterior CSV: a position column (1-based), one column per
// state marginal, then one column per change-point distribution. Change-point
// cells of the final row are empty since no change can follow the last
// observation.
void write_posterior_csv(std::ostream& out, const Matrix& state_posterior,
                         const ChangePointPosterior& cp);

// One path per row: sample index then the 1-based states.
void write_paths_csv(std::ostream& out, const std::vector<StatePath>& paths);

void write_viterbi_csv(std::ostream& out, const StatePath& path);

}  // namespace cphmm::io

#endif  // CPHMM_IO_HPP
