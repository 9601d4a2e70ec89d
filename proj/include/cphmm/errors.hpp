#ifndef CPHMM_ERRORS_HPP
#define CPHMM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cphmm {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An observation is outside the support of the emission family
// (e.g. a negative or non-integer count under Poisson).
struct InvalidObservationError : Error {
  using Error::Error;
};

// The evidence admits no hidden-state sequence (e.g. fewer observations
// than segments).
struct InfeasibleEvidenceError : Error {
  using Error::Error;
};

// A segmentation contains an empty segment.
struct DegenerateSegmentError : Error {
  using Error::Error;
};

// Posterior quantities requested while the evidence has probability zero.
struct UndefinedPosteriorError : Error {
  using Error::Error;
};

// Viterbi decoding found no state path consistent with the evidence.
struct NoPathError : Error {
  using Error::Error;
};

// Exhaustive enumeration would exceed the configured budget.
struct BudgetError : Error {
  using Error::Error;
};

// Input could not be read or parsed; line is 1-based, 0 when the failure is
// not tied to a line.
struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t line_number)
      : Error(line_number == 0
                  ? msg
                  : msg + " (line " + std::to_string(line_number) + ")"),
        line(line_number) {}
  std::size_t line;
};

}  // namespace cphmm

#endif  // CPHMM_ERRORS_HPP
