#ifndef CPHMM_LOGSUM_HPP
#define CPHMM_LOGSUM_HPP

#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>

namespace cphmm {

// Natural-log scale probability. -infinity encodes exact zero; values may be
// positive for unnormalized joints of continuous densities.
using LogProb = double;

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline bool is_log_zero(double x) { return x == kLogZero; }

// log(exp(a) + exp(b)) without leaving the log scale.
inline double logsumexp2(double a, double b) {
  if (a < b) std::swap(a, b);
  if (is_log_zero(a)) return kLogZero;  // both zero
  if (is_log_zero(b)) return a;
  return a + std::log1p(std::exp(b - a));
}

// log sum_j exp(z_j), anchored at the maximum element so that only
// non-positive values are exponentiated; the residual sum goes through
// log1p. Empty input is a contract violation. All entries -infinity
// yields -infinity. NaN must never appear.
inline double logsumexp(std::span<const double> z) {
  assert(!z.empty() && "logsumexp of empty sequence");
  std::size_t arg_max = 0;
  double m = z[0];
  for (std::size_t j = 1; j < z.size(); ++j) {
    if (z[j] > m) {
      m = z[j];
      arg_max = j;
    }
  }
  if (is_log_zero(m)) return kLogZero;
  double rest = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (j != arg_max) rest += std::exp(z[j] - m);
  }
  double out = m + std::log1p(rest);
  assert(!std::isnan(out));
  return out;
}

}  // namespace cphmm

#endif  // CPHMM_LOGSUM_HPP
