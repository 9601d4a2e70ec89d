#include "cphmm/inference.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "cphmm/errors.hpp"

namespace cphmm {

namespace {

void validate_inputs(const ChainSpec& chain, const EmissionModel& emissions,
                     const ObservationSeries& data, const Evidence& ev) {
  if (emissions.state_count() != chain.state_count)
    throw Error("emission parameter count differs from chain state count");
  if (ev.length() != data.size())
    throw Error("evidence length differs from series length");
  if (ev.state_count() != chain.state_count)
    throw Error("evidence state count differs from chain state count");
  // Surface invalid observations here, before any parallel region.
  if (emissions.family == EmissionFamily::Poisson)
    for (std::size_t i = 0; i < data.size(); ++i)
      if (!data.is_missing(i)) log_emission(emissions, 0, data.values[i]);
}

// Forward recursion over a masked emission table. Sequential in i by nature;
// the segment kind only visits the stay/step transitions.
Matrix forward_core(const ChainSpec& chain, const Matrix& e) {
  const std::size_t n = e.rows(), m = e.cols();
  Matrix f(n, m, kLogZero);
  for (std::size_t s = 0; s < m; ++s)
    f(0, s) = chain.log_initial(s) + e(0, s);
  if (chain.kind == ChainKind::Segment) {
    const double log_stay = std::log1p(-chain.eta);
    const double log_step = std::log(chain.eta);
    for (std::size_t i = 1; i < n; ++i)
      for (std::size_t s = 0; s < m; ++s) {
        const double stay = f(i - 1, s) + log_stay;
        const double step = s > 0 ? f(i - 1, s - 1) + log_step : kLogZero;
        f(i, s) = logsumexp2(stay, step) + e(i, s);
      }
    return f;
  }
  std::vector<double> terms(m);
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t s = 0; s < m; ++s) {
      for (std::size_t r = 0; r < m; ++r)
        terms[r] = f(i - 1, r) + chain.log_transition(r, s);
      f(i, s) = logsumexp(terms) + e(i, s);
    }
  return f;
}

Matrix backward_core(const ChainSpec& chain, const Matrix& e,
                     const Evidence& ev) {
  const std::size_t n = e.rows(), m = e.cols();
  Matrix b(n, m, kLogZero);
  // B at the last position is 1 for allowed states, zero elsewhere.
  for (std::size_t s = 0; s < m; ++s)
    if (ev.allowed(n - 1, s)) b(n - 1, s) = 0.0;
  if (chain.kind == ChainKind::Segment) {
    const double log_stay = std::log1p(-chain.eta);
    const double log_step = std::log(chain.eta);
    for (std::size_t i = n - 1; i > 0; --i)
      for (std::size_t r = 0; r < m; ++r) {
        const double stay = log_stay + e(i, r) + b(i, r);
        const double step =
            r + 1 < m ? log_step + e(i, r + 1) + b(i, r + 1) : kLogZero;
        b(i - 1, r) = logsumexp2(stay, step);
      }
    return b;
  }
  std::vector<double> terms(m);
  for (std::size_t i = n - 1; i > 0; --i)
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t s = 0; s < m; ++s)
        terms[s] = chain.log_transition(r, s) + e(i, s) + b(i, s);
      b(i - 1, r) = logsumexp(terms);
    }
  return b;
}

}  // namespace

Matrix masked_emission_table(const ChainSpec& chain,
                             const EmissionModel& emissions,
                             const ObservationSeries& data,
                             const Evidence& ev) {
  validate_inputs(chain, emissions, data, ev);
  const std::size_t n = data.size(), m = chain.state_count;
  Matrix e(n, m);
  const auto ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < ni; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (std::size_t s = 0; s < m; ++s)
      e(ui, s) = ev.allowed(ui, s)
                     ? log_emission_at(emissions, s, data, ui)
                     : kLogZero;
  }
  return e;
}

Matrix forward(const ChainSpec& chain, const EmissionModel& emissions,
               const ObservationSeries& data, const Evidence& ev) {
  return forward_core(chain, masked_emission_table(chain, emissions, data, ev));
}

Matrix backward(const ChainSpec& chain, const EmissionModel& emissions,
                const ObservationSeries& data, const Evidence& ev) {
  return backward_core(chain, masked_emission_table(chain, emissions, data, ev),
                       ev);
}

Lattice make_lattice(const ChainSpec& chain, const EmissionModel& emissions,
                     const ObservationSeries& data, const Evidence& ev) {
  Lattice lat;
  lat.chain = chain;
  lat.log_emission = masked_emission_table(chain, emissions, data, ev);
  lat.log_forward = forward_core(chain, lat.log_emission);
  lat.log_backward = backward_core(chain, lat.log_emission, ev);
  lat.log_evidence = logsumexp(lat.log_forward.row(data.size() - 1));
#ifndef NDEBUG
  assert(!std::isnan(lat.log_evidence));
  assert(max_separator_deviation(lat) <=
         1e-7 * std::max(1.0, std::abs(is_log_zero(lat.log_evidence)
                                           ? 0.0
                                           : lat.log_evidence)));
#endif
  return lat;
}

double log_evidence(const Lattice& lattice) { return lattice.log_evidence; }

double max_separator_deviation(const Lattice& lattice) {
  const std::size_t n = lattice.length(), m = lattice.state_count();
  double worst = 0.0;
  std::vector<double> terms(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < m; ++s)
      terms[s] = lattice.log_forward(i, s) + lattice.log_backward(i, s);
    const double z = logsumexp(terms);
    if (is_log_zero(z) && is_log_zero(lattice.log_evidence)) continue;
    worst = std::max(worst, std::abs(z - lattice.log_evidence));
  }
  return worst;
}

namespace {

double posterior_entry(double log_value, double log_z) {
  const double p = std::exp(log_value - log_z);
  assert(p <= 1.0 + 1e-6);
  return std::clamp(p, 0.0, 1.0);
}

void require_defined(const Lattice& lattice) {
  if (is_log_zero(lattice.log_evidence))
    throw UndefinedPosteriorError(
        "evidence has probability zero; posteriors are undefined");
}

}  // namespace

Matrix posterior_states(const Lattice& lattice) {
  require_defined(lattice);
  const std::size_t n = lattice.length(), m = lattice.state_count();
  Matrix p(n, m);
  const double log_z = lattice.log_evidence;
  const auto ni = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < ni; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (std::size_t s = 0; s < m; ++s)
      p(ui, s) = posterior_entry(
          lattice.log_forward(ui, s) + lattice.log_backward(ui, s), log_z);
  }
  return p;
}

double posterior_pair(const Lattice& lattice, std::size_t i, std::size_t r,
                      std::size_t s) {
  require_defined(lattice);
  if (i + 1 >= lattice.length()) throw Error("pair index out of range");
  if (r >= lattice.state_count() || s >= lattice.state_count())
    throw Error("pair state index out of range");
  const double lw = lattice.log_forward(i, r) +
                    lattice.chain.log_transition(r, s) +
                    lattice.log_emission(i + 1, s) +
                    lattice.log_backward(i + 1, s);
  return posterior_entry(lw, lattice.log_evidence);
}

ChangePointPosterior changepoint_posterior(const Lattice& lattice) {
  require_defined(lattice);
  const std::size_t n = lattice.length(), m = lattice.state_count();
  ChangePointPosterior cp;
  cp.kind = lattice.chain.kind;
  if (n < 2) {
    cp.probs = Matrix(cp.kind == ChainKind::Level ? 1 : (m > 0 ? m - 1 : 0),
                      0);
    return cp;
  }
  const double log_z = lattice.log_evidence;
  const auto ni = static_cast<std::int64_t>(n - 1);
  if (cp.kind == ChainKind::Level) {
    cp.probs = Matrix(1, n - 1);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < ni; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      double total = 0.0;
      for (std::size_t r = 0; r < m; ++r) {
        if (is_log_zero(lattice.log_forward(ui, r))) continue;
        for (std::size_t s = 0; s < m; ++s) {
          if (s == r) continue;
          total += posterior_entry(
              lattice.log_forward(ui, r) + lattice.chain.log_transition(r, s) +
                  lattice.log_emission(ui + 1, s) +
                  lattice.log_backward(ui + 1, s),
              log_z);
        }
      }
      cp.probs(0, ui) = std::clamp(total, 0.0, 1.0);
    }
    return cp;
  }
  // Segment kind: row r holds the posterior location of the transition from
  // segment r to r+1, which happens exactly once given the evidence.
  cp.probs = Matrix(m - 1, n - 1);
  const double log_step = std::log(lattice.chain.eta);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < ni; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (std::size_t r = 0; r + 1 < m; ++r)
      cp.probs(r, ui) = posterior_entry(
          lattice.log_forward(ui, r) + log_step +
              lattice.log_emission(ui + 1, r + 1) +
              lattice.log_backward(ui + 1, r + 1),
          log_z);
  }
  return cp;
}

std::pair<StatePath, double> viterbi(const ChainSpec& chain,
                                     const EmissionModel& emissions,
                                     const ObservationSeries& data,
                                     const Evidence& ev) {
  const Matrix e = masked_emission_table(chain, emissions, data, ev);
  const std::size_t n = e.rows(), m = e.cols();
  Matrix v(n, m, kLogZero);
  std::vector<std::size_t> back((n) * m, 0);
  for (std::size_t s = 0; s < m; ++s)
    v(0, s) = chain.log_initial(s) + e(0, s);
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t s = 0; s < m; ++s) {
      double best = kLogZero;
      std::size_t best_r = 0;
      if (chain.kind == ChainKind::Segment) {
        // Only stay (r = s) and step (r = s - 1) are possible; scan the
        // lower index first so ties keep it.
        for (std::size_t r = (s > 0 ? s - 1 : 0); r <= s; ++r) {
          const double cand = v(i - 1, r) + chain.log_transition(r, s);
          if (cand > best) {
            best = cand;
            best_r = r;
          }
        }
      } else {
        for (std::size_t r = 0; r < m; ++r) {
          const double cand = v(i - 1, r) + chain.log_transition(r, s);
          if (cand > best) {
            best = cand;
            best_r = r;
          }
        }
      }
      v(i, s) = best + e(i, s);
      back[i * m + s] = best_r;
    }
  double best = kLogZero;
  std::size_t best_s = 0;
  for (std::size_t s = 0; s < m; ++s)
    if (v(n - 1, s) > best) {
      best = v(n - 1, s);
      best_s = s;
    }
  if (is_log_zero(best))
    throw NoPathError("no state path is consistent with the evidence");
  StatePath path(n);
  path[n - 1] = best_s;
  for (std::size_t i = n - 1; i > 0; --i)
    path[i - 1] = back[i * m + path[i]];
  return {std::move(path), best};
}

double path_log_joint(const ChainSpec& chain, const EmissionModel& emissions,
                      const ObservationSeries& data, const Evidence& ev,
                      const StatePath& path) {
  validate_inputs(chain, emissions, data, ev);
  if (path.size() != data.size())
    throw Error("path length differs from series length");
  double lj = chain.log_initial(path[0]);
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (path[i] >= chain.state_count) throw Error("path state out of range");
    if (!ev.allowed(i, path[i])) return kLogZero;
    if (i > 0) {
      lj += chain.log_transition(path[i - 1], path[i]);
      if (is_log_zero(lj)) return kLogZero;
    }
    lj += log_emission_at(emissions, path[i], data, i);
  }
  return lj;
}

namespace {

// splitmix64 step; decorrelates per-path seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Uniform in [0, 1) from the top 53 bits; avoids the library distribution,
// whose stream is implementation-defined.
double next_uniform(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

std::size_t sample_categorical(std::span<const double> log_weights,
                               std::mt19937_64& g) {
  double m = kLogZero;
  for (double lw : log_weights) m = std::max(m, lw);
  assert(!is_log_zero(m) && "categorical draw over an empty support");
  double total = 0.0;
  for (double lw : log_weights) total += std::exp(lw - m);
  const double target = next_uniform(g) * total;
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t s = 0; s < log_weights.size(); ++s) {
    const double w = std::exp(log_weights[s] - m);
    if (w > 0.0) last_positive = s;
    cum += w;
    if (target < cum) return s;
  }
  return last_positive;  // rounding spillover
}

StatePath sample_one(const Lattice& lat, SampleDirection direction,
                     std::mt19937_64& g) {
  const std::size_t n = lat.length(), m = lat.state_count();
  StatePath path(n);
  std::vector<double> lw(m);
  if (direction == SampleDirection::Forward) {
    for (std::size_t s = 0; s < m; ++s)
      lw[s] = lat.log_forward(0, s) + lat.log_backward(0, s);
    path[0] = sample_categorical(lw, g);
    for (std::size_t i = 1; i < n; ++i) {
      const std::size_t r = path[i - 1];
      for (std::size_t s = 0; s < m; ++s)
        lw[s] = lat.chain.log_transition(r, s) + lat.log_emission(i, s) +
                lat.log_backward(i, s);
      path[i] = sample_categorical(lw, g);
    }
  } else {
    for (std::size_t s = 0; s < m; ++s)
      lw[s] = lat.log_forward(n - 1, s) + lat.log_backward(n - 1, s);
    path[n - 1] = sample_categorical(lw, g);
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t s = path[i];
      for (std::size_t r = 0; r < m; ++r)
        lw[r] = lat.log_forward(i - 1, r) + lat.chain.log_transition(r, s);
      path[i - 1] = sample_categorical(lw, g);
    }
  }
  return path;
}

}  // namespace

std::vector<StatePath> sample_paths(const Lattice& lattice,
                                    SampleDirection direction,
                                    std::size_t count, std::uint64_t seed) {
  require_defined(lattice);
  std::vector<StatePath> paths(count);
  const auto nc = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < nc; ++p) {
    std::mt19937_64 g(mix_seed(seed, static_cast<std::uint64_t>(p)));
    paths[static_cast<std::size_t>(p)] = sample_one(lattice, direction, g);
  }
  return paths;
}

}  // namespace cphmm
