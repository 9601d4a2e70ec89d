#include "cphmm/reference.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <random>

#include "cphmm/errors.hpp"

namespace cphmm::reference {

Matrix masked_emission_table(const ChainSpec& chain,
                             const EmissionModel& emissions,
                             const ObservationSeries& data,
                             const Evidence& ev) {
  const std::size_t n = data.size(), m = chain.state_count;
  Matrix e(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < m; ++s)
      e(i, s) = ev.allowed(i, s) ? log_emission_at(emissions, s, data, i)
                                 : kLogZero;
  return e;
}

namespace {

double clamped_posterior(double log_value, double log_z) {
  return std::clamp(std::exp(log_value - log_z), 0.0, 1.0);
}

}  // namespace

Matrix posterior_states(const Lattice& lattice) {
  if (is_log_zero(lattice.log_evidence))
    throw UndefinedPosteriorError(
        "evidence has probability zero; posteriors are undefined");
  const std::size_t n = lattice.length(), m = lattice.state_count();
  Matrix p(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < m; ++s)
      p(i, s) = clamped_posterior(
          lattice.log_forward(i, s) + lattice.log_backward(i, s),
          lattice.log_evidence);
  return p;
}

ChangePointPosterior changepoint_posterior(const Lattice& lattice) {
  if (is_log_zero(lattice.log_evidence))
    throw UndefinedPosteriorError(
        "evidence has probability zero; posteriors are undefined");
  const std::size_t n = lattice.length(), m = lattice.state_count();
  const double log_z = lattice.log_evidence;
  ChangePointPosterior cp;
  cp.kind = lattice.chain.kind;
  if (n < 2) {
    cp.probs = Matrix(cp.kind == ChainKind::Level ? 1 : m - 1, 0);
    return cp;
  }
  if (cp.kind == ChainKind::Level) {
    cp.probs = Matrix(1, n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      double total = 0.0;
      for (std::size_t r = 0; r < m; ++r) {
        if (is_log_zero(lattice.log_forward(i, r))) continue;
        for (std::size_t s = 0; s < m; ++s) {
          if (s == r) continue;
          total += clamped_posterior(
              lattice.log_forward(i, r) + lattice.chain.log_transition(r, s) +
                  lattice.log_emission(i + 1, s) +
                  lattice.log_backward(i + 1, s),
              log_z);
        }
      }
      cp.probs(0, i) = std::clamp(total, 0.0, 1.0);
    }
    return cp;
  }
  cp.probs = Matrix(m - 1, n - 1);
  const double log_step = std::log(lattice.chain.eta);
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t r = 0; r + 1 < m; ++r)
      cp.probs(r, i) = clamped_posterior(
          lattice.log_forward(i, r) + log_step +
              lattice.log_emission(i + 1, r + 1) +
              lattice.log_backward(i + 1, r + 1),
          log_z);
  return cp;
}

namespace {

// Same seed mixing and uniform construction as the parallel sampler, so the
// two produce identical paths for identical (seed, index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double next_uniform(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

std::size_t draw(const std::vector<double>& log_weights, std::mt19937_64& g) {
  double m = kLogZero;
  for (double lw : log_weights) m = std::max(m, lw);
  assert(!is_log_zero(m));
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
  return last_positive;
}

}  // namespace

std::vector<StatePath> sample_paths(const Lattice& lattice,
                                    SampleDirection direction,
                                    std::size_t count, std::uint64_t seed) {
  if (is_log_zero(lattice.log_evidence))
    throw UndefinedPosteriorError(
        "evidence has probability zero; posteriors are undefined");
  const std::size_t n = lattice.length(), m = lattice.state_count();
  std::vector<StatePath> paths(count);
  std::vector<double> lw(m);
  for (std::size_t p = 0; p < count; ++p) {
    std::mt19937_64 g(mix_seed(seed, p));
    StatePath path(n);
    if (direction == SampleDirection::Forward) {
      for (std::size_t s = 0; s < m; ++s)
        lw[s] = lattice.log_forward(0, s) + lattice.log_backward(0, s);
      path[0] = draw(lw, g);
      for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t s = 0; s < m; ++s)
          lw[s] = lattice.chain.log_transition(path[i - 1], s) +
                  lattice.log_emission(i, s) + lattice.log_backward(i, s);
        path[i] = draw(lw, g);
      }
    } else {
      for (std::size_t s = 0; s < m; ++s)
        lw[s] = lattice.log_forward(n - 1, s) + lattice.log_backward(n - 1, s);
      path[n - 1] = draw(lw, g);
      for (std::size_t i = n - 1; i > 0; --i) {
        for (std::size_t r = 0; r < m; ++r)
          lw[r] = lattice.log_forward(i - 1, r) +
                  lattice.chain.log_transition(r, path[i]);
        path[i - 1] = draw(lw, g);
      }
    }
    paths[p] = std::move(path);
  }
  return paths;
}

LinearLattice linear_lattice(const ChainSpec& chain,
                             const EmissionModel& emissions,
                             const ObservationSeries& data,
                             const Evidence& ev) {
  const std::size_t n = data.size(), m = chain.state_count;
  // Masked emission probabilities on the raw scale.
  Matrix beta(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < m; ++s)
      beta(i, s) = ev.allowed(i, s)
                       ? std::exp(log_emission_at(emissions, s, data, i))
                       : 0.0;
  LinearLattice lat;
  lat.forward_table = Matrix(n, m, 0.0);
  lat.backward_table = Matrix(n, m, 0.0);
  Matrix& f = lat.forward_table;
  Matrix& b = lat.backward_table;
  for (std::size_t s = 0; s < m; ++s)
    f(0, s) = std::exp(chain.log_initial(s)) * beta(0, s);
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t s = 0; s < m; ++s) {
      double acc = 0.0;
      for (std::size_t r = 0; r < m; ++r)
        acc += f(i - 1, r) * chain.transition(r, s);
      f(i, s) = acc * beta(i, s);
    }
  for (std::size_t s = 0; s < m; ++s)
    b(n - 1, s) = ev.allowed(n - 1, s) ? 1.0 : 0.0;
  for (std::size_t i = n - 1; i > 0; --i)
    for (std::size_t r = 0; r < m; ++r) {
      double acc = 0.0;
      for (std::size_t s = 0; s < m; ++s)
        acc += chain.transition(r, s) * beta(i, s) * b(i, s);
      b(i - 1, r) = acc;
    }
  double z = 0.0;
  for (std::size_t s = 0; s < m; ++s) z += f(n - 1, s);
  lat.evidence = z;
  return lat;
}

Matrix posterior_states(const LinearLattice& lattice) {
  if (lattice.evidence <= 0.0)
    throw UndefinedPosteriorError(
        "linear-scale evidence vanished; posteriors are undefined");
  const std::size_t n = lattice.forward_table.rows();
  const std::size_t m = lattice.forward_table.cols();
  Matrix p(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < m; ++s)
      p(i, s) = lattice.forward_table(i, s) * lattice.backward_table(i, s) /
                lattice.evidence;
  return p;
}

}  // namespace cphmm::reference
