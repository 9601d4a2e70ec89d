#include "cphmm/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cphmm/errors.hpp"

namespace cphmm {

ObservationSeries::ObservationSeries(std::vector<double> vals,
                                     std::vector<bool> miss)
    : values(std::move(vals)), missing(std::move(miss)) {
  if (values.empty()) throw Error("observation series must not be empty");
  if (!missing.empty() && missing.size() != values.size())
    throw Error("missing-flag vector length differs from series length");
}

std::size_t ObservationSeries::observed_count() const {
  if (missing.empty()) return values.size();
  std::size_t k = 0;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!missing[i]) ++k;
  return k;
}

EmissionModel EmissionModel::poisson(std::vector<double> rates) {
  if (rates.empty()) throw Error("Poisson model needs at least one rate");
  for (double r : rates)
    if (!(r > 0.0)) throw Error("Poisson rates must be positive");
  EmissionModel m;
  m.family = EmissionFamily::Poisson;
  m.params = std::move(rates);
  return m;
}

EmissionModel EmissionModel::normal(std::vector<double> means, double sigma) {
  if (means.empty()) throw Error("normal model needs at least one mean");
  if (!(sigma > 0.0)) throw Error("sigma must be positive");
  EmissionModel m;
  m.family = EmissionFamily::NormalHomoscedastic;
  m.params = std::move(means);
  m.sigma = sigma;
  return m;
}

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double poisson_log_pmf(double rate, double x) {
  if (x < 0.0 || std::floor(x) != x || !std::isfinite(x))
    throw InvalidObservationError(
        "Poisson observations must be non-negative integers, got " +
        std::to_string(x));
  return x * std::log(rate) - rate - std::lgamma(x + 1.0);
}

}  // namespace

double log_emission(const EmissionModel& model, std::size_t state, double x,
                    bool missing) {
  if (state >= model.state_count())
    throw Error("emission state index out of range");
  if (missing) return 0.0;  // an unobserved value contributes a factor of 1
  switch (model.family) {
    case EmissionFamily::Poisson:
      return poisson_log_pmf(model.params[state], x);
    case EmissionFamily::NormalHomoscedastic: {
      const double z = (x - model.params[state]) / model.sigma;
      return -kHalfLog2Pi - std::log(model.sigma) - 0.5 * z * z;
    }
  }
  return kLogZero;  // unreachable
}

double log_emission_at(const EmissionModel& model, std::size_t state,
                       const ObservationSeries& data, std::size_t i) {
  return log_emission(model, state, data.values[i], data.is_missing(i));
}

ChainSpec ChainSpec::level(std::size_t L, std::vector<double> exit_probs,
                           std::vector<double> initial) {
  if (L < 1) throw Error("level chain needs at least one state");
  if (exit_probs.size() != L)
    throw Error("level chain needs one exit probability per state");
  for (double e : exit_probs)
    if (!(e >= 0.0 && e <= 1.0))
      throw Error("exit probabilities must lie in [0, 1]");
  if (initial.empty()) {
    initial.assign(L, 1.0 / static_cast<double>(L));
  } else {
    if (initial.size() != L)
      throw Error("initial distribution length differs from state count");
    double total = 0.0;
    for (double p : initial) {
      if (!(p >= 0.0)) throw Error("initial probabilities must be >= 0");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw Error("initial distribution must sum to 1");
  }
  ChainSpec c;
  c.kind = ChainKind::Level;
  c.state_count = L;
  c.exit_probs = std::move(exit_probs);
  c.initial = std::move(initial);
  return c;
}

ChainSpec ChainSpec::segment(std::size_t K, double eta) {
  if (K < 1) throw Error("segment chain needs at least one state");
  if (!(eta > 0.0 && eta < 1.0)) throw Error("eta must lie in (0, 1)");
  ChainSpec c;
  c.kind = ChainKind::Segment;
  c.state_count = K;
  c.eta = eta;
  return c;
}

double ChainSpec::transition(std::size_t r, std::size_t s) const {
  if (r >= state_count || s >= state_count)
    throw Error("transition state index out of range");
  if (kind == ChainKind::Level) {
    if (state_count == 1) return 1.0;  // only one place to go
    if (s == r) return 1.0 - exit_probs[r];
    return exit_probs[r] / static_cast<double>(state_count - 1);
  }
  // Segment: stay or step up by one. The absorbing overflow state is never
  // materialized; conditioning on ending in the last segment gives it zero
  // posterior mass, so the last row keeps 1 - eta on the diagonal.
  if (s == r) return 1.0 - eta;
  if (s == r + 1) return eta;
  return 0.0;
}

double ChainSpec::log_transition(std::size_t r, std::size_t s) const {
  const double a = transition(r, s);
  return a > 0.0 ? std::log(a) : kLogZero;
}

double ChainSpec::log_initial(std::size_t s) const {
  if (s >= state_count) throw Error("initial state index out of range");
  if (kind == ChainKind::Segment) return s == 0 ? 0.0 : kLogZero;
  return initial[s] > 0.0 ? std::log(initial[s]) : kLogZero;
}

double transition_log(const ChainSpec& chain, std::size_t r, std::size_t s) {
  return chain.log_transition(r, s);
}

Evidence::Evidence(std::size_t n, std::size_t state_count)
    : n_(n), m_(state_count), allowed_(n * state_count, true) {
  if (n < 1) throw Error("evidence needs at least one position");
  if (state_count < 1) throw Error("evidence needs at least one state");
}

std::size_t Evidence::allowed_count(std::size_t i) const {
  std::size_t k = 0;
  for (std::size_t s = 0; s < m_; ++s)
    if (allowed(i, s)) ++k;
  return k;
}

void Evidence::restrict_to(std::size_t i,
                           const std::vector<std::size_t>& states) {
  if (states.empty()) throw Error("cannot restrict a position to no states");
  for (std::size_t s = 0; s < m_; ++s) allowed_[i * m_ + s] = false;
  for (std::size_t s : states) {
    if (s >= m_) throw Error("restricted state index out of range");
    allowed_[i * m_ + s] = true;
  }
}

Evidence make_level_evidence(std::size_t n, std::size_t L) {
  return Evidence(n, L);
}

Evidence make_segment_evidence(std::size_t n, std::size_t K) {
  if (n < K)
    throw InfeasibleEvidenceError(
        "cannot place " + std::to_string(K) + " segments on " +
        std::to_string(n) + " observations");
  Evidence ev(n, K);
  ev.restrict_to(0, {0});
  ev.restrict_to(n - 1, {K - 1});
  return ev;
}

Evidence make_evidence(const ChainSpec& chain, std::size_t n) {
  return chain.kind == ChainKind::Level
             ? make_level_evidence(n, chain.state_count)
             : make_segment_evidence(n, chain.state_count);
}

}  // namespace cphmm
