#include "cphmm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cphmm/errors.hpp"

namespace cphmm::oracle {

namespace {

// state_count^n with a cap so the check itself cannot overflow.
std::size_t checked_power(std::size_t base, std::size_t exp,
                          std::size_t cap) {
  std::size_t out = 1;
  for (std::size_t k = 0; k < exp; ++k) {
    if (out > cap / base) return cap + 1;
    out *= base;
  }
  return out;
}

std::size_t checked_binomial(std::size_t n, std::size_t k, std::size_t cap) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::size_t out = 1;
  for (std::size_t j = 1; j <= k; ++j) {
    // out * (n - k + j) / j stays integral at every step
    if (out > cap * j / (n - k + j)) return cap + 1;
    out = out * (n - k + j) / j;
  }
  return out;
}

// Accumulates exp(lj - anchor) in extended precision; posteriors come out
// exactly normalized.
struct Accumulator {
  explicit Accumulator(std::size_t n, std::size_t m)
      : m_(m),
        post(n * m, 0.0L),
        pair(n > 1 ? (n - 1) * m * m : 0, 0.0L) {}

  void add(const std::vector<std::size_t>& path, long double w) {
    total += w;
    for (std::size_t i = 0; i < path.size(); ++i) {
      post[i * m_ + path[i]] += w;
      if (i + 1 < path.size())
        pair[i * m_ * m_ + path[i] * m_ + path[i + 1]] += w;
    }
  }

  std::size_t m_;
  long double total = 0.0L;
  std::vector<long double> post;
  std::vector<long double> pair;
};

Result finalize(const Accumulator& acc, std::size_t n, std::size_t m,
                double anchor, double log_prior_const, ChainKind kind) {
  Result res;
  if (acc.total <= 0.0L) return res;  // infeasible evidence
  res.log_evidence =
      anchor + static_cast<double>(std::log(acc.total)) + log_prior_const;
  res.posterior = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < m; ++s)
      res.posterior(i, s) =
          static_cast<double>(acc.post[i * m + s] / acc.total);
  res.pair_posterior = Matrix(n > 1 ? n - 1 : 0, m * m);
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t c = 0; c < m * m; ++c)
      res.pair_posterior(i, c) =
          static_cast<double>(acc.pair[i * m * m + c] / acc.total);
  res.changepoints.kind = kind;
  if (kind == ChainKind::Level) {
    res.changepoints.probs = Matrix(1, n > 1 ? n - 1 : 0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      long double p = 0.0L;
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t s = 0; s < m; ++s)
          if (r != s) p += acc.pair[i * m * m + r * m + s];
      res.changepoints.probs(0, i) = static_cast<double>(p / acc.total);
    }
  } else {
    res.changepoints.probs = Matrix(m - 1, n > 1 ? n - 1 : 0);
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (std::size_t r = 0; r + 1 < m; ++r)
        res.changepoints.probs(r, i) = static_cast<double>(
            acc.pair[i * m * m + r * m + (r + 1)] / acc.total);
  }
  return res;
}

}  // namespace

Result level(const ObservationSeries& data, const ChainSpec& chain,
             const EmissionModel& emissions, const Evidence& ev,
             EnumerationBudget budget) {
  if (chain.kind != ChainKind::Level)
    throw Error("oracle::level needs a level chain");
  if (emissions.state_count() != chain.state_count)
    throw Error("emission parameter count differs from chain state count");
  if (ev.length() != data.size() || ev.state_count() != chain.state_count)
    throw Error("evidence shape mismatch");
  const std::size_t n = data.size(), m = chain.state_count;
  if (checked_power(m, n, budget.max_sequences) > budget.max_sequences)
    throw BudgetError("level enumeration of " + std::to_string(m) + "^" +
                      std::to_string(n) + " sequences exceeds the budget");

  // Precompute per-position log emissions once; the sweep below is O(n) per
  // sequence.
  Matrix log_beta(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < m; ++s)
      log_beta(i, s) = log_emission_at(emissions, s, data, i);

  const auto log_joint = [&](const std::vector<std::size_t>& path) {
    for (std::size_t i = 0; i < n; ++i)
      if (!ev.allowed(i, path[i])) return kLogZero;
    double lj = chain.log_initial(path[0]) + log_beta(0, path[0]);
    for (std::size_t i = 1; i < n; ++i)
      lj += chain.log_transition(path[i - 1], path[i]) + log_beta(i, path[i]);
    return lj;
  };

  const auto for_each_path = [&](auto&& fn) {
    std::vector<std::size_t> path(n, 0);
    while (true) {
      fn(path);
      std::size_t i = 0;
      while (i < n && ++path[i] == m) path[i++] = 0;
      if (i == n) break;
    }
  };

  double anchor = kLogZero;
  for_each_path([&](const std::vector<std::size_t>& p) {
    anchor = std::max(anchor, log_joint(p));
  });
  Accumulator acc(n, m);
  if (!is_log_zero(anchor)) {
    for_each_path([&](const std::vector<std::size_t>& p) {
      const double lj = log_joint(p);
      if (!is_log_zero(lj))
        acc.add(p, std::exp(static_cast<long double>(lj - anchor)));
    });
  }
  return finalize(acc, n, m, anchor, 0.0, ChainKind::Level);
}

Result segment(const ObservationSeries& data, std::size_t K,
               const EmissionModel& emissions, double eta,
               EnumerationBudget budget) {
  if (K < 1) throw Error("segment oracle needs at least one segment");
  if (emissions.state_count() != K)
    throw Error("emission parameter count differs from segment count");
  if (!(eta > 0.0 && eta < 1.0)) throw Error("eta must lie in (0, 1)");
  const std::size_t n = data.size();
  if (n < K)
    throw InfeasibleEvidenceError("cannot place " + std::to_string(K) +
                                  " segments on " + std::to_string(n) +
                                  " observations");
  if (checked_binomial(n - 1, K - 1, budget.max_sequences) >
      budget.max_sequences)
    throw BudgetError("segmentation enumeration exceeds the budget");

  Matrix log_beta(n, K);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < K; ++s)
      log_beta(i, s) = log_emission_at(emissions, s, data, i);

  // Change-points hold the last 0-based index of each segment but the final
  // one; strictly increasing values in [0, n-2].
  const auto path_of = [&](const std::vector<std::size_t>& cps) {
    std::vector<std::size_t> path(n);
    std::size_t seg = 0;
    for (std::size_t i = 0; i < n; ++i) {
      path[i] = seg;
      if (seg < cps.size() && i == cps[seg]) ++seg;
    }
    return path;
  };

  const auto log_lik = [&](const std::vector<std::size_t>& path) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) ll += log_beta(i, path[i]);
    return ll;
  };

  const auto for_each_segmentation = [&](auto&& fn) {
    std::vector<std::size_t> cps(K - 1);
    for (std::size_t r = 0; r + 1 < K; ++r) cps[r] = r;
    while (true) {
      fn(path_of(cps));
      if (K == 1) break;
      // next combination from {0, ..., n-2}; slot t tops out at n-K+t
      std::size_t j = K - 1;
      while (j > 0 && cps[j - 1] == n - K + (j - 1)) --j;
      if (j == 0) break;
      ++cps[j - 1];
      for (std::size_t t = j; t + 1 < K; ++t) cps[t] = cps[t - 1] + 1;
    }
  };

  double anchor = kLogZero;
  for_each_segmentation([&](const std::vector<std::size_t>& p) {
    anchor = std::max(anchor, log_lik(p));
  });
  Accumulator acc(n, K);
  for_each_segmentation([&](const std::vector<std::size_t>& p) {
    acc.add(p, std::exp(static_cast<long double>(log_lik(p) - anchor)));
  });
  // Every staircase path shares the same prior weight under the constrained
  // chain: K-1 steps, n-K stays, and a point-mass start.
  const double log_prior = static_cast<double>(K - 1) * std::log(eta) +
                           static_cast<double>(n - K) * std::log1p(-eta);
  return finalize(acc, n, K, anchor, log_prior, ChainKind::Segment);
}

}  // namespace cphmm::oracle
