// Acceptance suite: runs every advertised reproduction and robustness
// criterion at its pinned tolerance and prints one PASS/FAIL line each.
// Returns the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "cphmm/datasets.hpp"
#include "cphmm/estimate.hpp"
#include "cphmm/inference.hpp"
#include "cphmm/oracle.hpp"
#include "cphmm/reference.hpp"
#include "test_util.hpp"

using namespace cphmm;

namespace {

int g_failures = 0;

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion,
              detail.c_str());
  if (!ok) ++g_failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------- 1
void criterion_initialization() {
  const double t0 = now_s();
  const auto coal_cps = greedy_ls_changepoints(datasets::coal(), 3);
  const auto bt_cps = greedy_ls_changepoints(datasets::bt474(), 4);
  const double elapsed = now_s() - t0;
  const bool ok = coal_cps == std::vector<std::size_t>{35, 96} &&
                  bt_cps == std::vector<std::size_t>{67, 79, 95} &&
                  elapsed < 1.0;
  std::string detail = "greedy split: coal {";
  for (auto c : coal_cps) detail += std::to_string(c + 1) + " ";
  detail += "}, bt474 {";
  for (auto c : bt_cps) detail += std::to_string(c + 1) + " ";
  detail += "} in " + fmt(elapsed) + " s (want {36 97}, {68 80 96}, < 1 s)";
  report(1, ok, detail);
}

// ---------------------------------------------------------------------- 2
void criterion_mle() {
  bool ok = true;
  std::string detail = "MLE reproduction:";

  const auto coal = mle_from_segmentation(datasets::coal(), {35, 96},
                                          EmissionFamily::Poisson,
                                          ChainKind::Level);
  const double coal_want[3] = {3.25, 1.15, 0.27};
  double worst_coal = 0.0;
  for (int s = 0; s < 3; ++s)
    worst_coal = std::max(worst_coal,
                          std::abs(coal.emissions.params[s] - coal_want[s]));
  const bool coal_means_ok = worst_coal <= 0.005;
  const bool eta_ok = coal.chain.exit_probs[0] == 1.0 / 36 &&
                      coal.chain.exit_probs[1] == 1.0 / 61;
  detail += " coal rates max|d|=" + fmt(worst_coal) + " (<=0.005 " +
            (coal_means_ok ? "ok" : "FAIL") + "), coal exit probs " +
            (eta_ok ? "== (1/36, 1/61)" : "!= (1/36, 1/61) FAIL");
  ok = ok && coal_means_ok && eta_ok;

  const auto seg = mle_from_segmentation(datasets::bt474(), {67, 79, 95},
                                         EmissionFamily::NormalHomoscedastic,
                                         ChainKind::Segment);
  const double seg_want[4] = {0.289, -0.039, 0.224, -0.636};
  double worst_seg = 0.0;
  for (int s = 0; s < 4; ++s)
    worst_seg =
        std::max(worst_seg, std::abs(seg.emissions.params[s] - seg_want[s]));
  const bool seg_ok = worst_seg <= 0.001;
  detail += "; bt474 segment means (";
  for (int s = 0; s < 4; ++s)
    detail += fmt(seg.emissions.params[s]) + (s < 3 ? " " : "");
  detail += ") vs reference (0.289 -0.039 0.224 -0.636) max|d|=" +
            fmt(worst_seg) + (seg_ok ? " (<=0.001 ok)" : " (<=0.001 FAIL)");
  ok = ok && seg_ok;

  const auto lvl = mle_from_segmentation(datasets::bt474(), {67, 79, 95},
                                         EmissionFamily::NormalHomoscedastic,
                                         ChainKind::Level);
  const double lvl_want[3] = {0.271, -0.039, -0.636};
  double worst_lvl = 0.0;
  for (int s = 0; s < 3; ++s)
    worst_lvl =
        std::max(worst_lvl, std::abs(lvl.emissions.params[s] - lvl_want[s]));
  const bool lvl_ok = lvl.emissions.params.size() == 3 && worst_lvl <= 0.001;
  detail += "; bt474 level means max|d|=" + fmt(worst_lvl) +
            (lvl_ok ? " (<=0.001 ok)" : " (<=0.001 FAIL)");
  ok = ok && lvl_ok;

  report(2, ok, detail);
}

// ---------------------------------------------------------------------- 3
void criterion_cp3_peak() {
  const auto bt = datasets::bt474();
  const auto est = mle_from_segmentation(bt, {67, 79, 95},
                                         EmissionFamily::NormalHomoscedastic,
                                         ChainKind::Segment);
  const Lattice lat = make_lattice(est.chain, est.emissions, bt,
                                   make_segment_evidence(bt.size(), 4));
  const auto cp = changepoint_posterior(lat);
  std::size_t arg = 0;
  for (std::size_t i = 1; i < cp.probs.cols(); ++i)
    if (cp.probs(2, i) > cp.probs(2, arg)) arg = i;
  const double peak = cp.probs(2, arg);
  const bool ok = arg + 1 == 96 && peak > 0.9;
  report(3, ok,
         "third change-point peaks at position " + std::to_string(arg + 1) +
             " with " + fmt(peak) + " (want 96, > 0.9)");
}

// ---------------------------------------------------------------------- 4
void criterion_k3_k4_overlap() {
  // regression bound frozen after the first verified run measured 0.014403
  const double kBound = 0.02;
  const auto bt = datasets::bt474();
  const auto est4 = mle_from_segmentation(bt, greedy_ls_changepoints(bt, 4),
                                          EmissionFamily::NormalHomoscedastic,
                                          ChainKind::Segment);
  const auto cp4 = changepoint_posterior(make_lattice(
      est4.chain, est4.emissions, bt, make_segment_evidence(bt.size(), 4)));
  const auto est3 = mle_from_segmentation(bt, greedy_ls_changepoints(bt, 3),
                                          EmissionFamily::NormalHomoscedastic,
                                          ChainKind::Segment);
  const auto cp3 = changepoint_posterior(make_lattice(
      est3.chain, est3.emissions, bt, make_segment_evidence(bt.size(), 3)));
  double worst = 0.0;
  for (std::size_t i = 0; i < cp4.probs.cols(); ++i)
    worst = std::max(worst, std::abs(cp3.probs(1, i) - cp4.probs(2, i)));
  report(4, worst < kBound,
         "last change-point curves of K=3 and K=4 differ by " + fmt(worst) +
             " at most (bound " + fmt(kBound) + ")");
}

// ---------------------------------------------------------------------- 5
void criterion_oracle_suite() {
  const double t0 = now_s();
  std::mt19937_64 g(424242);
  double worst = 0.0;
  int checked = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto family = (rep & 1) ? EmissionFamily::Poisson
                                  : EmissionFamily::NormalHomoscedastic;
    const bool segment_kind = (rep & 2) != 0;
    const auto inst =
        segment_kind ? testutil::random_segment(g, 14, 4, family)
                     : testutil::random_level(g, 10, 3, family);
    const auto expected =
        segment_kind
            ? oracle::segment(inst.data, inst.chain.state_count, inst.emissions)
            : oracle::level(inst.data, inst.chain, inst.emissions, inst.ev);
    const Lattice lat =
        make_lattice(inst.chain, inst.emissions, inst.data, inst.ev);
    if (is_log_zero(expected.log_evidence)) {
      if (!is_log_zero(lat.log_evidence)) worst = 1.0;
      continue;
    }
    ++checked;
    worst =
        std::max(worst, std::abs(lat.log_evidence - expected.log_evidence));
    worst = std::max(
        worst, testutil::max_abs_diff(posterior_states(lat), expected.posterior));
    const std::size_t m = lat.state_count();
    for (std::size_t i = 0; i + 1 < lat.length(); ++i)
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t s = 0; s < m; ++s)
          worst = std::max(worst, std::abs(posterior_pair(lat, i, r, s) -
                                           expected.pair(i, r, s)));
    const auto cp = changepoint_posterior(lat);
    worst = std::max(
        worst, testutil::max_abs_diff(cp.probs, expected.changepoints.probs));
  }
  const double elapsed = now_s() - t0;
  report(5, worst < 1e-9 && elapsed < 60.0,
         "200 random instances vs enumeration (" + std::to_string(checked) +
             " with feasible evidence): max deviation " + fmt(worst) +
             " in " + fmt(elapsed) + " s (want < 1e-9, < 60 s)");
}

// ---------------------------------------------------------------------- 6
void criterion_eta_invariance() {
  std::mt19937_64 g(515151);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto family = (rep & 1) ? EmissionFamily::Poisson
                                  : EmissionFamily::NormalHomoscedastic;
    const auto inst = testutil::random_segment(g, 14, 4, family);
    const std::size_t k = inst.chain.state_count;
    Matrix base;
    ChangePointPosterior base_cp;
    bool first = true;
    for (const double eta : {0.1, 0.5, 0.9}) {
      const Lattice lat = make_lattice(ChainSpec::segment(k, eta),
                                       inst.emissions, inst.data, inst.ev);
      const Matrix p = posterior_states(lat);
      const auto cp = changepoint_posterior(lat);
      if (first) {
        base = p;
        base_cp = cp;
        first = false;
      } else {
        worst = std::max(worst, testutil::max_abs_diff(p, base));
        worst = std::max(worst,
                         testutil::max_abs_diff(cp.probs, base_cp.probs));
      }
    }
  }
  report(6, worst < 1e-9,
         "segment posteriors across eta in {0.1, 0.5, 0.9} on 20 instances: "
         "max deviation " + fmt(worst) + " (want < 1e-9)");
}

// ---------------------------------------------------------------------- 7
void criterion_scale() {
  const std::size_t n = 10000, k = 5;
  std::mt19937_64 g(616161);
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i)
    values[i] = std::floor(testutil::uniform(g, 0.0, 9.0));
  const ObservationSeries data(values);
  const auto emissions = EmissionModel::poisson({1, 2, 3, 4, 5});
  const auto chain = ChainSpec::segment(k);
  const auto ev = make_segment_evidence(n, k);
  const Lattice lat = make_lattice(chain, emissions, data, ev);
  bool in_range = std::isfinite(lat.log_evidence);
  const Matrix p = posterior_states(lat);
  for (std::size_t i = 0; i < n && in_range; ++i)
    for (std::size_t s = 0; s < k; ++s)
      if (!(p(i, s) >= 0.0 && p(i, s) <= 1.0)) in_range = false;
  // the raw-probability recursion must visibly fail on the same input
  const auto linear = reference::linear_lattice(chain, emissions, data, ev);
  const bool underflowed = linear.evidence == 0.0;
  const bool tiny = lat.log_evidence < std::log(2.23e-308);
  report(7, in_range && underflowed && tiny,
         "n=10000, K=5: log evidence " + fmt(lat.log_evidence) +
             " finite with all posteriors in [0,1]; linear-scale evidence " +
             fmt(linear.evidence) + " (underflow expected: true evidence is "
             "far below 2.23e-308)");
}

// ---------------------------------------------------------------------- 8
void criterion_em() {
  bool ok = true;
  std::string note;
  const auto run_one = [&](const ObservationSeries& data, FitConfig cfg,
                           const EmissionModel& e0, const ChainSpec& c0) {
    const auto res = em_fit(data, cfg, e0, c0);
    if (!res.converged) {
      ok = false;
      note += " non-convergent run;";
    }
    for (std::size_t j = 1; j < res.log_evidence_trace.size(); ++j)
      if (res.log_evidence_trace[j] < res.log_evidence_trace[j - 1] - 1e-9) {
        ok = false;
        note += " decreasing trace;";
        break;
      }
  };

  // data simulated from randomized models of both kinds and families
  std::mt19937_64 g(717171);
  for (int rep = 0; rep < 50; ++rep) {
    const auto family = (rep & 1) ? EmissionFamily::Poisson
                                  : EmissionFamily::NormalHomoscedastic;
    const bool segment_kind = (rep & 2) != 0;
    const std::size_t m = 1 + rep % 3;
    const std::size_t n = 30 + testutil::uniform_index(g, 50);
    std::vector<double> params(m);
    for (std::size_t s = 0; s < m; ++s)
      params[s] = family == EmissionFamily::Poisson
                      ? 0.5 + 2.5 * static_cast<double>(s) +
                            testutil::uniform(g, 0.0, 1.0)
                      : 2.2 * static_cast<double>(s) +
                            testutil::uniform(g, 0.0, 0.8);
    const EmissionModel emissions =
        family == EmissionFamily::Poisson
            ? EmissionModel::poisson(params)
            : EmissionModel::normal(params, testutil::uniform(g, 0.4, 1.0));
    ChainSpec chain;
    if (segment_kind) {
      chain = ChainSpec::segment(m);
    } else {
      std::vector<double> eta(m);
      for (double& e : eta) e = testutil::uniform(g, 0.05, 0.3);
      chain = ChainSpec::level(m, eta);
    }
    const ObservationSeries data =
        testutil::sample_series(g, chain, emissions, n);
    FitConfig cfg;
    cfg.family = family;
    cfg.kind = chain.kind;
    cfg.state_count = m;
    run_one(data, cfg, emissions, chain);
  }

  FitConfig coal_cfg;
  coal_cfg.family = EmissionFamily::Poisson;
  coal_cfg.kind = ChainKind::Level;
  coal_cfg.state_count = 3;
  const auto coal_init = mle_from_segmentation(
      datasets::coal(), {35, 96}, EmissionFamily::Poisson, ChainKind::Level);
  run_one(datasets::coal(), coal_cfg, coal_init.emissions, coal_init.chain);

  FitConfig bt_cfg;
  bt_cfg.family = EmissionFamily::NormalHomoscedastic;
  bt_cfg.kind = ChainKind::Segment;
  bt_cfg.state_count = 4;
  const auto bt_init =
      mle_from_segmentation(datasets::bt474(), {67, 79, 95},
                            EmissionFamily::NormalHomoscedastic,
                            ChainKind::Segment);
  run_one(datasets::bt474(), bt_cfg, bt_init.emissions, bt_init.chain);

  report(8, ok,
         "EM trace non-decreasing (1e-9 slack) and convergent within 500 "
         "iterations on 50 random instances and both datasets" +
             (note.empty() ? "" : ":" + note));
}

// ---------------------------------------------------------------------- 9
void criterion_sampling() {
  const auto chain = ChainSpec::segment(3);
  const auto emissions = EmissionModel::poisson({1, 6, 2});
  const ObservationSeries data({0, 2, 5, 7, 3, 1});
  const Lattice lat =
      make_lattice(chain, emissions, data, make_segment_evidence(6, 3));
  const Matrix exact = posterior_states(lat);
  const std::size_t count = 100000;
  const auto paths = sample_paths(lat, SampleDirection::Forward, count, 8);
  Matrix freq(6, 3, 0.0);
  bool staircase = true;
  for (const auto& p : paths) {
    if (p.front() != 0 || p.back() != 2) staircase = false;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (i > 0 && (p[i] < p[i - 1] || p[i] - p[i - 1] > 1)) staircase = false;
      freq(i, p[i]) += 1.0;
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t s = 0; s < 3; ++s)
      worst = std::max(
          worst, std::abs(freq(i, s) / static_cast<double>(count) - exact(i, s)));
  report(9, staircase && worst < 0.01,
         "100000 sampled paths: empirical marginals within " + fmt(worst) +
             " of exact (want < 0.01); every path a monotone staircase: " +
             (staircase ? "yes" : "NO"));
}

// --------------------------------------------------------------------- 10
void criterion_separator() {
  double worst = 0.0;
  const auto check = [&](const ChainSpec& chain, const EmissionModel& emissions,
                         const ObservationSeries& data) {
    const Lattice lat = make_lattice(chain, emissions, data,
                                     make_evidence(chain, data.size()));
    worst = std::max(worst, max_separator_deviation(lat));
  };
  {
    FitConfig cfg;
    cfg.family = EmissionFamily::Poisson;
    cfg.kind = ChainKind::Level;
    cfg.state_count = 3;
    const auto res = fit(datasets::coal(), cfg);
    check(res.chain, res.emissions, datasets::coal());
  }
  {
    FitConfig cfg;
    cfg.family = EmissionFamily::NormalHomoscedastic;
    cfg.kind = ChainKind::Segment;
    cfg.state_count = 4;
    const auto res = fit(datasets::bt474(), cfg);
    check(res.chain, res.emissions, datasets::bt474());
  }
  {
    const auto est = mle_from_segmentation(datasets::bt474(), {67, 79, 95},
                                           EmissionFamily::NormalHomoscedastic,
                                           ChainKind::Level);
    check(est.chain, est.emissions, datasets::bt474());
  }
  report(10, worst < 1e-9,
         "forward-backward product constant across positions for every "
         "fitted run: max deviation " + fmt(worst) + " (want < 1e-9)");
}

}  // namespace

int main() {
  std::printf("acceptance suite\n----------------\n");
  criterion_initialization();
  criterion_mle();
  criterion_cp3_peak();
  criterion_k3_k4_overlap();
  criterion_oracle_suite();
  criterion_eta_invariance();
  criterion_scale();
  criterion_em();
  criterion_sampling();
  criterion_separator();
  std::printf("----------------\n%d of 10 criteria failed\n", g_failures);
  return g_failures;
}
