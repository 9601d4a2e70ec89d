// Times the OpenMP kernels against the serial reference implementations on a
// large segment-model instance and checks they agree bit for bit.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cphmm/inference.hpp"
#include "cphmm/reference.hpp"

using namespace cphmm;

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

template <typename F>
double time_best_of(int reps, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_ms();
    fn();
    best = std::min(best, now_ms() - t0);
  }
  return best;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double d = std::abs(a(i, j) - b(i, j));
      if (!(is_log_zero(a(i, j)) && is_log_zero(b(i, j))))
        worst = std::max(worst, d);
    }
  return worst;
}

void report(const char* name, double serial_ms, double parallel_ms,
            double diff) {
  std::printf("%-24s %10.2f ms %10.2f ms   x%-6.2f max|d|=%g\n", name,
              serial_ms, parallel_ms, serial_ms / parallel_ms, diff);
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 200000;
  const std::size_t paths = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 2000;
  const std::size_t k = 5;
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; both columns run serially\n");
#endif
  std::printf("instance: n=%zu, K=%zu, normal emissions, %zu sampled paths\n\n",
              n, k, paths);

  std::mt19937_64 g(7);
  auto unif = [&](double a, double b) {
    return a + (b - a) * static_cast<double>(g() >> 11) * 0x1.0p-53;
  };
  std::vector<double> means(k);
  for (std::size_t s = 0; s < k; ++s) means[s] = 2.0 * static_cast<double>(s);
  const EmissionModel emissions = EmissionModel::normal(means, 1.0);
  std::vector<double> values(n);
  const std::size_t seg_len = n / k;
  for (std::size_t i = 0; i < n; ++i)
    values[i] = means[std::min(i / seg_len, k - 1)] + unif(-2.0, 2.0);
  const ObservationSeries data(values);
  const ChainSpec chain = ChainSpec::segment(k);
  const Evidence ev = make_segment_evidence(n, k);

  const double t_lattice = time_best_of(3, [&] {
    volatile double sink = make_lattice(chain, emissions, data, ev).log_evidence;
    (void)sink;
  });
  std::printf("forward-backward (serial recursion): %.2f ms\n\n", t_lattice);

  std::printf("%-24s %13s %13s\n", "kernel", "serial", "openmp");

  Matrix e_ref, e_par;
  const double t_es = time_best_of(3, [&] {
    e_ref = reference::masked_emission_table(chain, emissions, data, ev);
  });
  const double t_ep = time_best_of(3, [&] {
    e_par = masked_emission_table(chain, emissions, data, ev);
  });
  report("emission table", t_es, t_ep, max_abs_diff(e_ref, e_par));

  const Lattice lat = make_lattice(chain, emissions, data, ev);

  Matrix p_ref, p_par;
  const double t_ps = time_best_of(3, [&] { p_ref = reference::posterior_states(lat); });
  const double t_pp = time_best_of(3, [&] { p_par = posterior_states(lat); });
  report("state posterior", t_ps, t_pp, max_abs_diff(p_ref, p_par));

  ChangePointPosterior c_ref, c_par;
  const double t_cs =
      time_best_of(3, [&] { c_ref = reference::changepoint_posterior(lat); });
  const double t_cp =
      time_best_of(3, [&] { c_par = changepoint_posterior(lat); });
  report("change-point posterior", t_cs, t_cp,
         max_abs_diff(c_ref.probs, c_par.probs));

  std::vector<StatePath> s_ref, s_par;
  const double t_ss = time_best_of(1, [&] {
    s_ref = reference::sample_paths(lat, SampleDirection::Backward, paths, 42);
  });
  const double t_sp = time_best_of(1, [&] {
    s_par = sample_paths(lat, SampleDirection::Backward, paths, 42);
  });
  std::size_t mismatches = 0;
  for (std::size_t p = 0; p < paths; ++p)
    if (s_ref[p] != s_par[p]) ++mismatches;
  std::printf("%-24s %10.2f ms %10.2f ms   x%-6.2f mismatched paths=%zu\n",
              "path sampling", t_ss, t_sp, t_ss / t_sp, mismatches);
  return 0;
}
