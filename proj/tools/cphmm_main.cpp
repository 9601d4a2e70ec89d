#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cphmm/datasets.hpp"
#include "cphmm/errors.hpp"
#include "cphmm/estimate.hpp"
#include "cphmm/inference.hpp"
#include "cphmm/io.hpp"
#include "cphmm/oracle.hpp"

namespace {

using json = nlohmann::json;
using namespace cphmm;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInfeasible = 4;

bool verbose() {
  const char* env = std::getenv("CPHMM_LOG");
  return env != nullptr && *env != '\0';
}

void log_line(const std::string& msg) {
  if (verbose()) std::cerr << "cphmm: " << msg << "\n";
}

struct Options {
  std::string data;
  std::string model = "level";
  std::string family = "poisson";
  std::size_t states = 1;
  std::string init = "greedy";
  std::size_t init_segments = 0;
  double merge_threshold = 0.2;
  std::size_t max_iters = 500;
  double tol = 1e-8;
  std::vector<double> fix_params;
  std::optional<double> sigma;
  double eta = 0.5;
  std::vector<double> exit_probs;
  std::uint64_t seed = 1;
  std::size_t count = 1;
  std::string direction = "forward";
  std::string format = "csv";
  std::string output;
};

void add_common_options(CLI::App* cmd, Options& opt, bool with_em) {
  cmd->add_option("--data", opt.data,
                  "input file (single-column CSV, NA = missing) or builtin "
                  "dataset name: coal, bt474")
      ->required();
  cmd->add_option("--model", opt.model, "model kind: level or segment")
      ->check(CLI::IsMember({"level", "segment"}));
  cmd->add_option("--family", opt.family, "emission family: poisson or normal")
      ->check(CLI::IsMember({"poisson", "normal"}));
  cmd->add_option("--states", opt.states, "number of levels or segments")
      ->required()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--output,-o", opt.output, "output path (default: stdout)");
  if (with_em) {
    cmd->add_option("--init", opt.init, "initialization strategy")
        ->check(CLI::IsMember({"greedy"}));
    cmd->add_option("--max-iters", opt.max_iters, "EM iteration cap")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--tol", opt.tol, "EM stop tolerance on the log evidence")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--init-segments", opt.init_segments,
                    "segments used by the greedy initializer (default: "
                    "--states; a level model may start from more)");
    cmd->add_option("--merge-threshold", opt.merge_threshold,
                    "mean gap under which initial segments share a level");
  }
}

void add_param_options(CLI::App* cmd, Options& opt) {
  cmd->add_option("--fix-params", opt.fix_params,
                  "comma-separated per-state rates/means; skips EM")
      ->delimiter(',');
  cmd->add_option("--sigma", opt.sigma,
                  "shared sigma for the normal family (default with "
                  "--fix-params: pooled estimate from the greedy split)");
  cmd->add_option("--eta", opt.eta, "segment transition parameter");
  cmd->add_option("--exit-probs", opt.exit_probs,
                  "per-level exit probabilities (required by level "
                  "--fix-params)")
      ->delimiter(',');
  cmd->add_option("--merge-threshold", opt.merge_threshold,
                  "mean gap under which initial segments share a level");
  cmd->add_option("--init-segments", opt.init_segments,
                  "segments used by the greedy initializer");
  cmd->add_option("--max-iters", opt.max_iters, "EM iteration cap")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tol", opt.tol, "EM stop tolerance")
      ->check(CLI::PositiveNumber);
}

ObservationSeries ingest(const Options& opt) {
  ObservationSeries series;
  try {
    series = datasets::is_builtin(opt.data) ? datasets::builtin(opt.data)
                                            : io::read_series_file(opt.data);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(e.what(), 0);  // file-level problems are data errors
  }
  if (opt.family == "poisson") {
    for (std::size_t i = 0; i < series.size(); ++i) {
      if (series.is_missing(i)) continue;
      const double v = series.values[i];
      if (v < 0.0 || std::floor(v) != v)
        throw InvalidObservationError(
            "the poisson family needs non-negative integer counts; position " +
            std::to_string(i + 1) + " holds " + std::to_string(v));
    }
  }
  return series;
}

EmissionFamily family_of(const Options& opt) {
  return opt.family == "poisson" ? EmissionFamily::Poisson
                                 : EmissionFamily::NormalHomoscedastic;
}

ChainKind kind_of(const Options& opt) {
  return opt.model == "level" ? ChainKind::Level : ChainKind::Segment;
}

FitConfig fit_config(const Options& opt) {
  FitConfig cfg;
  cfg.max_iterations = opt.max_iters;
  cfg.tolerance = opt.tol;
  cfg.family = family_of(opt);
  cfg.kind = kind_of(opt);
  cfg.state_count = opt.states;
  return cfg;
}

// Model parameters for posterior/sample/viterbi: either taken from
// --fix-params or fitted with EM from the greedy initialization.
std::pair<EmissionModel, ChainSpec> resolve_params(
    const Options& opt, const ObservationSeries& series) {
  if (opt.fix_params.empty()) {
    log_line("no --fix-params given; fitting with EM first");
    FitResult res = fit(series, fit_config(opt), opt.init_segments,
                        opt.merge_threshold);
    for (const std::string& w : res.warnings) log_line(w);
    return {res.emissions, res.chain};
  }
  if (opt.fix_params.size() != opt.states)
    throw Error("--fix-params needs exactly one value per state");
  EmissionModel emissions;
  if (family_of(opt) == EmissionFamily::Poisson) {
    emissions = EmissionModel::poisson(opt.fix_params);
  } else {
    double sigma;
    if (opt.sigma) {
      sigma = *opt.sigma;
    } else {
      // fall back to the pooled within-segment estimate at the greedy split
      const std::size_t k =
          opt.init_segments == 0 ? opt.states : opt.init_segments;
      const auto cps = greedy_ls_changepoints(series, k);
      const auto est =
          mle_from_segmentation(series, cps, family_of(opt),
                                ChainKind::Segment, opt.merge_threshold);
      sigma = est.emissions.sigma;
      log_line("sigma not given; using pooled estimate " +
               std::to_string(sigma));
    }
    emissions = EmissionModel::normal(opt.fix_params, sigma);
  }
  ChainSpec chain;
  if (kind_of(opt) == ChainKind::Segment) {
    chain = ChainSpec::segment(opt.states, opt.eta);
  } else {
    if (opt.exit_probs.empty())
      throw Error("level --fix-params needs --exit-probs");
    if (opt.exit_probs.size() != opt.states)
      throw Error("--exit-probs needs exactly one value per state");
    chain = ChainSpec::level(opt.states, opt.exit_probs);
  }
  return {std::move(emissions), std::move(chain)};
}

// Output stream selection; file when --output given.
class OutputTarget {
 public:
  explicit OutputTarget(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw Error("cannot open output file: " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

json chain_to_json(const ChainSpec& chain) {
  json j;
  j["kind"] = chain.kind == ChainKind::Level ? "level" : "segment";
  j["states"] = chain.state_count;
  if (chain.kind == ChainKind::Level) {
    j["exit_probs"] = chain.exit_probs;
    j["initial"] = chain.initial;
  } else {
    j["eta"] = chain.eta;
  }
  return j;
}

json emissions_to_json(const EmissionModel& emissions) {
  json j;
  if (emissions.family == EmissionFamily::Poisson) {
    j["family"] = "poisson";
    j["rates"] = emissions.params;
  } else {
    j["family"] = "normal";
    j["means"] = emissions.params;
    j["sigma"] = emissions.sigma;
  }
  return j;
}

int run_fit(const Options& opt) {
  const ObservationSeries series = ingest(opt);
  FitResult res =
      fit(series, fit_config(opt), opt.init_segments, opt.merge_threshold);
  for (const std::string& w : res.warnings) log_line(w);
  json j;
  j["model"] = chain_to_json(res.chain);
  j["emissions"] = emissions_to_json(res.emissions);
  json cps = json::array();
  for (std::size_t c : res.initial_changepoints) cps.push_back(c + 1);
  j["initial_changepoints"] = cps;
  j["log_evidence_trace"] = res.log_evidence_trace;
  j["log_evidence"] = res.log_evidence_trace.back();
  j["iterations"] = res.log_evidence_trace.size();
  j["converged"] = res.converged;
  OutputTarget out(opt.output);
  out.stream() << j.dump(2) << "\n";
  return 0;
}

int run_posterior(const Options& opt) {
  const ObservationSeries series = ingest(opt);
  auto [emissions, chain] = resolve_params(opt, series);
  const Evidence ev = make_evidence(chain, series.size());
  const Lattice lat = make_lattice(chain, emissions, series, ev);
  const Matrix post = posterior_states(lat);
  const ChangePointPosterior cp = changepoint_posterior(lat);
  OutputTarget out(opt.output);
  if (opt.format == "json") {
    json j;
    j["log_evidence"] = lat.log_evidence;
    json rows = json::array();
    for (std::size_t i = 0; i < post.rows(); ++i) {
      json row = json::array();
      for (std::size_t s = 0; s < post.cols(); ++s) row.push_back(post(i, s));
      rows.push_back(row);
    }
    j["state_posterior"] = rows;
    json cps = json::array();
    for (std::size_t r = 0; r < cp.probs.rows(); ++r) {
      json row = json::array();
      for (std::size_t i = 0; i < cp.probs.cols(); ++i)
        row.push_back(cp.probs(r, i));
      cps.push_back(row);
    }
    j["changepoint_posterior"] = cps;
    out.stream() << j.dump(2) << "\n";
  } else {
    io::write_posterior_csv(out.stream(), post, cp);
  }
  return 0;
}

int run_viterbi(const Options& opt) {
  const ObservationSeries series = ingest(opt);
  auto [emissions, chain] = resolve_params(opt, series);
  const Evidence ev = make_evidence(chain, series.size());
  const auto [path, log_joint] = viterbi(chain, emissions, series, ev);
  OutputTarget out(opt.output);
  if (opt.format == "json") {
    json j;
    json p = json::array();
    for (std::size_t s : path) p.push_back(s + 1);
    j["path"] = p;
    j["log_joint"] = log_joint;
    out.stream() << j.dump(2) << "\n";
  } else {
    out.stream() << "# log_joint=" << io::format_probability(log_joint)
                 << "\n";
    io::write_viterbi_csv(out.stream(), path);
  }
  return 0;
}

int run_sample(const Options& opt) {
  const ObservationSeries series = ingest(opt);
  auto [emissions, chain] = resolve_params(opt, series);
  const Evidence ev = make_evidence(chain, series.size());
  const Lattice lat = make_lattice(chain, emissions, series, ev);
  const auto dir = opt.direction == "backward" ? SampleDirection::Backward
                                               : SampleDirection::Forward;
  const auto paths = sample_paths(lat, dir, opt.count, opt.seed);
  OutputTarget out(opt.output);
  if (opt.format == "json") {
    json j = json::array();
    for (const StatePath& p : paths) {
      json row = json::array();
      for (std::size_t s : p) row.push_back(s + 1);
      j.push_back(row);
    }
    out.stream() << j.dump() << "\n";
  } else {
    io::write_paths_csv(out.stream(), paths);
  }
  return 0;
}

struct VerifyOptions {
  std::size_t instances = 50;
  std::uint64_t seed = 20260808;
  double tolerance = 1e-9;
};

// Hidden cross-check of the recursions against exhaustive enumeration.
int run_verify(const VerifyOptions& vopt) {
  std::mt19937_64 g(vopt.seed);
  auto uniform = [&](double a, double b) {
    return a + (b - a) * static_cast<double>(g() >> 11) * 0x1.0p-53;
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < vopt.instances; ++k) {
    const bool segment = (g() & 1) != 0;
    const bool poisson = (g() & 2) != 0;
    const std::size_t m = 1 + g() % (segment ? 4 : 3);
    const std::size_t n = segment ? m + g() % (15 - m) : 1 + g() % 10;
    std::vector<double> params(m);
    for (double& p : params) p = poisson ? uniform(0.2, 8.0) : uniform(-3, 3);
    EmissionModel emissions =
        poisson ? EmissionModel::poisson(params)
                : EmissionModel::normal(params, uniform(0.3, 1.5));
    std::vector<double> values(n);
    for (double& v : values)
      v = poisson ? std::floor(uniform(0, 9)) : uniform(-4, 4);
    ObservationSeries data(values);
    oracle::Result expected;
    ChainSpec chain;
    if (segment) {
      chain = ChainSpec::segment(m);
      expected = oracle::segment(data, m, emissions);
    } else {
      std::vector<double> eta(m);
      for (double& e : eta) e = uniform(0.05, 0.9);
      chain = ChainSpec::level(m, eta);
      expected = oracle::level(data, chain, emissions,
                               make_level_evidence(n, m));
    }
    const Lattice lat =
        make_lattice(chain, emissions, data, make_evidence(chain, n));
    worst = std::max(worst, std::abs(lat.log_evidence - expected.log_evidence));
    const Matrix post = posterior_states(lat);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t s = 0; s < m; ++s)
        worst = std::max(worst, std::abs(post(i, s) - expected.posterior(i, s)));
    const ChangePointPosterior cp = changepoint_posterior(lat);
    for (std::size_t r = 0; r < cp.probs.rows(); ++r)
      for (std::size_t i = 0; i < cp.probs.cols(); ++i)
        worst = std::max(
            worst, std::abs(cp.probs(r, i) - expected.changepoints.probs(r, i)));
  }
  std::cout << "verified " << vopt.instances
            << " random instances; max deviation " << worst << "\n";
  return worst <= vopt.tolerance ? 0 : 1;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Exact HMM change-point inference for level- and segment-based "
               "models"};
  app.require_subcommand(1);

  Options opt;
  CLI::App* fit_cmd =
      app.add_subcommand("fit", "estimate parameters with EM from a greedy "
                                "least-squares initialization");
  add_common_options(fit_cmd, opt, true);

  CLI::App* post_cmd = app.add_subcommand(
      "posterior", "state marginals and change-point posteriors");
  add_common_options(post_cmd, opt, false);
  add_param_options(post_cmd, opt);
  post_cmd->add_option("--format", opt.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  CLI::App* vit_cmd =
      app.add_subcommand("viterbi", "most probable state path");
  add_common_options(vit_cmd, opt, false);
  add_param_options(vit_cmd, opt);
  vit_cmd->add_option("--format", opt.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  CLI::App* sample_cmd =
      app.add_subcommand("sample", "draw state paths from the posterior");
  add_common_options(sample_cmd, opt, false);
  add_param_options(sample_cmd, opt);
  sample_cmd->add_option("--count", opt.count, "number of paths");
  sample_cmd->add_option("--seed", opt.seed, "RNG seed");
  sample_cmd->add_option("--direction", opt.direction, "forward or backward")
      ->check(CLI::IsMember({"forward", "backward"}));
  sample_cmd->add_option("--format", opt.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  VerifyOptions vopt;
  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "cross-check the recursions against brute-force enumeration");
  verify_cmd->group("");  // hidden
  verify_cmd->add_option("--instances", vopt.instances, "random instances");
  verify_cmd->add_option("--seed", vopt.seed, "RNG seed");
  verify_cmd->add_option("--tolerance", vopt.tolerance, "max deviation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*fit_cmd) return run_fit(opt);
    if (*post_cmd) return run_posterior(opt);
    if (*vit_cmd) return run_viterbi(opt);
    if (*sample_cmd) return run_sample(opt);
    if (*verify_cmd) return run_verify(vopt);
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvalidObservationError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const InfeasibleEvidenceError& e) {
    std::cerr << "infeasible model: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const NoPathError& e) {
    std::cerr << "infeasible model: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const UndefinedPosteriorError& e) {
    std::cerr << "infeasible model: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const DegenerateSegmentError& e) {
    std::cerr << "infeasible model: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) { return dispatch(argc, argv); }
