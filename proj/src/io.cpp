#include "cphmm/io.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cphmm/errors.hpp"

namespace cphmm::io {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

bool is_missing_token(const std::string& s) {
  return s.empty() || s == "NA" || s == "na";
}

ObservationSeries read_series(std::istream& in) {
  std::vector<std::string> fields;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    fields.push_back(trim(line));
  }
  // a final empty line is a newline artifact, not a missing record
  if (!fields.empty() && fields.back().empty()) fields.pop_back();
  std::size_t start = 0;
  if (!fields.empty() && !is_missing_token(fields[0])) {
    double probe = 0.0;
    if (!parse_double(fields[0], probe)) start = 1;  // header
  }
  std::vector<double> values;
  std::vector<bool> missing;
  bool any_missing = false;
  for (std::size_t k = start; k < fields.size(); ++k) {
    if (is_missing_token(fields[k])) {
      values.push_back(0.0);
      missing.push_back(true);
      any_missing = true;
      continue;
    }
    double v = 0.0;
    if (!parse_double(fields[k], v))
      throw ParseError("cannot parse value '" + fields[k] + "'", k + 1);
    values.push_back(v);
    missing.push_back(false);
  }
  if (values.empty()) throw ParseError("no observations found", fields.size());
  if (!any_missing) missing.clear();
  return ObservationSeries(std::move(values), std::move(missing));
}

ObservationSeries read_series_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open input file: " + path);
  return read_series(in);
}

std::string format_probability(double p) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", p);
  return buf;
}

void write_posterior_csv(std::ostream& out, const Matrix& state_posterior,
                         const ChangePointPosterior& cp) {
  const std::size_t n = state_posterior.rows();
  const std::size_t m = state_posterior.cols();
  const std::size_t n_cp = cp.probs.rows();
  out << "position";
  for (std::size_t s = 0; s < m; ++s) out << ",state_" << s + 1;
  if (cp.kind == ChainKind::Level) {
    out << ",changepoint";
  } else {
    for (std::size_t r = 0; r < n_cp; ++r) out << ",changepoint_" << r + 1;
  }
  out << "\n";
  for (std::size_t i = 0; i < n; ++i) {
    out << i + 1;
    for (std::size_t s = 0; s < m; ++s)
      out << "," << format_probability(state_posterior(i, s));
    for (std::size_t r = 0; r < n_cp; ++r) {
      out << ",";
      if (i + 1 < n) out << format_probability(cp.probs(r, i));
    }
    out << "\n";
  }
}

void write_paths_csv(std::ostream& out, const std::vector<StatePath>& paths) {
  for (std::size_t p = 0; p < paths.size(); ++p) {
    out << p + 1;
    for (std::size_t s : paths[p]) out << "," << s + 1;
    out << "\n";
  }
}

void write_viterbi_csv(std::ostream& out, const StatePath& path) {
  out << "position,state\n";
  for (std::size_t i = 0; i < path.size(); ++i)
    out << i + 1 << "," << path[i] + 1 << "\n";
}

}  // namespace cphmm::io
