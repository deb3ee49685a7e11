#include "vvc/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vvc::metrics {

struct MetricsWriter::Impl {
  std::ofstream out;
};

MetricsWriter::MetricsWriter(const std::string& path) : impl_(new Impl) {
  impl_->out.open(path);
  if (!impl_->out) {
    delete impl_;
    throw std::runtime_error("cannot write metrics csv " + path);
  }
  impl_->out << kMetricsHeader << '\n';
  impl_->out.precision(17);
}

MetricsWriter::~MetricsWriter() { delete impl_; }

void MetricsWriter::append(const HourMetrics& m) {
  impl_->out << m.hour << ',' << m.mean_reward << ',' << m.mean_violations << ','
             << m.transmitted << ',' << m.wall_seconds << '\n';
  impl_->out.flush();
}

std::vector<HourMetrics> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics csv " + path);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader)
    throw std::runtime_error(path + ": unexpected metrics schema");
  std::vector<HourMetrics> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string tok;
    HourMetrics m;
    try {
      std::getline(row, tok, ',');
      m.hour = std::stol(tok);
      std::getline(row, tok, ',');
      m.mean_reward = std::stod(tok);
      std::getline(row, tok, ',');
      m.mean_violations = std::stod(tok);
      std::getline(row, tok, ',');
      m.transmitted = std::stoll(tok);
      if (!std::getline(row, tok, ',')) throw std::invalid_argument("wall");
      m.wall_seconds = std::stod(tok);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ": malformed metrics row '" + line + "'");
    }
    out.push_back(m);
  }
  return out;
}

std::vector<double> moving_average(const std::vector<double>& xs, int window) {
  if (window < 1) throw std::invalid_argument("window must be positive");
  std::vector<double> out(xs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    acc += xs[i];
    if (i >= static_cast<std::size_t>(window)) acc -= xs[i - window];
    const auto n = std::min<std::size_t>(i + 1, window);
    out[i] = acc / static_cast<double>(n);
  }
  return out;
}

Band band_across_runs(const std::vector<std::vector<double>>& runs) {
  if (runs.empty()) throw std::invalid_argument("no runs to summarize");
  const std::size_t len = runs[0].size();
  for (const auto& r : runs)
    if (r.size() != len) throw std::runtime_error("runs have mismatched lengths");

  Band band;
  band.median.resize(len);
  band.lo.resize(len);
  band.hi.resize(len);
  std::vector<double> col(runs.size());
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t r = 0; r < runs.size(); ++r) col[r] = runs[r][t];
    std::sort(col.begin(), col.end());
    band.lo[t] = col.front();
    band.hi[t] = col.back();
    const std::size_t n = col.size();
    band.median[t] = n % 2 == 1 ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
  }
  return band;
}

}  // namespace vvc::metrics
