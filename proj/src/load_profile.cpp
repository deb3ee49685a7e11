#include "vvc/load_profile.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "vvc/rng.hpp"

namespace vvc::env {

namespace {

double gaussian_bump(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z);
}

// Hour-of-week demand shape: double daily peak, softened on weekends.
double weekly_shape(int hour_of_week, double jitter) {
  const int day = hour_of_week / 24;
  const double hod = hour_of_week % 24 + jitter;
  const bool weekend = day >= 5;
  const double morning = gaussian_bump(hod, 8.5, 2.5);
  const double evening = gaussian_bump(hod, 19.0, 3.0);
  return weekend ? 0.50 + 0.20 * morning + 0.36 * evening
                 : 0.45 + 0.30 * morning + 0.40 * evening;
}

}  // namespace

LoadProfile synth_load_profile(const feeder::FeederModel& f, int weeks, std::uint64_t seed) {
  if (weeks < 1) throw std::invalid_argument("profile needs at least one week");
  const int n = f.bus_count() - 1;
  const long horizon = 168L * weeks;
  LoadProfile out;
  out.p.resize(n, horizon);
  out.q.resize(n, horizon);

  constexpr double kNoiseSigma = 0.12;
  for (int b = 0; b < n; ++b) {
    Rng rng(Rng::derive(seed, streams::kProfile + 16 * (b + 1)));
    const double jitter = rng.uniform(-1.5, 1.5);
    const auto& bus = f.buses[b + 1];
    const double pf_ratio = bus.load_p > 0.0 ? bus.load_q / bus.load_p : 0.0;
    for (long t = 0; t < horizon; ++t) {
      const double noise =
          std::exp(kNoiseSigma * rng.normal() - 0.5 * kNoiseSigma * kNoiseSigma);
      const double p = bus.load_p * weekly_shape(static_cast<int>(t % 168), jitter) * noise;
      out.p(b, t) = p;
      out.q(b, t) = p * pf_ratio;
    }
  }

  // Peak total hour equals the feeder's nominal loading exactly.
  const double peak = out.p.colwise().sum().maxCoeff();
  if (peak > 0.0) {
    const double scale = f.nominal_load_p() / peak;
    out.p *= scale;
    out.q *= scale;
  }
  return out;
}

LoadProfile load_profile_from_csv(const std::string& path, const feeder::FeederModel& f) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile csv " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty profile");

  const int n = f.bus_count() - 1;
  struct Cell {
    double p, q;
    bool set = false;
  };
  std::vector<std::vector<Cell>> grid;  // [hour][bus]
  long max_hour = -1;

  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string tok;
    long hour;
    int bus_id;
    double p, q;
    try {
      std::getline(row, tok, ',');
      hour = std::stol(tok);
      std::getline(row, tok, ',');
      bus_id = std::stoi(tok);
      std::getline(row, tok, ',');
      p = std::stod(tok);
      if (!std::getline(row, tok, ',')) throw std::invalid_argument("q");
      q = std::stod(tok);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed row");
    }
    if (hour < 0) throw std::runtime_error(path + ": negative hour at line " + std::to_string(lineno));
    if (p < 0.0)
      throw std::runtime_error(path + ": negative kW at (hour " + std::to_string(hour) +
                               ", bus " + std::to_string(bus_id) + ")");
    const int idx = f.bus_index(bus_id);  // throws on unknown bus
    if (idx == 0) throw std::runtime_error(path + ": load given for the substation");
    if (hour >= static_cast<long>(grid.size())) grid.resize(hour + 1, std::vector<Cell>(n));
    auto& cell = grid[hour][idx - 1];
    if (cell.set)
      throw std::runtime_error(path + ": duplicate cell (hour " + std::to_string(hour) +
                               ", bus " + std::to_string(bus_id) + ")");
    cell = {p, q, true};
    max_hour = std::max(max_hour, hour);
  }
  if (max_hour < 0) throw std::runtime_error(path + ": empty profile");

  LoadProfile out;
  out.p.resize(n, max_hour + 1);
  out.q.resize(n, max_hour + 1);
  for (long t = 0; t <= max_hour; ++t) {
    for (int b = 0; b < n; ++b) {
      if (t >= static_cast<long>(grid.size()) || !grid[t][b].set)
        throw std::runtime_error(path + ": missing cell (hour " + std::to_string(t) + ", bus " +
                                 std::to_string(f.buses[b + 1].id) + ")");
      out.p(b, t) = grid[t][b].p;
      out.q(b, t) = grid[t][b].q;
    }
  }

  // Per-bus power factor must not drift across hours.
  for (int b = 0; b < n; ++b) {
    double ratio = 0.0;
    bool have = false;
    for (long t = 0; t <= max_hour; ++t) {
      if (out.p(b, t) <= 0.0) continue;
      const double r = out.q(b, t) / out.p(b, t);
      if (have && std::abs(r - ratio) > 1e-6 * (1.0 + std::abs(ratio)))
        throw std::runtime_error(path + ": power factor drift at bus " +
                                 std::to_string(f.buses[b + 1].id));
      ratio = have ? ratio : r;
      have = true;
    }
  }
  return out;
}

void write_profile_csv(const std::string& path, const LoadProfile& profile,
                       const feeder::FeederModel& f) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write profile csv " + path);
  out << "hour,bus_id,p_kw,q_kvar\n";
  out.precision(17);
  for (long t = 0; t < profile.horizon(); ++t)
    for (int b = 0; b < profile.p.rows(); ++b)
      out << t << ',' << f.buses[b + 1].id << ',' << profile.p(b, t) << ',' << profile.q(b, t)
          << '\n';
}

}  // namespace vvc::env
