#include "vvc/runner.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

#include "vvc/failures.hpp"
#include "vvc/metrics.hpp"

namespace vvc::cli {

namespace fs = std::filesystem;
using consensus::HourMetrics;

std::string run_directory(const ExperimentConfig& cfg, std::uint64_t seed) {
  return (fs::path(cfg.output_dir) /
          (algorithm_name(cfg.algorithm) + "_seed" + std::to_string(seed)))
      .string();
}

namespace {

void write_series_csv(const std::string& path, const std::string& header,
                      const std::vector<double>& x, const std::vector<double>& y) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << header << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < x.size(); ++i) out << x[i] << ',' << y[i] << '\n';
}

// Moving-average reward/violation curves against training samples and
// against transmitted scalars (the two x-axes used for benchmarking).
void write_plot_files(const std::string& dir, const std::vector<HourMetrics>& rows,
                      long history_hours) {
  constexpr int kWindow = 168;
  std::vector<double> reward(rows.size()), violations(rows.size()), samples(rows.size()),
      transmitted(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    reward[i] = rows[i].mean_reward;
    violations[i] = rows[i].mean_violations;
    samples[i] = static_cast<double>(history_hours + static_cast<long>(i) + 1);
    transmitted[i] = static_cast<double>(rows[i].transmitted);
  }
  const auto reward_ma = metrics::moving_average(reward, kWindow);
  const auto violations_ma = metrics::moving_average(violations, kWindow);
  write_series_csv(dir + "/plot_reward_vs_samples.csv", "samples,reward_ma", samples,
                   reward_ma);
  write_series_csv(dir + "/plot_violations_vs_samples.csv", "samples,violations_ma", samples,
                   violations_ma);
  write_series_csv(dir + "/plot_reward_vs_transmitted.csv", "transmitted_scalars,reward_ma",
                   transmitted, reward_ma);
  write_series_csv(dir + "/plot_violations_vs_transmitted.csv",
                   "transmitted_scalars,violations_ma", transmitted, violations_ma);
}

void run_single_seed(const LoadedExperiment& exp, std::uint64_t seed, std::ostream& log) {
  const auto& cfg = exp.cfg;
  const std::string dir = run_directory(cfg, seed);
  fs::create_directories(dir);

  env::LoadProfile profile =
      cfg.load_source == "synth"
          ? env::synth_load_profile(exp.feeder, cfg.load_weeks, cfg.load_seed)
          : env::load_profile_from_csv(cfg.load_csv_path, exp.feeder);
  env::Environment env(exp.feeder, std::move(profile), cfg.rewards, cfg.cap_rule);

  consensus::ReplayBuffer buffer(cfg.replay_capacity);
  const auto hist = consensus::init_buffer_from_history(env, buffer, cfg.history_hours, seed);

  const auto codec = consensus::ActionCodec::from_feeder(exp.feeder);
  const auto payload = consensus::PayloadDims::from_feeder(exp.feeder);
  const int K = exp.feeder.device_count();

  std::unique_ptr<consensus::Trainer> trainer;
  consensus::LoopOptions opt;
  switch (cfg.algorithm) {
    case Algorithm::Cmarl:
      trainer = std::make_unique<consensus::CmarlTrainer>(
          seed, env.feature_dim(), codec, cfg.hyper,
          consensus::CommGraph(K, exp.graph_edges), payload);
      opt.updates_between_steps = K * cfg.hyper.update_freq;
      opt.per_agent_updates = cfg.hyper.update_freq;
      opt.trigger = cfg.trigger;
      break;
    case Algorithm::Sac:
      trainer = std::make_unique<benchmarks::SacTrainer>(seed, env.feature_dim(), codec,
                                                         cfg.hyper);
      opt.updates_between_steps = cfg.hyper.update_freq;
      break;
    case Algorithm::Admm:
      trainer = std::make_unique<benchmarks::AdmmTrainer>(
          seed, env.feature_dim(), codec, cfg.hyper,
          consensus::CommGraph(K, exp.graph_edges));
      opt.updates_between_steps = cfg.hyper.update_freq;
      break;
  }

  // Failure schedule: explicit file or sampled processes over the
  // training window; the applied schedule is always echoed to disk.
  std::vector<failures::FailureEvent> schedule;
  std::unique_ptr<failures::FailureRuntime> failure_runtime;
  consensus::FailureHooks hooks;
  if (cfg.failures_configured()) {
    if (!cfg.failure_schedule_path.empty()) {
      schedule = failures::load_schedule_csv(cfg.failure_schedule_path);
    } else {
      const auto fseed = Rng::derive(cfg.failure_seed, seed);
      if (cfg.agent_failure_rate > 0.0) {
        auto agent_events = failures::sample_agent_failures(
            cfg.agent_failure_rate, cfg.failure_duration_p, cfg.horizon_hours, K, fseed);
        schedule.insert(schedule.end(), agent_events.begin(), agent_events.end());
      }
      if (cfg.link_failure_rate > 0.0 && !exp.graph_edges.empty()) {
        auto link_events = failures::sample_link_failures(
            cfg.link_failure_rate, cfg.failure_duration_p, cfg.horizon_hours,
            exp.graph_edges, fseed);
        schedule.insert(schedule.end(), link_events.begin(), link_events.end());
      }
    }
    for (auto& ev : schedule) ev.start_hour += cfg.history_hours;
    failures::save_schedule_csv(dir + "/failures.csv", schedule);
    failure_runtime =
        std::make_unique<failures::FailureRuntime>(schedule, *trainer, env, hist);
    hooks = failure_runtime->hooks();
  }

  {
    ExperimentConfig echo = cfg;
    echo.seeds = {seed};
    std::ofstream manifest(dir + "/manifest.txt");
    if (!manifest) throw std::runtime_error("cannot write manifest in " + dir);
    manifest << "# vvc " << kVersion << "\n# seed " << seed << "\n\n"
             << serialize_config(echo);
  }

  metrics::MetricsWriter writer(dir + "/metrics.csv");
  const auto rows = consensus::control_loop(
      env, *trainer, buffer, consensus::ReplayBatchSource(buffer, env, codec), opt,
      cfg.horizon_hours, failure_runtime ? &hooks : nullptr,
      [&](const HourMetrics& m) { writer.append(m); });

  trainer->save_checkpoints(dir + "/checkpoint");
  write_plot_files(dir, rows, cfg.history_hours);
  log << "[seed " << seed << "] completed " << rows.size() << " hours -> " << dir << "\n";
}

}  // namespace

int run_experiment(const LoadedExperiment& exp, std::ostream& log) {
  int failures_seen = 0;
  for (const auto seed : exp.cfg.seeds) {
    try {
      run_single_seed(exp, seed, log);
    } catch (const std::exception& err) {
      ++failures_seen;
      log << "[seed " << seed << "] FAILED: " << err.what() << "\n";
    }
  }
  return failures_seen == 0 ? 0 : 2;
}

namespace {

std::string manifest_algorithm(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.txt");
  if (!in) throw std::runtime_error("missing manifest in " + dir);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (line.rfind("algorithm", 0) == 0 && eq != std::string::npos) {
      auto value = line.substr(eq + 1);
      const auto a = value.find_first_not_of(" \t");
      const auto b = value.find_last_not_of(" \t\r");
      return value.substr(a, b - a + 1);
    }
  }
  throw std::runtime_error("manifest in " + dir + " lacks an algorithm line");
}

}  // namespace

void summarize_runs(const std::vector<std::string>& run_dirs, const std::string& out_dir,
                    std::ostream& log) {
  if (run_dirs.empty()) throw std::invalid_argument("summarize: no run directories given");
  fs::create_directories(out_dir);

  std::map<std::string, std::vector<std::vector<HourMetrics>>> by_method;
  for (const auto& dir : run_dirs) {
    auto rows = metrics::read_metrics_csv((fs::path(dir) / "metrics.csv").string());
    by_method[manifest_algorithm(dir)].push_back(std::move(rows));
  }

  std::vector<benchmarks::MethodComm> comm_rows;
  for (const auto& [method, runs] : by_method) {
    std::vector<std::vector<double>> reward, violations, transmitted;
    for (const auto& run : runs) {
      std::vector<double> r(run.size()), v(run.size()), c(run.size());
      for (std::size_t i = 0; i < run.size(); ++i) {
        r[i] = run[i].mean_reward;
        v[i] = run[i].mean_violations;
        c[i] = static_cast<double>(run[i].transmitted);
      }
      reward.push_back(std::move(r));
      violations.push_back(std::move(v));
      transmitted.push_back(std::move(c));
    }
    const auto reward_band = metrics::band_across_runs(reward);
    const auto violation_band = metrics::band_across_runs(violations);
    const auto transmitted_band = metrics::band_across_runs(transmitted);

    const auto path = (fs::path(out_dir) / ("summary_" + method + ".csv")).string();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "hour,reward_median,reward_lo,reward_hi,violations_median,violations_lo,"
           "violations_hi,transmitted_median\n";
    out.precision(17);
    for (std::size_t i = 0; i < reward_band.median.size(); ++i)
      out << runs[0][i].hour << ',' << reward_band.median[i] << ',' << reward_band.lo[i]
          << ',' << reward_band.hi[i] << ',' << violation_band.median[i] << ','
          << violation_band.lo[i] << ',' << violation_band.hi[i] << ','
          << transmitted_band.median[i] << '\n';
    log << "summary_" << method << ".csv: " << runs.size() << " run(s), "
        << reward_band.median.size() << " hours\n";

    long long total = 0;
    for (const auto& run : runs) total += run.empty() ? 0 : run.back().transmitted;
    benchmarks::MethodComm comm;
    comm.method = method;
    comm.hours = runs[0].empty() ? 0 : static_cast<long>(runs[0].size());
    comm.transmitted = runs.empty() ? 0 : total / static_cast<long long>(runs.size());
    comm.scalars_per_hour =
        comm.hours > 0 ? static_cast<double>(comm.transmitted) / comm.hours : 0.0;
    comm_rows.push_back(comm);
  }

  benchmarks::write_communication_report_csv(
      (fs::path(out_dir) / "communication_report.csv").string(), comm_rows);
  std::ofstream report((fs::path(out_dir) / "communication_report.txt").string());
  report << benchmarks::communication_report_text(comm_rows);
}

}  // namespace vvc::cli
