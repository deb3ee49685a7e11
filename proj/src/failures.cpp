#include "vvc/failures.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vvc/rng.hpp"

namespace vvc::failures {

namespace {

std::vector<FailureEvent> sample_events(double rate, double duration_p, long horizon,
                                        Rng& rng,
                                        const std::function<FailureEvent(Rng&)>& make_target) {
  if (duration_p <= 0.0 || duration_p > 1.0)
    throw std::invalid_argument("duration probability must be in (0, 1]");
  if (rate < 0.0) throw std::invalid_argument("failure rate must be non-negative");
  std::vector<FailureEvent> out;
  if (rate == 0.0) return out;
  double t = rng.exponential(1.0 / rate);
  while (t < static_cast<double>(horizon)) {
    FailureEvent ev = make_target(rng);
    ev.start_hour = static_cast<long>(std::floor(t));
    ev.duration_hours = rng.geometric(duration_p);
    out.push_back(ev);
    t += rng.exponential(1.0 / rate);
  }
  return out;
}

}  // namespace

std::vector<FailureEvent> sample_agent_failures(double rate, double duration_p, long horizon,
                                                int agent_count, std::uint64_t seed) {
  if (agent_count < 1) throw std::invalid_argument("need at least one agent");
  Rng rng(Rng::derive(seed, streams::kAgentFailures));
  return sample_events(rate, duration_p, horizon, rng, [&](Rng& r) {
    FailureEvent ev;
    ev.kind = FailureKind::Agent;
    ev.agent = r.uniform_int(0, agent_count - 1);
    return ev;
  });
}

std::vector<FailureEvent> sample_link_failures(double rate, double duration_p, long horizon,
                                               const std::vector<std::pair<int, int>>& edges,
                                               std::uint64_t seed) {
  if (edges.empty()) throw std::invalid_argument("need at least one edge");
  Rng rng(Rng::derive(seed, streams::kLinkFailures));
  return sample_events(rate, duration_p, horizon, rng, [&](Rng& r) {
    FailureEvent ev;
    ev.kind = FailureKind::Link;
    const auto& e = edges[r.uniform_int(0, static_cast<int>(edges.size()) - 1)];
    ev.edge_a = e.first;
    ev.edge_b = e.second;
    return ev;
  });
}

void save_schedule_csv(const std::string& path, const std::vector<FailureEvent>& schedule) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write schedule " + path);
  out << "kind,target,start_hour,duration_hours\n";
  for (const auto& ev : schedule) {
    if (ev.kind == FailureKind::Agent)
      out << "agent," << ev.agent;
    else
      out << "link," << ev.edge_a << '-' << ev.edge_b;
    out << ',' << ev.start_hour << ',' << ev.duration_hours << '\n';
  }
}

std::vector<FailureEvent> load_schedule_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schedule " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty schedule file");
  std::vector<FailureEvent> out;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string kind, target, start, duration;
    if (!std::getline(row, kind, ',') || !std::getline(row, target, ',') ||
        !std::getline(row, start, ',') || !std::getline(row, duration, ','))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed row");
    FailureEvent ev;
    try {
      if (kind == "agent") {
        ev.kind = FailureKind::Agent;
        ev.agent = std::stoi(target);
      } else if (kind == "link") {
        ev.kind = FailureKind::Link;
        const auto dash = target.find('-');
        if (dash == std::string::npos) throw std::invalid_argument("edge");
        ev.edge_a = std::stoi(target.substr(0, dash));
        ev.edge_b = std::stoi(target.substr(dash + 1));
      } else {
        throw std::invalid_argument("kind");
      }
      ev.start_hour = std::stol(start);
      ev.duration_hours = std::stol(duration);
    } catch (const std::invalid_argument&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed row");
    }
    if (ev.duration_hours < 1)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": duration must be >= 1");
    out.push_back(ev);
  }
  return out;
}

void apply_agent_failure(consensus::Trainer& trainer, int agent, bool failure_active) {
  trainer.set_agent_active(agent, !failure_active);
}

ConnectivityReport apply_link_failure(consensus::CommGraph& graph, int a, int b,
                                      bool failure_active) {
  graph.set_link(a, b, !failure_active);
  ConnectivityReport report;
  report.spans_all.resize(graph.agent_count());
  for (int i = 0; i < graph.agent_count(); ++i) {
    report.spans_all[i] = graph.component_spans_all(i);
    report.any_disconnected |= !report.spans_all[i];
  }
  return report;
}

env::GlobalState replacement_state(const Eigen::VectorXd& mean_p, const Eigen::VectorXd& mean_q,
                                   const Eigen::VectorXi& sampled_prev_action, long hour) {
  env::GlobalState s;
  s.p = mean_p;
  s.q = mean_q;
  s.prev_action = sampled_prev_action;
  s.hour = hour;
  return s;
}

FailureRuntime::FailureRuntime(std::vector<FailureEvent> schedule, consensus::Trainer& trainer,
                               const env::Environment& env, const consensus::HistoryInit& hist)
    : schedule_(std::move(schedule)),
      trainer_(trainer),
      env_(env),
      mean_p_(hist.mean_p),
      mean_q_(hist.mean_q),
      failed_(trainer.agent_count(), 0),
      cut_off_(trainer.agent_count(), 0),
      last_feat_(trainer.agent_count()) {
  for (const auto& ev : schedule_) {
    if (ev.duration_hours < 1) throw std::invalid_argument("failure duration must be >= 1");
    if (ev.kind == FailureKind::Agent &&
        (ev.agent < 0 || ev.agent >= trainer.agent_count()))
      throw std::invalid_argument("failure event targets an unknown agent");
  }
}

void FailureRuntime::at_hour(long hour) {
  const int K = trainer_.agent_count();

  // Recompute active windows; overlapping events union naturally.
  std::vector<char> failed_now(K, 0);
  auto* graph = trainer_.graph();
  if (graph) graph->restore_all_links();
  for (const auto& ev : schedule_) {
    if (!ev.active_at(hour)) continue;
    if (ev.kind == FailureKind::Agent)
      failed_now[ev.agent] = 1;
    else if (graph)
      graph->set_link(ev.edge_a, ev.edge_b, false);
  }
  for (int i = 0; i < K; ++i) {
    if (failed_now[i] != failed_[i]) apply_agent_failure(trainer_, i, failed_now[i]);
    failed_[i] = failed_now[i];
  }

  for (int i = 0; i < K; ++i)
    cut_off_[i] = graph && !graph->component_spans_all(i) ? 1 : 0;

  // Agents with full observability refresh their view of the real state.
  Eigen::VectorXd real_feat;
  for (int i = 0; i < K; ++i) {
    if (cut_off_[i]) continue;
    if (real_feat.size() == 0) real_feat = env_.encode(env_.state());
    last_feat_[i] = real_feat;
  }
}

Eigen::VectorXd FailureRuntime::replacement_feat(int agent, long hour) {
  if (last_feat_[agent].size() == 0) last_feat_[agent] = env_.encode(env_.state());
  const Eigen::VectorXi sampled = trainer_.sample_joint(agent, last_feat_[agent]);
  const auto state = replacement_state(mean_p_, mean_q_, sampled, hour);
  last_feat_[agent] = env_.encode(state);
  return last_feat_[agent];
}

consensus::FailureHooks FailureRuntime::hooks() {
  consensus::FailureHooks h;
  h.at_hour = [this](long hour) { at_hour(hour); };
  h.agent_frozen = [this](int agent) { return agent_failed(agent); };
  h.agent_cut_off = [this](int agent) { return agent_cut_off(agent); };
  h.replacement_feat = [this](int agent, long hour) { return replacement_feat(agent, hour); };
  return h;
}

}  // namespace vvc::failures
