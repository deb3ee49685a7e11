#pragma once

#include <string>
#include <vector>

#include "vvc/control_loop.hpp"

namespace vvc::failures {

enum class FailureKind { Agent, Link };

struct FailureEvent {
  FailureKind kind = FailureKind::Agent;
  int agent = -1;                 // Agent events
  int edge_a = -1, edge_b = -1;   // Link events
  long start_hour = 0;
  long duration_hours = 1;
  long end_hour() const { return start_hour + duration_hours; }
  bool active_at(long hour) const { return hour >= start_hour && hour < end_hour(); }
};

// Poisson event process (exponential inter-arrivals at 1/rate hours) with
// geometric durations on {1, 2, ...} and uniform target selection.
std::vector<FailureEvent> sample_agent_failures(double rate, double duration_p, long horizon,
                                                int agent_count, std::uint64_t seed);
std::vector<FailureEvent> sample_link_failures(double rate, double duration_p, long horizon,
                                               const std::vector<std::pair<int, int>>& edges,
                                               std::uint64_t seed);

void save_schedule_csv(const std::string& path, const std::vector<FailureEvent>& schedule);
std::vector<FailureEvent> load_schedule_csv(const std::string& path);

// E.1: a failed agent freezes its device, leaves the training rotation,
// and keeps answering neighbor queries.
void apply_agent_failure(consensus::Trainer& trainer, int agent, bool failure_active);

// E.2: flips one link and reports which agents still reach everyone.
struct ConnectivityReport {
  std::vector<bool> spans_all;
  bool any_disconnected = false;
};
ConnectivityReport apply_link_failure(consensus::CommGraph& graph, int a, int b,
                                      bool failure_active);

// Replacement state for an observationally cut-off agent: historical
// average injections and a self-sampled previous joint action.
env::GlobalState replacement_state(const Eigen::VectorXd& mean_p, const Eigen::VectorXd& mean_q,
                                   const Eigen::VectorXi& sampled_prev_action, long hour);

// Drives a failure schedule during a control loop: maintains the active
// windows, freezes failed agents, reroutes cut-off agents through
// replacement states, and restores everything when windows close.
class FailureRuntime {
 public:
  FailureRuntime(std::vector<FailureEvent> schedule, consensus::Trainer& trainer,
                 const env::Environment& env, const consensus::HistoryInit& hist);

  consensus::FailureHooks hooks();

  bool agent_failed(int agent) const { return failed_[agent]; }
  bool agent_cut_off(int agent) const { return cut_off_[agent]; }

 private:
  void at_hour(long hour);
  Eigen::VectorXd replacement_feat(int agent, long hour);

  std::vector<FailureEvent> schedule_;
  consensus::Trainer& trainer_;
  const env::Environment& env_;
  Eigen::VectorXd mean_p_, mean_q_;
  std::vector<char> failed_;
  std::vector<char> cut_off_;
  std::vector<Eigen::VectorXd> last_feat_;  // most recent features each agent saw
};

}  // namespace vvc::failures
