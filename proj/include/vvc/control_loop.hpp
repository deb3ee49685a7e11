#pragma once

#include <functional>
#include <vector>

#include "vvc/trainer.hpp"

namespace vvc::consensus {

struct HourMetrics {
  long hour = 0;
  double mean_reward = 0.0;      // (1/K) sum of local rewards, $
  double mean_violations = 0.0;  // (1/K) sum of violation counts
  long long transmitted = 0;     // cumulative scalars
  double wall_seconds = 0.0;
};

enum class StepTrigger { GlobalCount, PerAgent };

struct LoopOptions {
  int updates_between_steps = 1;  // K * C, GlobalCount trigger
  int per_agent_updates = 1;      // C, PerAgent trigger
  StepTrigger trigger = StepTrigger::GlobalCount;
};

// Failure-injection callbacks; all optional. `at_hour` runs before the
// hour's training burst and is where schedules flip trainer/graph state.
struct FailureHooks {
  std::function<void(long hour)> at_hour;
  std::function<bool(int agent)> agent_frozen;
  std::function<bool(int agent)> agent_cut_off;
  std::function<Eigen::VectorXd(int agent, long hour)> replacement_feat;
  std::function<void(long hour)> after_hour;
};

// Interleaves training bursts with hourly actuation: every hour runs the
// configured number of train iterations, samples each device's tap from
// its owning agent, steps the environment, and stores the transition
// (unless any agent acted on a replacement state).
std::vector<HourMetrics> control_loop(env::Environment& env, Trainer& trainer,
                                      ReplayBuffer& buffer, const BatchSource& src,
                                      const LoopOptions& opt, long horizon_hours,
                                      const FailureHooks* hooks = nullptr,
                                      const std::function<void(const HourMetrics&)>& on_hour = {});

struct HistoryInit {
  env::NormStats stats;
  Eigen::VectorXd mean_p;  // historical average injections for replacement states
  Eigen::VectorXd mean_q;
};

// Pre-fills the buffer by actuating uniformly random taps for `hours`
// steps, then freezes the environment's normalization statistics from the
// visited states.
HistoryInit init_buffer_from_history(env::Environment& env, ReplayBuffer& buffer, long hours,
                                     std::uint64_t seed);

}  // namespace vvc::consensus
