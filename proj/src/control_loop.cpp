#include "vvc/control_loop.hpp"

#include <chrono>
#include <stdexcept>

namespace vvc::consensus {

std::vector<HourMetrics> control_loop(env::Environment& env, Trainer& trainer,
                                      ReplayBuffer& buffer, const BatchSource& src,
                                      const LoopOptions& opt, long horizon_hours,
                                      const FailureHooks* hooks,
                                      const std::function<void(const HourMetrics&)>& on_hour) {
  const int K = trainer.agent_count();
  std::vector<HourMetrics> out;
  out.reserve(horizon_hours);
  const auto start = std::chrono::steady_clock::now();

  for (long step = 0; step < horizon_hours; ++step) {
    const long hour = env.state().hour;
    if (hooks && hooks->at_hour) hooks->at_hour(hour);

    if (opt.trigger == StepTrigger::GlobalCount) {
      for (int u = 0; u < opt.updates_between_steps; ++u) trainer.train_iteration(src);
    } else {
      // Train until every healthy agent received its C updates.
      std::vector<int> counts(K, 0);
      const long cap = static_cast<long>(opt.per_agent_updates) * K * 64;
      for (long guard = 0; guard < cap; ++guard) {
        bool done = true;
        for (int i = 0; i < K; ++i)
          if (trainer.agent_active(i) && counts[i] < opt.per_agent_updates) done = false;
        if (done) break;
        trainer.train_iteration(src);
        const int updated = trainer.last_updated_agent();
        if (updated < 0) break;  // nothing trainable
        ++counts[updated];
      }
    }

    const auto& st = env.state();
    Eigen::VectorXd shared_feat;
    bool any_replacement = false;
    Eigen::VectorXi taps(K);
    for (int i = 0; i < K; ++i) {
      if (hooks && hooks->agent_frozen && hooks->agent_frozen(i)) {
        taps[i] = st.prev_action[i];  // device repeats its last tap
      } else if (hooks && hooks->agent_cut_off && hooks->agent_cut_off(i)) {
        taps[i] = trainer.local_action(i, hooks->replacement_feat(i, hour));
        any_replacement = true;
      } else {
        if (shared_feat.size() == 0) shared_feat = env.encode(st);
        taps[i] = trainer.local_action(i, shared_feat);
      }
    }

    auto tr = env.step(taps);
    HourMetrics m;
    m.hour = tr.state.hour;
    m.mean_reward = tr.rewards.mean();
    m.mean_violations = tr.violations.cast<double>().mean();
    m.transmitted = trainer.transmitted();
    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!any_replacement) buffer.push(std::move(tr));

    if (hooks && hooks->after_hour) hooks->after_hour(hour);
    if (on_hour) on_hour(m);
    out.push_back(m);
  }
  return out;
}

HistoryInit init_buffer_from_history(env::Environment& env, ReplayBuffer& buffer, long hours,
                                     std::uint64_t seed) {
  if (hours < 1) throw std::invalid_argument("history needs at least one hour");
  Rng rng(Rng::derive(seed, streams::kHistory));
  const auto& f = env.model();
  const int n = f.bus_count() - 1;

  HistoryInit init;
  init.stats.p_max = Eigen::VectorXd::Zero(n);
  init.stats.q_max = Eigen::VectorXd::Zero(n);
  init.mean_p = Eigen::VectorXd::Zero(n);
  init.mean_q = Eigen::VectorXd::Zero(n);

  for (long h = 0; h < hours; ++h) {
    Eigen::VectorXi taps(f.device_count());
    for (int d = 0; d < f.device_count(); ++d)
      taps[d] = rng.uniform_int(f.devices[d].tap_min, f.devices[d].tap_max);
    auto tr = env.step(taps);
    init.stats.p_max = init.stats.p_max.cwiseMax(tr.state.p.cwiseAbs());
    init.stats.q_max = init.stats.q_max.cwiseMax(tr.state.q.cwiseAbs());
    init.mean_p += tr.state.p;
    init.mean_q += tr.state.q;
    buffer.push(std::move(tr));
  }
  init.mean_p /= static_cast<double>(hours);
  init.mean_q /= static_cast<double>(hours);
  env.freeze_normalization(init.stats);
  return init;
}

}  // namespace vvc::consensus
