#include "vvc/env.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vvc::env {

using feeder::DeviceKind;

MeteringSets build_metering_sets(const feeder::FeederModel& f, CapMeterRule rule) {
  MeteringSets sets;
  sets.branches.resize(f.device_count());
  sets.nodes.resize(f.device_count());

  for (int d = 0; d < f.device_count(); ++d) {
    const auto& dev = f.devices[d];
    switch (dev.kind) {
      case DeviceKind::Regulator: {
        // The first downstream node from the substation; no metered branches.
        int first = -1;
        for (int e : f.topo_order)
          if (f.branches[e].from == 0) {
            first = f.branches[e].to;
            break;
          }
        if (first < 0)
          throw std::runtime_error("regulator " + dev.name + " has no downstream node");
        sets.nodes[d] = {first};
        break;
      }
      case DeviceKind::Oltc: {
        const auto& br = f.branches[dev.branch];
        sets.nodes[d] = {br.to};
        sets.branches[d] = {dev.branch};
        break;
      }
      case DeviceKind::Capacitor: {
        sets.nodes[d] = {dev.bus};
        std::set<int> metered;
        for (int e = 0; e < f.branch_count(); ++e) {
          const auto& br = f.branches[e];
          if (br.from == dev.bus || br.to == dev.bus) metered.insert(e);
        }
        if (rule == CapMeterRule::TwoHop) {
          std::set<int> hop1;
          for (int e : metered) {
            hop1.insert(f.branches[e].from);
            hop1.insert(f.branches[e].to);
          }
          for (int e = 0; e < f.branch_count(); ++e) {
            const auto& br = f.branches[e];
            if (hop1.count(br.from) || hop1.count(br.to)) metered.insert(e);
          }
        }
        sets.branches[d].assign(metered.begin(), metered.end());
        break;
      }
    }
    if (sets.nodes[d].empty())
      throw std::runtime_error("agent " + dev.name + " has an empty metered node set");
  }
  return sets;
}

std::string dump_metering_sets(const feeder::FeederModel& f, const MeteringSets& sets) {
  std::ostringstream out;
  for (int d = 0; d < f.device_count(); ++d) {
    out << f.devices[d].name << " nodes:";
    for (int b : sets.nodes[d]) out << ' ' << f.buses[b].id;
    out << " branches:";
    for (int e : sets.branches[d])
      out << ' ' << f.buses[f.branches[e].from].id << '-' << f.buses[f.branches[e].to].id;
    out << '\n';
  }
  return out.str();
}

int violation_count(int agent, const feeder::PowerFlowSolution& sol, const MeteringSets& sets,
                    const RewardConstants& rc) {
  if (!sol.converged) throw std::runtime_error("violations requested from unsolved flow");
  int count = 0;
  for (int b : sets.nodes[agent]) {
    if (sol.v[b] > rc.v_upper) ++count;
    if (sol.v[b] < rc.v_lower) ++count;
  }
  return count;
}

double local_reward(int agent, const feeder::PowerFlowSolution& sol, int prev_tap, int new_tap,
                    const MeteringSets& sets, const RewardConstants& rc) {
  if (!sol.converged) throw std::runtime_error("reward requested from unsolved flow");
  double metered_loss_kwh = 0.0;
  for (int e : sets.branches[agent]) metered_loss_kwh += sol.branch_loss_kw[e];
  const int violations = violation_count(agent, sol, sets, rc);
  return -rc.c_loss * metered_loss_kwh - rc.c_switch * std::abs(prev_tap - new_tap) -
         rc.lambda_v * violations;
}

Eigen::VectorXd encode_state(const GlobalState& s, const feeder::FeederModel& f,
                             const NormStats& stats) {
  const int n = static_cast<int>(s.p.size());
  const int k = f.device_count();
  Eigen::VectorXd feat(2 * n + k + 2);
  for (int b = 0; b < n; ++b) {
    feat[b] = stats.p_max[b] > 0.0 ? s.p[b] / stats.p_max[b] : 0.0;
    feat[n + b] = stats.q_max[b] > 0.0 ? s.q[b] / stats.q_max[b] : 0.0;
  }
  for (int d = 0; d < k; ++d) {
    const auto& dev = f.devices[d];
    const double span = dev.tap_max - dev.tap_min;
    feat[2 * n + d] = 2.0 * (s.prev_action[d] - dev.tap_min) / span - 1.0;
  }
  const double phase = 2.0 * M_PI * static_cast<double>(s.hour % 168) / 168.0;
  feat[2 * n + k] = std::cos(phase);
  feat[2 * n + k + 1] = std::sin(phase);
  return feat;
}

Environment::Environment(feeder::FeederModel f, LoadProfile profile, RewardConstants rc,
                         CapMeterRule rule)
    : feeder_(std::move(f)), profile_(std::move(profile)), rc_(rc) {
  if (profile_.p.rows() != feeder_.bus_count() - 1)
    throw std::runtime_error("profile bus count does not match the feeder");
  if (profile_.horizon() < 1) throw std::runtime_error("empty load profile");
  sets_ = build_metering_sets(feeder_, rule);
  reset();
}

int Environment::feature_dim() const {
  return 2 * (feeder_.bus_count() - 1) + feeder_.device_count() + 2;
}

Eigen::VectorXd Environment::loads_p(long hour) const {
  return profile_.p.col(hour % profile_.horizon());
}

Eigen::VectorXd Environment::loads_q(long hour) const {
  return profile_.q.col(hour % profile_.horizon());
}

void Environment::reset(long hour) {
  state_.p = loads_p(hour);
  state_.q = loads_q(hour);
  state_.prev_action = Eigen::VectorXi::Zero(feeder_.device_count());
  state_.hour = hour;
}

Transition Environment::step(const Eigen::VectorXi& joint_taps) {
  const auto sol = feeder::solve_power_flow(feeder_, joint_taps, state_.p, state_.q);

  Transition tr;
  tr.state = state_;
  tr.action = joint_taps;
  tr.rewards.resize(agent_count());
  tr.violations.resize(agent_count());
  for (int i = 0; i < agent_count(); ++i) {
    tr.rewards[i] = local_reward(i, sol, state_.prev_action[i], joint_taps[i], sets_, rc_);
    tr.violations[i] = violation_count(i, sol, sets_, rc_);
  }

  const long next_hour = state_.hour + 1;
  tr.next_state.p = loads_p(next_hour);
  tr.next_state.q = loads_q(next_hour);
  tr.next_state.prev_action = joint_taps;
  tr.next_state.hour = next_hour;

  state_ = tr.next_state;
  return tr;
}

void Environment::freeze_normalization(const NormStats& stats) {
  if (stats.p_max.size() != feeder_.bus_count() - 1 ||
      stats.q_max.size() != feeder_.bus_count() - 1)
    throw std::runtime_error("normalization stats size mismatch");
  stats_ = stats;
  frozen_ = true;
}

const NormStats& Environment::normalization() const {
  if (!frozen_) throw std::runtime_error("normalization statistics not frozen yet");
  return stats_;
}

Eigen::VectorXd Environment::encode(const GlobalState& s) const {
  return encode_state(s, feeder_, normalization());
}

}  // namespace vvc::env
