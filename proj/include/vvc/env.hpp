#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "vvc/feeder.hpp"
#include "vvc/load_profile.hpp"

namespace vvc::env {

// Global state S_t = [p_t, q_t, A_{t-1}, t].
struct GlobalState {
  Eigen::VectorXd p;           // kW per non-substation bus
  Eigen::VectorXd q;           // kVar
  Eigen::VectorXi prev_action; // tap positions per device
  long hour = 0;
};

// Per-agent metered branches L_i and nodes N_i (internal indices).
struct MeteringSets {
  std::vector<std::vector<int>> branches;
  std::vector<std::vector<int>> nodes;
};

enum class CapMeterRule { Incident, TwoHop };

MeteringSets build_metering_sets(const feeder::FeederModel& f,
                                 CapMeterRule rule = CapMeterRule::Incident);
std::string dump_metering_sets(const feeder::FeederModel& f, const MeteringSets& sets);

struct Transition {
  GlobalState state;
  Eigen::VectorXi action;
  Eigen::VectorXd rewards;     // $ per agent
  Eigen::VectorXi violations;  // count per agent
  GlobalState next_state;
};

struct RewardConstants {
  double c_loss = 0.04;    // $/kWh
  double c_switch = 0.1;   // $/tap change
  double lambda_v = 0.08;  // $/violation, default 2 * c_loss
  double v_upper = 1.05;
  double v_lower = 0.95;
};

int violation_count(int agent, const feeder::PowerFlowSolution& sol, const MeteringSets& sets,
                    const RewardConstants& rc);

// One hour per step, so branch kW bill as kWh.
double local_reward(int agent, const feeder::PowerFlowSolution& sol, int prev_tap, int new_tap,
                    const MeteringSets& sets, const RewardConstants& rc);

// Frozen feature-scaling statistics (per non-substation bus).
struct NormStats {
  Eigen::VectorXd p_max;  // max |p| seen historically
  Eigen::VectorXd q_max;
};

// [p / p_max, q / q_max, taps scaled to [-1,1], cos/sin hour-of-week].
Eigen::VectorXd encode_state(const GlobalState& s, const feeder::FeederModel& f,
                             const NormStats& stats);

class Environment {
 public:
  Environment(feeder::FeederModel f, LoadProfile profile, RewardConstants rc = {},
              CapMeterRule rule = CapMeterRule::Incident);

  const GlobalState& state() const { return state_; }
  const feeder::FeederModel& model() const { return feeder_; }
  const LoadProfile& profile() const { return profile_; }
  const MeteringSets& metering() const { return sets_; }
  const RewardConstants& rewards() const { return rc_; }
  int agent_count() const { return feeder_.device_count(); }
  int feature_dim() const;

  // Applies the joint action at the current hour, advances time, and
  // returns the full replay record. Throws on power-flow failure.
  Transition step(const Eigen::VectorXi& joint_taps);

  void reset(long hour = 0);

  void freeze_normalization(const NormStats& stats);
  bool normalization_frozen() const { return frozen_; }
  const NormStats& normalization() const;
  Eigen::VectorXd encode(const GlobalState& s) const;

 private:
  Eigen::VectorXd loads_p(long hour) const;
  Eigen::VectorXd loads_q(long hour) const;

  feeder::FeederModel feeder_;
  LoadProfile profile_;
  MeteringSets sets_;
  RewardConstants rc_;
  GlobalState state_;
  NormStats stats_;
  bool frozen_ = false;
};

}  // namespace vvc::env
