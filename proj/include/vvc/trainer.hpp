#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

#include "vvc/comm_graph.hpp"
#include "vvc/nn.hpp"
#include "vvc/replay.hpp"

namespace vvc::consensus {

struct Hyper {
  double alpha = 0.5;         // entropy temperature
  double gamma = 0.95;        // discount
  double lr = 1e-3;
  double rho = 0.99;          // target smoothing
  double lambda_c = 1.0;      // consensus multiplier
  double reward_scale = 5.0;  // applied inside the loss only
  int batch = 16;
  int hidden = 32;
  int update_freq = 1;  // C: updates per agent between actuations
  nn::HeadKind head = nn::HeadKind::Ordinal;
  bool consistency_enabled = true;
  bool consensus_enabled = true;
  double admm_c = 1.0;
  double admm_rho = 500.0;
};

// Raw payload sizes charged per transmitted sample identifier.
struct PayloadDims {
  int state_scalars = 0;
  int action_scalars = 0;
  int identifier() const { return state_scalars + action_scalars; }
  static PayloadDims from_feeder(const feeder::FeederModel& f) {
    // [p, q, prev_action, hour] plus the joint action.
    const int n = f.bus_count() - 1;
    return {2 * n + f.device_count() + 1, f.device_count()};
  }
};

// Common surface of the C-MARL, SAC, and ADMM trainers: one learning
// iteration, per-device action sampling, and communication accounting.
class Trainer {
 public:
  virtual ~Trainer() = default;
  virtual void train_iteration(const BatchSource& src) = 0;
  // Tap position for device `agent` sampled from the owning policy.
  virtual int local_action(int agent, const Eigen::Ref<const Eigen::VectorXd>& feat) = 0;
  // Full joint action sampled from `agent`'s own copy of the joint policy.
  virtual Eigen::VectorXi sample_joint(int agent,
                                       const Eigen::Ref<const Eigen::VectorXd>& feat) = 0;
  virtual int agent_count() const = 0;
  virtual long iteration() const = 0;
  virtual int last_updated_agent() const = 0;
  virtual long long transmitted() const = 0;
  virtual void save_checkpoints(const std::string& prefix) const = 0;
  virtual void set_agent_active(int /*agent*/, bool /*active*/) {}
  virtual bool agent_active(int /*agent*/) const { return true; }
  virtual CommGraph* graph() { return nullptr; }
};

}  // namespace vvc::consensus
