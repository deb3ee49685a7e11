#pragma once

#include <string>
#include <vector>

#include "vvc/cmarl.hpp"
#include "vvc/control_loop.hpp"

namespace vvc::benchmarks {

using consensus::ActionCodec;
using consensus::BatchSource;
using consensus::CommGraph;
using consensus::EncodedBatch;
using consensus::Hyper;
using consensus::PayloadDims;

// Centralized single-agent baseline: one value/policy pair over the global
// state and joint action, trained on the averaged reward with the same
// consistency loss as C-MARL.
class SacTrainer : public consensus::Trainer {
 public:
  SacTrainer(std::uint64_t seed, int feature_dim, const ActionCodec& codec, const Hyper& h);

  void train_iteration(const BatchSource& src) override;
  int local_action(int device, const Eigen::Ref<const Eigen::VectorXd>& feat) override;
  Eigen::VectorXi sample_joint(int, const Eigen::Ref<const Eigen::VectorXd>& feat) override;
  int agent_count() const override { return 1; }
  long iteration() const override { return nu_; }
  int last_updated_agent() const override { return nu_ > 0 ? 0 : -1; }
  long long transmitted() const override { return 0; }
  void save_checkpoints(const std::string& prefix) const override;

  const consensus::AgentRuntime& agent() const { return agent_; }
  consensus::AgentRuntime& agent_mut() { return agent_; }
  nn::JointPolicyDist policy(const Eigen::Ref<const Eigen::VectorXd>& feat) const;

 private:
  Hyper h_;
  ActionCodec codec_;
  consensus::AgentRuntime agent_;
  Rng rng_batch_;
  Rng rng_action_;
  long nu_ = 0;
};

// Multi-agent linearized-ADMM parameter consensus: every iteration each
// agent takes a gradient-linearized primal step on its consistency loss
// plus the dual and neighbor-disagreement terms, then ascends its dual.
// Full parameter vectors cross every link each iteration.
class AdmmTrainer : public consensus::Trainer {
 public:
  struct AdmmAgent {
    nn::AgentParams nets;
    nn::Mlp dual_psi;  // mirrors psi
    nn::Mlp dual_phi;  // mirrors phi
  };

  AdmmTrainer(std::uint64_t seed, int feature_dim, const ActionCodec& codec, const Hyper& h,
              CommGraph graph);

  void train_iteration(const BatchSource& src) override;
  int local_action(int device, const Eigen::Ref<const Eigen::VectorXd>& feat) override;
  Eigen::VectorXi sample_joint(int agent,
                               const Eigen::Ref<const Eigen::VectorXd>& feat) override;
  int agent_count() const override { return static_cast<int>(agents_.size()); }
  long iteration() const override { return nu_; }
  int last_updated_agent() const override { return nu_ > 0 ? agent_count() - 1 : -1; }
  long long transmitted() const override { return graph_.transmitted; }
  void save_checkpoints(const std::string& prefix) const override;
  CommGraph* graph() override { return &graph_; }

  const AdmmAgent& agent(int i) const { return agents_[i]; }
  AdmmAgent& agent_mut(int i) { return agents_[i]; }
  long params_per_agent() const;

 private:
  Hyper h_;
  ActionCodec codec_;
  CommGraph graph_;
  std::vector<AdmmAgent> agents_;
  Rng rng_batch_;
  Rng rng_action_;
  long nu_ = 0;
};

// Transmitted-scalar summary across methods.
struct MethodComm {
  std::string method;
  long hours = 0;
  long long transmitted = 0;
  double scalars_per_hour = 0.0;
};

MethodComm comm_from_metrics(const std::string& method,
                             const std::vector<consensus::HourMetrics>& metrics);
std::string communication_report_text(const std::vector<MethodComm>& rows);
void write_communication_report_csv(const std::string& path,
                                    const std::vector<MethodComm>& rows);

}  // namespace vvc::benchmarks
