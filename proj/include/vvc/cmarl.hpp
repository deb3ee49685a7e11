#pragma once

#include <vector>

#include "vvc/trainer.hpp"

namespace vvc::consensus {

// zeta(s, a) = [v(s), pi(a|s)]: the two scalars a neighbor returns per
// queried sample.
struct ZetaSample {
  double value = 0.0;
  double action_prob = 0.0;
};

std::vector<ZetaSample> eval_zeta(const nn::AgentParams& nets, nn::HeadKind head,
                                  const nn::ActionSpace& space, const EncodedBatch& batch);

// Mean squared off-policy consistency residual over the batch:
//   (v_psi(s) - gamma v_psibar(s') + alpha log pi_phi(a|s) - scale * r)^2.
// Gradients (accumulated into g_psi / g_phi when given) flow through
// v_psi and log pi only; the successor value uses the target net.
double consistency_loss(const nn::AgentParams& nets, nn::HeadKind head,
                        const nn::ActionSpace& space, const EncodedBatch& batch,
                        const Eigen::Ref<const Eigen::RowVectorXd>& rewards, const Hyper& h,
                        nn::MlpGrads* g_psi = nullptr, nn::MlpGrads* g_phi = nullptr);

// Mean over the batch of (lambda/2) || deg * zeta_i(s,a) - sum_j zeta_j(s,a) ||^2
// with neighbor outputs held constant.
double consensus_penalty(const nn::AgentParams& nets, nn::HeadKind head,
                         const nn::ActionSpace& space, const EncodedBatch& batch,
                         const std::vector<std::vector<ZetaSample>>& neighbor_zetas,
                         double lambda, nn::MlpGrads* g_psi = nullptr,
                         nn::MlpGrads* g_phi = nullptr);

// Per-agent nets plus optimizer state. The consistency and consensus steps
// keep separate Adam accumulators so an identically-zero penalty leaves
// parameters untouched.
struct AgentRuntime {
  nn::AgentParams nets;
  nn::AdamState adam_psi_c, adam_phi_c;
  nn::AdamState adam_psi_p, adam_phi_p;
  bool active = true;

  AgentRuntime(nn::AgentParams p, double lr);
};

class CmarlTrainer : public Trainer {
 public:
  CmarlTrainer(std::uint64_t seed, int feature_dim, const ActionCodec& codec, const Hyper& h,
               CommGraph graph, PayloadDims payload);

  void train_iteration(const BatchSource& src) override;
  int local_action(int agent, const Eigen::Ref<const Eigen::VectorXd>& feat) override;
  Eigen::VectorXi sample_joint(int agent,
                               const Eigen::Ref<const Eigen::VectorXd>& feat) override;
  int agent_count() const override { return static_cast<int>(agents_.size()); }
  long iteration() const override { return nu_; }
  int last_updated_agent() const override { return last_updated_; }
  long long transmitted() const override { return graph_.transmitted; }
  void save_checkpoints(const std::string& prefix) const override;
  void set_agent_active(int agent, bool active) override;
  bool agent_active(int agent) const override { return agents_[agent].active; }
  CommGraph* graph() override { return &graph_; }

  // Introspection for tests and experiment probes.
  const AgentRuntime& agent(int i) const { return agents_[i]; }
  AgentRuntime& agent_mut(int i) { return agents_[i]; }
  const Hyper& hyper() const { return h_; }
  const ActionCodec& codec() const { return codec_; }
  double value(int agent, const Eigen::Ref<const Eigen::VectorXd>& feat) const;
  nn::JointPolicyDist policy(int agent, const Eigen::Ref<const Eigen::VectorXd>& feat) const;
  int sample_active_agent();  // the uniform pick used by train_iteration

 private:
  Hyper h_;
  ActionCodec codec_;
  CommGraph graph_;
  PayloadDims payload_;
  std::vector<AgentRuntime> agents_;
  Rng rng_agent_;
  Rng rng_batch_;
  Rng rng_action_;
  long nu_ = 0;
  int last_updated_ = -1;
};

}  // namespace vvc::consensus
