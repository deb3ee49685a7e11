#include "vvc/cmarl.hpp"

#include <cmath>
#include <stdexcept>

namespace vvc::consensus {

using nn::ForwardTrace;
using nn::JointPolicyDist;
using nn::MlpGrads;

namespace {

// Joint action probability: product of the chosen entry in every group.
double joint_prob(const JointPolicyDist& dist, const Eigen::Ref<const Eigen::VectorXi>& a) {
  double p = 1.0;
  for (size_t g = 0; g < dist.probs.size(); ++g) p *= dist.probs[g][a[static_cast<int>(g)]];
  return p;
}

}  // namespace

std::vector<ZetaSample> eval_zeta(const nn::AgentParams& nets, nn::HeadKind head,
                                  const nn::ActionSpace& space, const EncodedBatch& batch) {
  const int B = batch.size();
  const Eigen::MatrixXd v = mlp_forward(nets.psi, batch.s);
  const Eigen::MatrixXd head_out = mlp_forward(nets.phi, batch.s);
  std::vector<ZetaSample> out(B);
  for (int k = 0; k < B; ++k) {
    const auto dist = head_probs(head_out.col(k), space, head);
    out[k] = {v(0, k), joint_prob(dist, batch.actions.col(k))};
  }
  return out;
}

double consistency_loss(const nn::AgentParams& nets, nn::HeadKind head,
                        const nn::ActionSpace& space, const EncodedBatch& batch,
                        const Eigen::Ref<const Eigen::RowVectorXd>& rewards, const Hyper& h,
                        MlpGrads* g_psi, MlpGrads* g_phi) {
  const int B = batch.size();
  if (rewards.size() != B) throw std::invalid_argument("reward row does not match the batch");

  ForwardTrace tr_psi, tr_phi;
  const Eigen::MatrixXd v = mlp_forward(nets.psi, batch.s, g_psi ? &tr_psi : nullptr);
  const Eigen::MatrixXd v_bar = mlp_forward(nets.psi_bar, batch.s_next);
  const Eigen::MatrixXd head_out = mlp_forward(nets.phi, batch.s, g_phi ? &tr_phi : nullptr);

  std::vector<JointPolicyDist> dists(B);
  Eigen::RowVectorXd logp(B);
  for (int k = 0; k < B; ++k) {
    dists[k] = head_probs(head_out.col(k), space, head);
    logp[k] = log_prob(dists[k], batch.actions.col(k));
  }

  const Eigen::RowVectorXd resid =
      v.row(0) - h.gamma * v_bar.row(0) + h.alpha * logp - h.reward_scale * rewards;
  const double loss = resid.squaredNorm() / B;

  if (g_psi) mlp_backward(nets.psi, tr_psi, (2.0 / B) * resid, *g_psi);
  if (g_phi) {
    Eigen::MatrixXd dhead(head_out.rows(), B);
    std::vector<Eigen::VectorXd> grad_probs(space.groups());
    for (int k = 0; k < B; ++k) {
      const double dlogp = (2.0 / B) * resid[k] * h.alpha;
      for (int g = 0; g < space.groups(); ++g) {
        grad_probs[g] = Eigen::VectorXd::Zero(space.group_sizes[g]);
        const int a = batch.actions(g, k);
        const double p = dists[k].probs[g][a];
        // The probability floor inside log_prob flattens the loss there.
        grad_probs[g][a] = p > nn::kProbFloor ? dlogp / p : 0.0;
      }
      dhead.col(k) = head_backward(head_out.col(k), space, head, dists[k], grad_probs);
    }
    mlp_backward(nets.phi, tr_phi, dhead, *g_phi);
  }
  return loss;
}

double consensus_penalty(const nn::AgentParams& nets, nn::HeadKind head,
                         const nn::ActionSpace& space, const EncodedBatch& batch,
                         const std::vector<std::vector<ZetaSample>>& neighbor_zetas,
                         double lambda, MlpGrads* g_psi, MlpGrads* g_phi) {
  const int B = batch.size();
  const double deg = static_cast<double>(neighbor_zetas.size());
  if (neighbor_zetas.empty()) return 0.0;
  for (const auto& z : neighbor_zetas)
    if (static_cast<int>(z.size()) != B)
      throw std::invalid_argument("neighbor zeta batch size mismatch");

  ForwardTrace tr_psi, tr_phi;
  const Eigen::MatrixXd v = mlp_forward(nets.psi, batch.s, g_psi ? &tr_psi : nullptr);
  const Eigen::MatrixXd head_out = mlp_forward(nets.phi, batch.s, g_phi ? &tr_phi : nullptr);

  double loss = 0.0;
  Eigen::RowVectorXd dv = Eigen::RowVectorXd::Zero(B);
  Eigen::MatrixXd dhead(head_out.rows(), B);
  std::vector<Eigen::VectorXd> grad_probs(space.groups());
  for (int k = 0; k < B; ++k) {
    const auto dist = head_probs(head_out.col(k), space, head);
    const auto action = batch.actions.col(k);
    const double own_prob = joint_prob(dist, action);

    double sum_v = 0.0, sum_p = 0.0;
    for (const auto& z : neighbor_zetas) {
      sum_v += z[k].value;
      sum_p += z[k].action_prob;
    }
    const double rv = deg * v(0, k) - sum_v;
    const double rp = deg * own_prob - sum_p;
    loss += 0.5 * lambda * (rv * rv + rp * rp);

    if (g_phi || g_psi) {
      dv[k] = (lambda / B) * deg * rv;
      const double dprob = (lambda / B) * deg * rp;
      for (int g = 0; g < space.groups(); ++g) {
        grad_probs[g] = Eigen::VectorXd::Zero(space.group_sizes[g]);
        // d(prod of groups)/dp_g = product over the other groups.
        double others = 1.0;
        for (int g2 = 0; g2 < space.groups(); ++g2)
          if (g2 != g) others *= dist.probs[g2][action[g2]];
        grad_probs[g][action[g]] = dprob * others;
      }
      dhead.col(k) = head_backward(head_out.col(k), space, head, dist, grad_probs);
    }
  }
  loss /= B;

  if (g_psi) mlp_backward(nets.psi, tr_psi, dv, *g_psi);
  if (g_phi) mlp_backward(nets.phi, tr_phi, dhead, *g_phi);
  return loss;
}

AgentRuntime::AgentRuntime(nn::AgentParams p, double lr)
    : nets(std::move(p)),
      adam_psi_c(nets.psi, lr),
      adam_phi_c(nets.phi, lr),
      adam_psi_p(nets.psi, lr),
      adam_phi_p(nets.phi, lr) {}

CmarlTrainer::CmarlTrainer(std::uint64_t seed, int feature_dim, const ActionCodec& codec,
                           const Hyper& h, CommGraph graph, PayloadDims payload)
    : h_(h),
      codec_(codec),
      graph_(std::move(graph)),
      payload_(payload),
      rng_agent_(Rng::derive(seed, streams::kAgentSelect)),
      rng_batch_(Rng::derive(seed, streams::kBatch)),
      rng_action_(Rng::derive(seed, streams::kAction)) {
  const int K = codec_.devices();
  if (graph_.agent_count() != K)
    throw std::invalid_argument("communication graph size does not match device count");
  for (int i = 0; i < K; ++i) {
    Rng init(Rng::derive(Rng::derive(seed, streams::kInit), i));
    agents_.emplace_back(nn::make_agent(feature_dim, h_.hidden, codec_.space, h_.head, init),
                         h_.lr);
  }
}

int CmarlTrainer::sample_active_agent() {
  std::vector<int> active;
  for (int i = 0; i < agent_count(); ++i)
    if (agents_[i].active) active.push_back(i);
  if (active.empty()) return -1;
  return active[rng_agent_.uniform_int(0, static_cast<int>(active.size()) - 1)];
}

void CmarlTrainer::train_iteration(const BatchSource& src) {
  const int i = sample_active_agent();
  if (i < 0) return;  // every agent failed; nothing to train
  const EncodedBatch batch = src.sample(rng_batch_, h_.batch);
  auto& ag = agents_[i];

  if (h_.consistency_enabled) {
    MlpGrads g_psi(ag.nets.psi), g_phi(ag.nets.phi);
    consistency_loss(ag.nets, h_.head, codec_.space, batch, batch.rewards.row(i), h_, &g_psi,
                     &g_phi);
    adam_step(ag.nets.psi, g_psi, ag.adam_psi_c);
    adam_step(ag.nets.phi, g_phi, ag.adam_phi_c);
  }

  if (h_.consensus_enabled) {
    const auto neighbors = graph_.live_neighbors(i);
    if (!neighbors.empty()) {
      std::vector<std::vector<ZetaSample>> zetas;
      zetas.reserve(neighbors.size());
      for (int j : neighbors)
        zetas.push_back(eval_zeta(agents_[j].nets, h_.head, codec_.space, batch));
      // Sample identifiers broadcast once, two scalars back per neighbor.
      graph_.transmitted += static_cast<long long>(batch.size()) * payload_.identifier() +
                            static_cast<long long>(batch.size()) * 2 * neighbors.size();

      MlpGrads g_psi(ag.nets.psi), g_phi(ag.nets.phi);
      consensus_penalty(ag.nets, h_.head, codec_.space, batch, zetas, h_.lambda_c, &g_psi,
                        &g_phi);
      adam_step(ag.nets.psi, g_psi, ag.adam_psi_p);
      adam_step(ag.nets.phi, g_phi, ag.adam_phi_p);
    }
  }

  nn::target_update(ag.nets.psi_bar, ag.nets.psi, h_.rho);
  last_updated_ = i;
  ++nu_;
}

double CmarlTrainer::value(int agent, const Eigen::Ref<const Eigen::VectorXd>& feat) const {
  return mlp_forward(agents_[agent].nets.psi, feat)(0, 0);
}

nn::JointPolicyDist CmarlTrainer::policy(int agent,
                                         const Eigen::Ref<const Eigen::VectorXd>& feat) const {
  const Eigen::MatrixXd head_out = mlp_forward(agents_[agent].nets.phi, feat);
  return head_probs(head_out.col(0), codec_.space, h_.head);
}

int CmarlTrainer::local_action(int agent, const Eigen::Ref<const Eigen::VectorXd>& feat) {
  const auto dist = policy(agent, feat);
  return codec_.to_tap(agent, nn::sample_group(dist, agent, rng_action_));
}

Eigen::VectorXi CmarlTrainer::sample_joint(int agent,
                                           const Eigen::Ref<const Eigen::VectorXd>& feat) {
  const auto dist = policy(agent, feat);
  Eigen::VectorXi taps(codec_.devices());
  for (int g = 0; g < codec_.devices(); ++g)
    taps[g] = codec_.to_tap(g, nn::sample_group(dist, g, rng_action_));
  return taps;
}

void CmarlTrainer::set_agent_active(int agent, bool active) { agents_[agent].active = active; }

void CmarlTrainer::save_checkpoints(const std::string& prefix) const {
  for (int i = 0; i < agent_count(); ++i)
    nn::save_checkpoint(prefix + "_agent" + std::to_string(i) + ".txt", agents_[i].nets);
}

}  // namespace vvc::consensus
