#include "vvc/benchmarks.hpp"

#include <fstream>
#include <sstream>

namespace vvc::benchmarks {

using consensus::consistency_loss;
using nn::MlpGrads;

SacTrainer::SacTrainer(std::uint64_t seed, int feature_dim, const ActionCodec& codec,
                       const Hyper& h)
    : h_(h),
      codec_(codec),
      agent_(
          [&] {
            Rng init(Rng::derive(Rng::derive(seed, streams::kInit), 0));
            return nn::make_agent(feature_dim, h.hidden, codec.space, h.head, init);
          }(),
          h.lr),
      rng_batch_(Rng::derive(seed, streams::kBatch)),
      rng_action_(Rng::derive(seed, streams::kAction)) {}

void SacTrainer::train_iteration(const BatchSource& src) {
  const EncodedBatch batch = src.sample(rng_batch_, h_.batch);
  const Eigen::RowVectorXd global_reward = batch.rewards.colwise().mean();

  MlpGrads g_psi(agent_.nets.psi), g_phi(agent_.nets.phi);
  consistency_loss(agent_.nets, h_.head, codec_.space, batch, global_reward, h_, &g_psi,
                   &g_phi);
  adam_step(agent_.nets.psi, g_psi, agent_.adam_psi_c);
  adam_step(agent_.nets.phi, g_phi, agent_.adam_phi_c);
  nn::target_update(agent_.nets.psi_bar, agent_.nets.psi, h_.rho);
  ++nu_;
}

nn::JointPolicyDist SacTrainer::policy(const Eigen::Ref<const Eigen::VectorXd>& feat) const {
  const Eigen::MatrixXd head_out = mlp_forward(agent_.nets.phi, feat);
  return head_probs(head_out.col(0), codec_.space, h_.head);
}

int SacTrainer::local_action(int device, const Eigen::Ref<const Eigen::VectorXd>& feat) {
  const auto dist = policy(feat);
  return codec_.to_tap(device, nn::sample_group(dist, device, rng_action_));
}

Eigen::VectorXi SacTrainer::sample_joint(int, const Eigen::Ref<const Eigen::VectorXd>& feat) {
  const auto dist = policy(feat);
  Eigen::VectorXi taps(codec_.devices());
  for (int g = 0; g < codec_.devices(); ++g)
    taps[g] = codec_.to_tap(g, nn::sample_group(dist, g, rng_action_));
  return taps;
}

void SacTrainer::save_checkpoints(const std::string& prefix) const {
  nn::save_checkpoint(prefix + "_agent0.txt", agent_.nets);
}

// ---------------------------------------------------------------------------

namespace {

nn::Mlp zeros_like(const nn::Mlp& shape_of) {
  nn::Mlp out = shape_of;
  for (auto& w : out.w) w.setZero();
  for (auto& b : out.b) b.setZero();
  return out;
}

// theta_i <- theta_i - eta * (grad + dual + rho * sum_j (theta_i - theta_j)),
// evaluated layerwise against the pre-iteration snapshot.
void primal_step(nn::Mlp& live, const nn::Mlp& snapshot, const MlpGrads& grad,
                 const nn::Mlp& dual, const std::vector<const nn::Mlp*>& neighbor_snapshots,
                 double eta, double rho) {
  for (int l = 0; l < live.layer_count(); ++l) {
    Eigen::MatrixXd pen_w = Eigen::MatrixXd::Zero(live.w[l].rows(), live.w[l].cols());
    Eigen::VectorXd pen_b = Eigen::VectorXd::Zero(live.b[l].size());
    for (const auto* nb : neighbor_snapshots) {
      pen_w += snapshot.w[l] - nb->w[l];
      pen_b += snapshot.b[l] - nb->b[l];
    }
    live.w[l] = snapshot.w[l] - eta * (grad.w[l] + dual.w[l] + rho * pen_w);
    live.b[l] = snapshot.b[l] - eta * (grad.b[l] + dual.b[l] + rho * pen_b);
  }
}

// dual_i <- dual_i + c * sum_j (theta_i - theta_j) with post-step parameters.
void dual_step(nn::Mlp& dual, const nn::Mlp& own, const std::vector<const nn::Mlp*>& neighbors,
               double c) {
  for (int l = 0; l < dual.layer_count(); ++l) {
    for (const auto* nb : neighbors) {
      dual.w[l] += c * (own.w[l] - nb->w[l]);
      dual.b[l] += c * (own.b[l] - nb->b[l]);
    }
  }
}

}  // namespace

AdmmTrainer::AdmmTrainer(std::uint64_t seed, int feature_dim, const ActionCodec& codec,
                         const Hyper& h, CommGraph graph)
    : h_(h),
      codec_(codec),
      graph_(std::move(graph)),
      rng_batch_(Rng::derive(seed, streams::kBatch)),
      rng_action_(Rng::derive(seed, streams::kAction)) {
  const int K = codec_.devices();
  if (graph_.agent_count() != K)
    throw std::invalid_argument("communication graph size does not match device count");
  for (int i = 0; i < K; ++i) {
    Rng init(Rng::derive(Rng::derive(seed, streams::kInit), i));
    AdmmAgent agent{nn::make_agent(feature_dim, h_.hidden, codec_.space, h_.head, init), {}, {}};
    agent.dual_psi = zeros_like(agent.nets.psi);
    agent.dual_phi = zeros_like(agent.nets.phi);
    agents_.push_back(std::move(agent));
  }
}

long AdmmTrainer::params_per_agent() const {
  return agents_[0].nets.psi.param_count() + agents_[0].nets.phi.param_count();
}

void AdmmTrainer::train_iteration(const BatchSource& src) {
  const int K = agent_count();
  const EncodedBatch batch = src.sample(rng_batch_, h_.batch);

  // Jacobi update: gradients and neighbor terms use the pre-iteration
  // snapshot for every agent.
  std::vector<nn::Mlp> snap_psi, snap_phi;
  snap_psi.reserve(K);
  snap_phi.reserve(K);
  for (const auto& a : agents_) {
    snap_psi.push_back(a.nets.psi);
    snap_phi.push_back(a.nets.phi);
  }

  for (int i = 0; i < K; ++i) {
    auto& ag = agents_[i];
    nn::AgentParams frozen{snap_psi[i], snap_phi[i], ag.nets.psi_bar};
    MlpGrads g_psi(frozen.psi), g_phi(frozen.phi);
    consistency_loss(frozen, h_.head, codec_.space, batch, batch.rewards.row(i), h_, &g_psi,
                     &g_phi);

    std::vector<const nn::Mlp*> nb_psi, nb_phi;
    for (int j : graph_.live_neighbors(i)) {
      nb_psi.push_back(&snap_psi[j]);
      nb_phi.push_back(&snap_phi[j]);
    }
    primal_step(ag.nets.psi, snap_psi[i], g_psi, ag.dual_psi, nb_psi, h_.lr, h_.admm_rho);
    primal_step(ag.nets.phi, snap_phi[i], g_phi, ag.dual_phi, nb_phi, h_.lr, h_.admm_rho);
  }

  for (int i = 0; i < K; ++i) {
    auto& ag = agents_[i];
    std::vector<const nn::Mlp*> nb_psi, nb_phi;
    for (int j : graph_.live_neighbors(i)) {
      nb_psi.push_back(&agents_[j].nets.psi);
      nb_phi.push_back(&agents_[j].nets.phi);
    }
    dual_step(ag.dual_psi, ag.nets.psi, nb_psi, h_.admm_c);
    dual_step(ag.dual_phi, ag.nets.phi, nb_phi, h_.admm_c);
    nn::target_update(ag.nets.psi_bar, ag.nets.psi, h_.rho);

    // Full weight vectors cross every incident link.
    graph_.transmitted +=
        static_cast<long long>(graph_.live_neighbors(i).size()) * params_per_agent();
  }
  ++nu_;
}

int AdmmTrainer::local_action(int device, const Eigen::Ref<const Eigen::VectorXd>& feat) {
  const Eigen::MatrixXd head_out = mlp_forward(agents_[device].nets.phi, feat);
  const auto dist = head_probs(head_out.col(0), codec_.space, h_.head);
  return codec_.to_tap(device, nn::sample_group(dist, device, rng_action_));
}

Eigen::VectorXi AdmmTrainer::sample_joint(int agent,
                                          const Eigen::Ref<const Eigen::VectorXd>& feat) {
  const Eigen::MatrixXd head_out = mlp_forward(agents_[agent].nets.phi, feat);
  const auto dist = head_probs(head_out.col(0), codec_.space, h_.head);
  Eigen::VectorXi taps(codec_.devices());
  for (int g = 0; g < codec_.devices(); ++g)
    taps[g] = codec_.to_tap(g, nn::sample_group(dist, g, rng_action_));
  return taps;
}

void AdmmTrainer::save_checkpoints(const std::string& prefix) const {
  for (int i = 0; i < agent_count(); ++i)
    nn::save_checkpoint(prefix + "_agent" + std::to_string(i) + ".txt", agents_[i].nets);
}

// ---------------------------------------------------------------------------

MethodComm comm_from_metrics(const std::string& method,
                             const std::vector<consensus::HourMetrics>& metrics) {
  MethodComm out;
  out.method = method;
  out.hours = static_cast<long>(metrics.size());
  out.transmitted = metrics.empty() ? 0 : metrics.back().transmitted;
  out.scalars_per_hour =
      out.hours > 0 ? static_cast<double>(out.transmitted) / out.hours : 0.0;
  return out;
}

std::string communication_report_text(const std::vector<MethodComm>& rows) {
  std::ostringstream out;
  out << "method            hours   transmitted    scalars/hour\n";
  for (const auto& r : rows) {
    out << r.method;
    for (size_t i = r.method.size(); i < 18; ++i) out << ' ';
    out << r.hours << "   " << r.transmitted << "   " << r.scalars_per_hour << '\n';
  }
  for (size_t a = 0; a < rows.size(); ++a)
    for (size_t b = a + 1; b < rows.size(); ++b) {
      if (rows[b].scalars_per_hour > 0.0)
        out << rows[a].method << " / " << rows[b].method << " = "
            << rows[a].scalars_per_hour / rows[b].scalars_per_hour << '\n';
    }
  return out.str();
}

void write_communication_report_csv(const std::string& path,
                                    const std::vector<MethodComm>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report " + path);
  out << "method,hours,transmitted_scalars,scalars_per_hour\n";
  out.precision(17);
  for (const auto& r : rows)
    out << r.method << ',' << r.hours << ',' << r.transmitted << ',' << r.scalars_per_hour
        << '\n';
}

}  // namespace vvc::benchmarks
