#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fd_check.hpp"
#include "vvc/benchmarks.hpp"

using namespace vvc;
using namespace vvc::benchmarks;
using consensus::CmarlTrainer;
using consensus::VectorBatchSource;

namespace {

consensus::ActionCodec toy_codec(std::vector<int> groups) {
  consensus::ActionCodec codec;
  codec.space.group_sizes = std::move(groups);
  codec.tap_min = Eigen::VectorXi::Zero(codec.space.groups());
  return codec;
}

VectorBatchSource random_source(int feat_dim, const nn::ActionSpace& space, int agents,
                                std::uint64_t seed, int count = 48) {
  Rng rng(seed);
  std::vector<VectorBatchSource::Sample> samples;
  for (int n = 0; n < count; ++n) {
    VectorBatchSource::Sample s;
    s.s.resize(feat_dim);
    s.s_next.resize(feat_dim);
    for (int i = 0; i < feat_dim; ++i) {
      s.s[i] = rng.uniform(-1, 1);
      s.s_next[i] = rng.uniform(-1, 1);
    }
    s.action_indices.resize(space.groups());
    for (int g = 0; g < space.groups(); ++g)
      s.action_indices[g] = rng.uniform_int(0, space.group_sizes[g] - 1);
    s.rewards.resize(agents);
    for (int a = 0; a < agents; ++a) s.rewards[a] = rng.uniform(-1, 0);
    samples.push_back(std::move(s));
  }
  return VectorBatchSource(std::move(samples));
}

bool mlp_equal(const nn::Mlp& a, const nn::Mlp& b) {
  for (int l = 0; l < a.layer_count(); ++l)
    if (a.w[l] != b.w[l] || a.b[l] != b.b[l]) return false;
  return true;
}

double mlp_distance(const nn::Mlp& a, const nn::Mlp& b) {
  double d = 0.0;
  for (int l = 0; l < a.layer_count(); ++l)
    d += (a.w[l] - b.w[l]).squaredNorm() + (a.b[l] - b.b[l]).squaredNorm();
  return std::sqrt(d);
}

consensus::Hyper small_hyper() {
  consensus::Hyper h;
  h.hidden = 8;
  return h;
}

}  // namespace

TEST_CASE("sac training is plain consistency descent on the averaged reward") {
  const auto codec = toy_codec({5, 3});
  consensus::Hyper h = small_hyper();
  const auto src = random_source(6, codec.space, 2, 5);

  SUBCASE("zero-residual batch leaves parameters unchanged") {
    // Build a batch whose averaged rewards exactly satisfy the residual;
    // reward scale 1 keeps the constructed rewards bit-exact.
    h.reward_scale = 1.0;
    SacTrainer sac(11, 6, codec, h);
    Rng probe(Rng::derive(11, streams::kBatch));
    auto batch = src.sample(probe, h.batch);
    const auto& nets = sac.agent().nets;
    const Eigen::MatrixXd v = mlp_forward(nets.psi, batch.s);
    const Eigen::MatrixXd vb = mlp_forward(nets.psi_bar, batch.s_next);
    const Eigen::MatrixXd head = mlp_forward(nets.phi, batch.s);
    std::vector<VectorBatchSource::Sample> samples;
    for (int k = 0; k < batch.size(); ++k) {
      const auto dist = head_probs(head.col(k), codec.space, h.head);
      const double f =
          v(0, k) - h.gamma * vb(0, k) + h.alpha * nn::log_prob(dist, batch.actions.col(k));
      VectorBatchSource::Sample s;
      s.s = batch.s.col(k);
      s.s_next = batch.s_next.col(k);
      s.action_indices = batch.actions.col(k);
      s.rewards = Eigen::VectorXd::Constant(2, f / h.reward_scale);
      samples.push_back(std::move(s));
    }
    VectorBatchSource zero_src(std::move(samples));
    const auto before = sac.agent().nets.psi;
    sac.train_iteration(zero_src);
    CHECK(mlp_equal(sac.agent().nets.psi, before));
  }

  SUBCASE("gradient through the averaged reward matches finite differences") {
    SacTrainer sac(11, 6, codec, h);
    Rng probe(3);
    const auto batch = src.sample(probe, 8);
    const Eigen::RowVectorXd avg = batch.rewards.colwise().mean();
    auto nets = sac.agent().nets;
    nn::MlpGrads g_psi(nets.psi), g_phi(nets.phi);
    consensus::consistency_loss(nets, h.head, codec.space, batch, avg, h, &g_psi, &g_phi);
    const auto loss = [&] {
      return consensus::consistency_loss(nets, h.head, codec.space, batch, avg, h);
    };
    CHECK(vvc::testing::fd_relative_error(nets.psi, g_psi, loss) < 1e-4);
    CHECK(vvc::testing::fd_relative_error(nets.phi, g_phi, loss) < 1e-4);
  }
}

TEST_CASE("single-agent cmarl and sac are update-for-update identical") {
  const auto codec = toy_codec({21});
  consensus::Hyper h = small_hyper();
  const auto src = random_source(4, codec.space, 1, 7);

  CmarlTrainer cmarl(321, 4, codec, h, CommGraph(1, {}), PayloadDims{5, 1});
  SacTrainer sac(321, 4, codec, h);

  CHECK(mlp_equal(cmarl.agent(0).nets.psi, sac.agent().nets.psi));
  CHECK(mlp_equal(cmarl.agent(0).nets.phi, sac.agent().nets.phi));

  for (int i = 0; i < 50; ++i) {
    cmarl.train_iteration(src);
    sac.train_iteration(src);
    REQUIRE(mlp_equal(cmarl.agent(0).nets.psi, sac.agent().nets.psi));
    REQUIRE(mlp_equal(cmarl.agent(0).nets.phi, sac.agent().nets.phi));
    REQUIRE(mlp_equal(cmarl.agent(0).nets.psi_bar, sac.agent().nets.psi_bar));
  }

  // Action sampling also matches draw for draw.
  Eigen::VectorXd feat = Eigen::VectorXd::Zero(4);
  for (int i = 0; i < 20; ++i) CHECK(cmarl.local_action(0, feat) == sac.local_action(0, feat));
}

TEST_CASE("admm with identical agents and zero duals moves by the loss gradient only") {
  const auto codec = toy_codec({4, 3});
  consensus::Hyper h = small_hyper();
  const auto src = random_source(5, codec.space, 2, 13);
  CommGraph pair(2, {{0, 1}});
  AdmmTrainer admm(19, 5, codec, h, pair);
  admm.agent_mut(1).nets = admm.agent(0).nets;  // identical parameters

  // Reproduce the batch the trainer will draw.
  Rng probe(Rng::derive(19, streams::kBatch));
  const auto batch = src.sample(probe, h.batch);
  std::vector<nn::AgentParams> frozen{admm.agent(0).nets, admm.agent(1).nets};

  admm.train_iteration(src);

  for (int i = 0; i < 2; ++i) {
    nn::MlpGrads g_psi(frozen[i].psi), g_phi(frozen[i].phi);
    consensus::consistency_loss(frozen[i], h.head, codec.space, batch, batch.rewards.row(i),
                                h, &g_psi, &g_phi);
    for (int l = 0; l < frozen[i].psi.layer_count(); ++l) {
      const Eigen::MatrixXd expected = frozen[i].psi.w[l] - h.lr * g_psi.w[l];
      CHECK((admm.agent(i).nets.psi.w[l] - expected).cwiseAbs().maxCoeff() < 1e-15);
    }
    for (int l = 0; l < frozen[i].phi.layer_count(); ++l) {
      const Eigen::MatrixXd expected = frozen[i].phi.w[l] - h.lr * g_phi.w[l];
      CHECK((admm.agent(i).nets.phi.w[l] - expected).cwiseAbs().maxCoeff() < 1e-15);
    }
  }
}

TEST_CASE("admm consensus contracts parameter disagreement under zero gradients") {
  const auto codec = toy_codec({4, 3});
  consensus::Hyper h = small_hyper();
  h.lr = 1e-4;  // eta * rho = 0.05 per neighbor
  h.reward_scale = 1.0;
  CommGraph pair(2, {{0, 1}});
  AdmmTrainer admm(23, 4, codec, h, pair);

  // Batch whose rewards zero each agent's residual, so only the penalty acts.
  Rng probe(Rng::derive(23, streams::kBatch));
  const auto tmp_src = random_source(4, codec.space, 2, 29);
  auto batch = tmp_src.sample(probe, h.batch);
  std::vector<VectorBatchSource::Sample> samples;
  for (int k = 0; k < batch.size(); ++k) {
    VectorBatchSource::Sample s;
    s.s = batch.s.col(k);
    s.s_next = batch.s_next.col(k);
    s.action_indices = batch.actions.col(k);
    s.rewards.resize(2);
    for (int i = 0; i < 2; ++i) {
      const auto& nets = admm.agent(i).nets;
      const double v = mlp_forward(nets.psi, s.s)(0, 0);
      const double vb = mlp_forward(nets.psi_bar, s.s_next)(0, 0);
      const Eigen::MatrixXd head = mlp_forward(nets.phi, s.s);
      const auto dist = head_probs(head.col(0), codec.space, h.head);
      s.rewards[i] =
          v - h.gamma * vb + h.alpha * nn::log_prob(dist, s.action_indices);
    }
    samples.push_back(std::move(s));
  }
  VectorBatchSource zero_src(std::move(samples));

  const double d0 = mlp_distance(admm.agent(0).nets.psi, admm.agent(1).nets.psi);
  CHECK(d0 > 0.0);
  admm.train_iteration(zero_src);
  const double d1 = mlp_distance(admm.agent(0).nets.psi, admm.agent(1).nets.psi);
  CHECK(d1 < d0);
  CHECK(d1 == doctest::Approx(d0 * (1.0 - 2 * h.lr * h.admm_rho)).epsilon(1e-6));
}

TEST_CASE("admm transmits full parameter vectors across every link") {
  const auto codec = toy_codec({5, 5, 5});
  consensus::Hyper h = small_hyper();
  const auto src = random_source(6, codec.space, 3, 31);
  CommGraph chain(3, {{0, 1}, {1, 2}});
  AdmmTrainer admm(37, 6, codec, h, chain);

  admm.train_iteration(src);
  const long deg_sum = 1 + 2 + 1;
  CHECK(admm.transmitted() == deg_sum * admm.params_per_agent());

  // Cost scales exactly with the parameter count.
  consensus::Hyper wide = h;
  wide.hidden = 16;
  AdmmTrainer big(37, 6, codec, wide, CommGraph(3, {{0, 1}, {1, 2}}));
  big.train_iteration(src);
  const double count_ratio =
      static_cast<double>(big.params_per_agent()) / admm.params_per_agent();
  const double cost_ratio = static_cast<double>(big.transmitted()) / admm.transmitted();
  CHECK(cost_ratio == doctest::Approx(count_ratio));
}

TEST_CASE("communication report") {
  std::vector<consensus::HourMetrics> fast(10), slow(10);
  for (int i = 0; i < 10; ++i) {
    fast[i] = {i, -1.0, 0.0, 100LL * (i + 1), 0.0};
    slow[i] = {i, -1.0, 0.0, 1000LL * (i + 1), 0.0};
  }
  const auto a = comm_from_metrics("cmarl", fast);
  const auto b = comm_from_metrics("admm", slow);
  CHECK(a.scalars_per_hour == doctest::Approx(100.0));
  CHECK(b.scalars_per_hour == doctest::Approx(1000.0));

  const auto text1 = communication_report_text({a, b});
  const auto text2 = communication_report_text({a, b});
  CHECK(text1 == text2);
  CHECK(text1.find("cmarl / admm = 0.1") != std::string::npos);

  write_communication_report_csv("tmp_comm_report.csv", {a, b});
  std::ifstream in("tmp_comm_report.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "method,hours,transmitted_scalars,scalars_per_hour");
  in.close();
  std::remove("tmp_comm_report.csv");
}
