#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "fd_check.hpp"
#include "vvc/nn.hpp"

using namespace vvc;
using namespace vvc::nn;

namespace {

// Straight-line re-evaluation with plain loops, independent of the Eigen
// expression path used in production.
double value_by_hand(const Mlp& m, const Eigen::VectorXd& x) {
  std::vector<double> h(x.data(), x.data() + x.size());
  for (int l = 0; l < m.layer_count(); ++l) {
    std::vector<double> z(m.w[l].rows(), 0.0);
    for (int i = 0; i < m.w[l].rows(); ++i) {
      double acc = m.b[l][i];
      for (int j = 0; j < m.w[l].cols(); ++j) acc += m.w[l](i, j) * h[j];
      z[i] = (l + 1 < m.layer_count()) ? std::tanh(acc) : acc;
    }
    h = z;
  }
  return h[0];
}

}  // namespace

TEST_CASE("value forward basics") {
  Rng rng(11);
  Mlp m = make_mlp({4, 8, 8, 1}, rng);

  SUBCASE("all-zero parameters give zero output") {
    for (auto& w : m.w) w.setZero();
    for (auto& b : m.b) b.setZero();
    Eigen::VectorXd x(4);
    x << 1.0, -2.0, 0.5, 3.0;
    CHECK(mlp_forward(m, x)(0, 0) == doctest::Approx(0.0));
  }

  SUBCASE("seeded init is reproducible") {
    Rng rng2(11);
    Mlp m2 = make_mlp({4, 8, 8, 1}, rng2);
    for (int l = 0; l < m.layer_count(); ++l) {
      CHECK(m.w[l] == m2.w[l]);
      CHECK(m.b[l] == m2.b[l]);
    }
  }

  SUBCASE("matches an independent re-evaluation") {
    Rng xr(5);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd x(4);
      for (int i = 0; i < 4; ++i) x[i] = xr.uniform(-2, 2);
      CHECK(mlp_forward(m, x)(0, 0) == doctest::Approx(value_by_hand(m, x)).epsilon(1e-12));
    }
  }

  SUBCASE("dimension mismatch is rejected") {
    Eigen::VectorXd x(3);
    x.setZero();
    CHECK_THROWS(mlp_forward(m, x));
  }
}

TEST_CASE("ordinal head produces ordered distributions") {
  ActionSpace space{{3}};
  CHECK(head_dim(space, HeadKind::Ordinal) == 2);

  SUBCASE("zero logits give the uniform distribution") {
    Eigen::VectorXd logits = Eigen::VectorXd::Zero(2);
    const auto dist = head_probs(logits, space, HeadKind::Ordinal);
    for (int a = 0; a < 3; ++a) CHECK(dist.probs[0][a] == doctest::Approx(1.0 / 3));
  }

  SUBCASE("strongly negative first advance concentrates on the lowest tap") {
    Eigen::VectorXd logits(2);
    logits << -25.0, 0.0;
    const auto dist = head_probs(logits, space, HeadKind::Ordinal);
    CHECK(dist.probs[0][0] > 0.999);
  }

  SUBCASE("distributions are simplex vectors with positive mass") {
    Rng rng(3);
    ActionSpace multi{{21, 21, 2}};
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::VectorXd out(head_dim(multi, HeadKind::Ordinal));
      for (int i = 0; i < out.size(); ++i) out[i] = rng.uniform(-6, 6);
      const auto dist = head_probs(out, multi, HeadKind::Ordinal);
      for (const auto& p : dist.probs) {
        CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(p.minCoeff() > 0.0);
      }
    }
  }

  SUBCASE("raising all advance logits never lowers the mean tap") {
    Rng rng(9);
    ActionSpace g21{{21}};
    for (int trial = 0; trial < 40; ++trial) {
      Eigen::VectorXd logits(20);
      for (int i = 0; i < 20; ++i) logits[i] = rng.uniform(-3, 3);
      const auto base = head_probs(logits, g21, HeadKind::Ordinal);
      double mean_base = 0.0;
      for (int a = 0; a < 21; ++a) mean_base += a * base.probs[0][a];
      for (double delta : {0.1, 0.5, 2.0}) {
        const auto shifted = head_probs(logits.array() + delta, g21, HeadKind::Ordinal);
        double mean_shifted = 0.0;
        for (int a = 0; a < 21; ++a) mean_shifted += a * shifted.probs[0][a];
        CHECK(mean_shifted >= mean_base - 1e-12);
      }
    }
  }
}

TEST_CASE("softmax head is a valid alternative") {
  ActionSpace space{{5, 2}};
  CHECK(head_dim(space, HeadKind::Softmax) == 7);
  Eigen::VectorXd out(7);
  out << 0.3, -1.0, 2.0, 0.0, 0.5, 3.0, -3.0;
  const auto dist = head_probs(out, space, HeadKind::Softmax);
  CHECK(dist.probs[0].sum() == doctest::Approx(1.0));
  CHECK(dist.probs[1].sum() == doctest::Approx(1.0));
  CHECK(dist.probs[0][2] > dist.probs[0][1]);
}

TEST_CASE("log-prob and entropy") {
  JointPolicyDist uniform21;
  uniform21.probs = {Eigen::VectorXd::Constant(21, 1.0 / 21)};
  Eigen::VectorXi a1(1);
  a1 << 7;
  CHECK(log_prob(uniform21, a1) == doctest::Approx(-std::log(21.0)));
  CHECK(entropy(uniform21) == doctest::Approx(std::log(21.0)));

  JointPolicyDist deterministic;
  Eigen::VectorXd point = Eigen::VectorXd::Zero(4);
  point[2] = 1.0;
  deterministic.probs = {point};
  Eigen::VectorXi a2(1);
  a2 << 2;
  CHECK(log_prob(deterministic, a2) == doctest::Approx(0.0));
  CHECK(entropy(deterministic) == doctest::Approx(0.0).epsilon(1e-9));

  JointPolicyDist both;
  both.probs = {uniform21.probs[0], point};
  Eigen::VectorXi a3(2);
  a3 << 7, 2;
  CHECK(log_prob(both, a3) ==
        doctest::Approx(log_prob(uniform21, a1) + log_prob(deterministic, a2)));
  CHECK(entropy(both) <= std::log(21.0) + std::log(4.0) + 1e-12);
}

TEST_CASE("backprop matches central finite differences") {
  Rng rng(21);
  for (int seed = 0; seed < 10; ++seed) {
    Rng init(100 + seed);
    Mlp m = make_mlp({3, 6, 6, 2}, init);
    Eigen::MatrixXd x(3, 4);
    for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
    Eigen::MatrixXd target(2, 4);
    for (int i = 0; i < target.size(); ++i) target.data()[i] = rng.uniform(-1, 1);

    // Loss: 0.5 * sum of squared errors against the fixed target.
    const auto loss = [&] { return 0.5 * (mlp_forward(m, x) - target).squaredNorm(); };
    ForwardTrace trace;
    const Eigen::MatrixXd y = mlp_forward(m, x, &trace);
    MlpGrads g(m);
    mlp_backward(m, trace, y - target, g);

    CHECK(vvc::testing::fd_relative_error(m, g, loss) < 1e-4);
  }
}

TEST_CASE("zero final layer blocks gradient flow to earlier layers") {
  Rng rng(31);
  Mlp m = make_mlp({3, 5, 5, 1}, rng);
  m.w.back().setZero();
  m.b.back().setZero();
  Eigen::MatrixXd x(3, 2);
  x << 0.3, -0.4, 0.9, 0.2, -1.0, 0.8;
  ForwardTrace trace;
  mlp_forward(m, x, &trace);
  MlpGrads g(m);
  mlp_backward(m, trace, Eigen::MatrixXd::Ones(1, 2), g);
  CHECK(g.w[0].cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(g.w[1].cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(g.w[2].cwiseAbs().maxCoeff() > 0.0);  // last layer still learns
}

TEST_CASE("adam update behavior") {
  Rng rng(41);
  Mlp m = make_mlp({2, 3, 1}, rng);
  const Mlp before = m;
  AdamState state(m, 1e-3);

  SUBCASE("zero gradient leaves parameters unchanged") {
    MlpGrads g(m);
    adam_step(m, g, state);
    for (int l = 0; l < m.layer_count(); ++l) CHECK(m.w[l] == before.w[l]);
  }

  SUBCASE("first step moves by about lr against the gradient sign") {
    MlpGrads g(m);
    g.w[0].setConstant(0.37);
    adam_step(m, g, state);
    const Eigen::MatrixXd delta = m.w[0] - before.w[0];
    for (int i = 0; i < delta.size(); ++i)
      CHECK(delta.data()[i] == doctest::Approx(-1e-3).epsilon(1e-4));
  }

  SUBCASE("repeated identical gradients move monotonically") {
    MlpGrads g(m);
    g.w[0].setConstant(-0.8);
    double prev = m.w[0](0, 0);
    for (int k = 0; k < 25; ++k) {
      adam_step(m, g, state);
      CHECK(m.w[0](0, 0) > prev);
      prev = m.w[0](0, 0);
    }
  }
}

TEST_CASE("target network smoothing") {
  Rng rng(51);
  Mlp psi = make_mlp({2, 3, 1}, rng);
  Mlp psi_bar = psi;

  SUBCASE("rho = 1 freezes the target") {
    Mlp moved = psi;
    moved.w[0].array() += 1.0;
    target_update(psi_bar, moved, 1.0);
    CHECK(psi_bar.w[0] == psi.w[0]);
  }

  SUBCASE("convex combination value") {
    for (auto& w : psi_bar.w) w.setZero();
    for (auto& b : psi_bar.b) b.setZero();
    Mlp ones = psi;
    for (auto& w : ones.w) w.setOnes();
    for (auto& b : ones.b) b.setOnes();
    target_update(psi_bar, ones, 0.99);
    CHECK(psi_bar.w[0](0, 0) == doctest::Approx(0.01));
  }

  SUBCASE("repeated updates converge geometrically to psi") {
    Mlp target = psi;
    for (auto& w : target.w) w.setZero();
    for (auto& b : target.b) b.setZero();
    for (int k = 0; k < 2000; ++k) target_update(target, psi, 0.99);
    CHECK((target.w[0] - psi.w[0]).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("agent parameters start with matching target") {
  Rng rng(61);
  ActionSpace space{{21, 2}};
  const auto agent = make_agent(10, 16, space, HeadKind::Ordinal, rng);
  CHECK(agent.psi.w[0] == agent.psi_bar.w[0]);
  CHECK(agent.phi.output_dim() == head_dim(space, HeadKind::Ordinal));
  CHECK(agent.psi.output_dim() == 1);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  Rng rng(71);
  ActionSpace space{{21, 21, 2}};
  auto agent = make_agent(13, 32, space, HeadKind::Ordinal, rng);
  agent.phi.w[0](0, 0) = 1.0 / 3.0;  // value with no short decimal form

  const std::string path = "tmp_checkpoint.txt";
  save_checkpoint(path, agent);
  const auto back = load_checkpoint(path);
  for (int l = 0; l < agent.psi.layer_count(); ++l) {
    CHECK(back.psi.w[l] == agent.psi.w[l]);
    CHECK(back.phi.w[l] == agent.phi.w[l]);
    CHECK(back.psi_bar.w[l] == agent.psi_bar.w[l]);
    CHECK(back.psi.b[l] == agent.psi.b[l]);
  }
  std::remove(path.c_str());

  CHECK_THROWS(load_checkpoint("no_such_checkpoint.txt"));
}

TEST_CASE("group sampling matches the distribution") {
  JointPolicyDist dist;
  Eigen::VectorXd p(3);
  p << 0.2, 0.5, 0.3;
  dist.probs = {p};
  Rng rng(81);
  Eigen::Vector3d counts = Eigen::Vector3d::Zero();
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) counts[sample_group(dist, 0, rng)] += 1.0;
  counts /= draws;
  for (int a = 0; a < 3; ++a) CHECK(counts[a] == doctest::Approx(p[a]).epsilon(0.03));
}
