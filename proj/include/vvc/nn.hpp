#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "vvc/rng.hpp"

namespace vvc::nn {

// Multilayer perceptron with tanh hidden layers and a linear output.
struct Mlp {
  std::vector<Eigen::MatrixXd> w;  // w[l]: (out x in)
  std::vector<Eigen::VectorXd> b;

  int layer_count() const { return static_cast<int>(w.size()); }
  int input_dim() const { return static_cast<int>(w.front().cols()); }
  int output_dim() const { return static_cast<int>(w.back().rows()); }
  long param_count() const;
};

// Uniform init in +-1/sqrt(fan_in) per layer.
Mlp make_mlp(const std::vector<int>& sizes, Rng& rng);

// Columns of x are samples. The trace keeps every activation for the
// reverse pass; acts[0] is the input, acts.back() the output.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> acts;
};

Eigen::MatrixXd mlp_forward(const Mlp& m, const Eigen::Ref<const Eigen::MatrixXd>& x,
                            ForwardTrace* trace = nullptr);

struct MlpGrads {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;

  explicit MlpGrads(const Mlp& shape_of);
  void set_zero();
  double squared_norm() const;
};

// Accumulates dLoss/dparams into `grads` given dLoss/doutput per sample.
void mlp_backward(const Mlp& m, const ForwardTrace& trace,
                  const Eigen::Ref<const Eigen::MatrixXd>& grad_out, MlpGrads& grads);

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState(const Mlp& shape_of, double lr);
};

void adam_step(Mlp& params, const MlpGrads& grads, AdamState& state);

// psi_bar <- rho * psi_bar + (1 - rho) * psi, elementwise.
void target_update(Mlp& psi_bar, const Mlp& psi, double rho);

// ---------------------------------------------------------------------------
// Policy heads over grouped discrete actions (one group per device).

enum class HeadKind { Ordinal, Softmax };

struct ActionSpace {
  std::vector<int> group_sizes;
  int groups() const { return static_cast<int>(group_sizes.size()); }
};

// Raw policy-net output width for the action space.
int head_dim(const ActionSpace& space, HeadKind kind);

struct JointPolicyDist {
  std::vector<Eigen::VectorXd> probs;  // one simplex vector per group
};

// Maps one sample's raw head outputs to per-group distributions. Ordinal
// groups with n actions use n-1 "advance" logits: with s_j = sigmoid(l_j),
// the unnormalized mass of action m is prod_{j<=m} s_j * prod_{j>m} (1-s_j).
JointPolicyDist head_probs(const Eigen::Ref<const Eigen::VectorXd>& head_out,
                           const ActionSpace& space, HeadKind kind);

// Vector-Jacobian product: dLoss/dprobs (per group) -> dLoss/dhead_out.
Eigen::VectorXd head_backward(const Eigen::Ref<const Eigen::VectorXd>& head_out,
                              const ActionSpace& space, HeadKind kind,
                              const JointPolicyDist& dist,
                              const std::vector<Eigen::VectorXd>& grad_probs);

inline constexpr double kProbFloor = 1e-12;

double log_prob(const JointPolicyDist& dist, const Eigen::Ref<const Eigen::VectorXi>& action);
double entropy(const JointPolicyDist& dist);
int sample_group(const JointPolicyDist& dist, int group, Rng& rng);

// Per-agent parameter triplet: value net, policy net, target value net.
struct AgentParams {
  Mlp psi;
  Mlp phi;
  Mlp psi_bar;
};

AgentParams make_agent(int feature_dim, int hidden, const ActionSpace& space, HeadKind kind,
                       Rng& rng);

// Checkpoints: versioned text dump with hexfloat values; exact round-trip.
void save_checkpoint(const std::string& path, const AgentParams& agent);
AgentParams load_checkpoint(const std::string& path);

}  // namespace vvc::nn
