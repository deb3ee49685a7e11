#include "vvc/nn.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vvc::nn {

long Mlp::param_count() const {
  long total = 0;
  for (int l = 0; l < layer_count(); ++l) total += w[l].size() + b[l].size();
  return total;
}

Mlp make_mlp(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("mlp needs at least two layer sizes");
  Mlp m;
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Eigen::MatrixXd w(out, in);
    Eigen::VectorXd b(out);
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) w(i, j) = rng.uniform(-bound, bound);
    for (int i = 0; i < out; ++i) b[i] = rng.uniform(-bound, bound);
    m.w.push_back(std::move(w));
    m.b.push_back(std::move(b));
  }
  return m;
}

Eigen::MatrixXd mlp_forward(const Mlp& m, const Eigen::Ref<const Eigen::MatrixXd>& x,
                            ForwardTrace* trace) {
  if (x.rows() != m.input_dim()) throw std::invalid_argument("mlp input dimension mismatch");
  if (trace) {
    trace->acts.clear();
    trace->acts.push_back(x);
  }
  Eigen::MatrixXd h = x;
  for (int l = 0; l < m.layer_count(); ++l) {
    Eigen::MatrixXd z = (m.w[l] * h).colwise() + m.b[l];
    h = (l + 1 < m.layer_count()) ? z.array().tanh().matrix() : std::move(z);
    if (trace) trace->acts.push_back(h);
  }
  return h;
}

MlpGrads::MlpGrads(const Mlp& shape_of) {
  for (int l = 0; l < shape_of.layer_count(); ++l) {
    w.emplace_back(Eigen::MatrixXd::Zero(shape_of.w[l].rows(), shape_of.w[l].cols()));
    b.emplace_back(Eigen::VectorXd::Zero(shape_of.b[l].size()));
  }
}

void MlpGrads::set_zero() {
  for (auto& g : w) g.setZero();
  for (auto& g : b) g.setZero();
}

double MlpGrads::squared_norm() const {
  double total = 0.0;
  for (const auto& g : w) total += g.squaredNorm();
  for (const auto& g : b) total += g.squaredNorm();
  return total;
}

void mlp_backward(const Mlp& m, const ForwardTrace& trace,
                  const Eigen::Ref<const Eigen::MatrixXd>& grad_out, MlpGrads& grads) {
  const int layers = m.layer_count();
  if (static_cast<int>(trace.acts.size()) != layers + 1)
    throw std::invalid_argument("forward trace does not match the network");

  Eigen::MatrixXd delta = grad_out;  // dLoss/dz for the current layer
  for (int l = layers - 1; l >= 0; --l) {
    if (l + 1 < layers) {
      // Peel the tanh: acts[l+1] = tanh(z).
      delta = delta.cwiseProduct(
          (1.0 - trace.acts[l + 1].array().square()).matrix());
    }
    grads.w[l].noalias() += delta * trace.acts[l].transpose();
    grads.b[l] += delta.rowwise().sum();
    if (l > 0) delta = (m.w[l].transpose() * delta).eval();
  }
}

AdamState::AdamState(const Mlp& shape_of, double lr) : lr(lr) {
  for (int l = 0; l < shape_of.layer_count(); ++l) {
    mw.emplace_back(Eigen::MatrixXd::Zero(shape_of.w[l].rows(), shape_of.w[l].cols()));
    vw.emplace_back(Eigen::MatrixXd::Zero(shape_of.w[l].rows(), shape_of.w[l].cols()));
    mb.emplace_back(Eigen::VectorXd::Zero(shape_of.b[l].size()));
    vb.emplace_back(Eigen::VectorXd::Zero(shape_of.b[l].size()));
  }
}

void adam_step(Mlp& params, const MlpGrads& grads, AdamState& s) {
  ++s.step;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (int l = 0; l < params.layer_count(); ++l) {
    s.mw[l] = s.beta1 * s.mw[l] + (1.0 - s.beta1) * grads.w[l];
    s.vw[l] = s.beta2 * s.vw[l].array() + (1.0 - s.beta2) * grads.w[l].array().square();
    params.w[l].array() -=
        s.lr * (s.mw[l].array() / bc1) / ((s.vw[l].array() / bc2).sqrt() + s.eps);

    s.mb[l] = s.beta1 * s.mb[l] + (1.0 - s.beta1) * grads.b[l];
    s.vb[l] = s.beta2 * s.vb[l].array() + (1.0 - s.beta2) * grads.b[l].array().square();
    params.b[l].array() -=
        s.lr * (s.mb[l].array() / bc1) / ((s.vb[l].array() / bc2).sqrt() + s.eps);
  }
}

void target_update(Mlp& psi_bar, const Mlp& psi, double rho) {
  for (int l = 0; l < psi.layer_count(); ++l) {
    psi_bar.w[l] = rho * psi_bar.w[l] + (1.0 - rho) * psi.w[l];
    psi_bar.b[l] = rho * psi_bar.b[l] + (1.0 - rho) * psi.b[l];
  }
}

// ---------------------------------------------------------------------------

int head_dim(const ActionSpace& space, HeadKind kind) {
  int dim = 0;
  for (int n : space.group_sizes) dim += (kind == HeadKind::Ordinal) ? n - 1 : n;
  return dim;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Ordinal cumulative-advance distribution over n actions from n-1 logits.
Eigen::VectorXd ordinal_probs(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  const int n = static_cast<int>(logits.size()) + 1;
  Eigen::VectorXd s(n - 1);
  for (int j = 0; j < n - 1; ++j) s[j] = sigmoid(logits[j]);
  Eigen::VectorXd u(n);
  for (int m = 0; m < n; ++m) {
    double mass = 1.0;
    for (int j = 0; j < n - 1; ++j) mass *= (j < m) ? s[j] : (1.0 - s[j]);
    u[m] = mass;
  }
  const double total = u.sum();
  return u / total;
}

// VJP through the ordinal head. With c_{mj} = (1-s_j) for j < m and -s_j
// otherwise, dp_m/dl_j = p_m (c_{mj} - sum_k p_k c_{kj}).
Eigen::VectorXd ordinal_vjp(const Eigen::Ref<const Eigen::VectorXd>& logits,
                            const Eigen::Ref<const Eigen::VectorXd>& probs,
                            const Eigen::Ref<const Eigen::VectorXd>& grad_probs) {
  const int n = static_cast<int>(probs.size());
  Eigen::VectorXd s(n - 1);
  for (int j = 0; j < n - 1; ++j) s[j] = sigmoid(logits[j]);
  Eigen::VectorXd out(n - 1);
  for (int j = 0; j < n - 1; ++j) {
    double mean_c = 0.0;
    for (int k = 0; k < n; ++k) mean_c += probs[k] * ((j < k) ? 1.0 - s[j] : -s[j]);
    double g = 0.0;
    for (int m = 0; m < n; ++m) {
      const double c = (j < m) ? 1.0 - s[j] : -s[j];
      g += grad_probs[m] * probs[m] * (c - mean_c);
    }
    out[j] = g;
  }
  return out;
}

Eigen::VectorXd softmax_probs(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  const Eigen::ArrayXd shifted = logits.array() - logits.maxCoeff();
  Eigen::ArrayXd e = shifted.exp();
  return (e / e.sum()).matrix();
}

Eigen::VectorXd softmax_vjp(const Eigen::Ref<const Eigen::VectorXd>& probs,
                            const Eigen::Ref<const Eigen::VectorXd>& grad_probs) {
  const double dot = grad_probs.dot(probs);
  return (probs.array() * (grad_probs.array() - dot)).matrix();
}

}  // namespace

JointPolicyDist head_probs(const Eigen::Ref<const Eigen::VectorXd>& head_out,
                           const ActionSpace& space, HeadKind kind) {
  if (head_out.size() != head_dim(space, kind))
    throw std::invalid_argument("policy head width mismatch");
  JointPolicyDist dist;
  int offset = 0;
  for (int n : space.group_sizes) {
    const int width = (kind == HeadKind::Ordinal) ? n - 1 : n;
    const auto slice = head_out.segment(offset, width);
    dist.probs.push_back(kind == HeadKind::Ordinal ? ordinal_probs(slice)
                                                   : softmax_probs(slice));
    offset += width;
  }
  return dist;
}

Eigen::VectorXd head_backward(const Eigen::Ref<const Eigen::VectorXd>& head_out,
                              const ActionSpace& space, HeadKind kind,
                              const JointPolicyDist& dist,
                              const std::vector<Eigen::VectorXd>& grad_probs) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(head_out.size());
  int offset = 0;
  for (int g = 0; g < space.groups(); ++g) {
    const int n = space.group_sizes[g];
    const int width = (kind == HeadKind::Ordinal) ? n - 1 : n;
    if (grad_probs[g].size() > 0) {
      out.segment(offset, width) =
          kind == HeadKind::Ordinal
              ? ordinal_vjp(head_out.segment(offset, width), dist.probs[g], grad_probs[g])
              : softmax_vjp(dist.probs[g], grad_probs[g]);
    }
    offset += width;
  }
  return out;
}

double log_prob(const JointPolicyDist& dist, const Eigen::Ref<const Eigen::VectorXi>& action) {
  double total = 0.0;
  for (size_t g = 0; g < dist.probs.size(); ++g) {
    const int a = action[static_cast<int>(g)];
    if (a < 0 || a >= dist.probs[g].size())
      throw std::out_of_range("action outside its group range");
    total += std::log(std::max(dist.probs[g][a], kProbFloor));
  }
  return total;
}

double entropy(const JointPolicyDist& dist) {
  double total = 0.0;
  for (const auto& p : dist.probs)
    for (int a = 0; a < p.size(); ++a)
      total -= p[a] * std::log(std::max(p[a], kProbFloor));
  return total;
}

int sample_group(const JointPolicyDist& dist, int group, Rng& rng) {
  const auto& p = dist.probs[group];
  const double u = rng.uniform();
  double acc = 0.0;
  for (int a = 0; a < p.size(); ++a) {
    acc += p[a];
    if (u < acc) return a;
  }
  return static_cast<int>(p.size()) - 1;
}

AgentParams make_agent(int feature_dim, int hidden, const ActionSpace& space, HeadKind kind,
                       Rng& rng) {
  AgentParams agent;
  agent.psi = make_mlp({feature_dim, hidden, hidden, 1}, rng);
  agent.phi = make_mlp({feature_dim, hidden, hidden, head_dim(space, kind)}, rng);
  agent.psi_bar = agent.psi;
  return agent;
}

// ---------------------------------------------------------------------------

namespace {

void write_mlp(std::ostream& out, const Mlp& m) {
  out << "layers " << m.layer_count() << '\n';
  for (int l = 0; l < m.layer_count(); ++l) {
    out << m.w[l].rows() << ' ' << m.w[l].cols() << '\n';
    for (int i = 0; i < m.w[l].rows(); ++i) {
      for (int j = 0; j < m.w[l].cols(); ++j) out << m.w[l](i, j) << ' ';
      out << '\n';
    }
    for (int i = 0; i < m.b[l].size(); ++i) out << m.b[l][i] << ' ';
    out << '\n';
  }
}

// istream extraction does not parse hexfloat reliably, so values are read
// as tokens and handed to strtod.
double read_value(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw std::runtime_error("corrupt checkpoint: truncated values");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str()) throw std::runtime_error("corrupt checkpoint: bad value " + tok);
  return v;
}

Mlp read_mlp(std::istream& in) {
  std::string tag;
  int layers = 0;
  if (!(in >> tag >> layers) || tag != "layers")
    throw std::runtime_error("corrupt checkpoint: missing layer header");
  Mlp m;
  for (int l = 0; l < layers; ++l) {
    int rows = 0, cols = 0;
    if (!(in >> rows >> cols)) throw std::runtime_error("corrupt checkpoint: layer shape");
    Eigen::MatrixXd w(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) w(i, j) = read_value(in);
    Eigen::VectorXd b(rows);
    for (int i = 0; i < rows; ++i) b[i] = read_value(in);
    m.w.push_back(std::move(w));
    m.b.push_back(std::move(b));
  }
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const AgentParams& agent) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << "vvc-checkpoint 1\n" << std::hexfloat;
  write_mlp(out, agent.psi);
  write_mlp(out, agent.phi);
  write_mlp(out, agent.psi_bar);
}

AgentParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "vvc-checkpoint" || version != 1)
    throw std::runtime_error("unrecognized checkpoint format in " + path);
  AgentParams agent;
  agent.psi = read_mlp(in);
  agent.phi = read_mlp(in);
  agent.psi_bar = read_mlp(in);
  return agent;
}

}  // namespace vvc::nn
