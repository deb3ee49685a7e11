#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "vvc/env.hpp"
#include "vvc/nn.hpp"
#include "vvc/rng.hpp"

namespace vvc::consensus {

// FIFO ring of transitions with uniform with-replacement sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(env::Transition tr);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const env::Transition& at(std::size_t i) const { return data_[i]; }
  std::size_t sample_index(Rng& rng) const;

 private:
  std::vector<env::Transition> data_;
  std::size_t capacity_;
  std::size_t write_ = 0;
};

// Tap positions <-> zero-based policy group indices.
struct ActionCodec {
  nn::ActionSpace space;
  Eigen::VectorXi tap_min;

  static ActionCodec from_feeder(const feeder::FeederModel& f);
  int to_index(int device, int tap) const { return tap - tap_min[device]; }
  int to_tap(int device, int index) const { return index + tap_min[device]; }
  int devices() const { return space.groups(); }
};

// Feature-level minibatch consumed by the trainers. Actions are group
// indices; rewards are unscaled dollars, one row per agent.
struct EncodedBatch {
  Eigen::MatrixXd s;        // feat_dim x B
  Eigen::MatrixXd s_next;   // feat_dim x B
  Eigen::MatrixXi actions;  // groups x B
  Eigen::MatrixXd rewards;  // agents x B
  int size() const { return static_cast<int>(s.cols()); }
};

class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual EncodedBatch sample(Rng& rng, int batch) const = 0;
  virtual int feature_dim() const = 0;
};

// Production source: raw transitions from the replay buffer, encoded with
// the environment's frozen normalization.
class ReplayBatchSource : public BatchSource {
 public:
  ReplayBatchSource(const ReplayBuffer& buffer, const env::Environment& env,
                    const ActionCodec& codec);
  EncodedBatch sample(Rng& rng, int batch) const override;
  int feature_dim() const override;

 private:
  const ReplayBuffer& buffer_;
  const env::Environment& env_;
  const ActionCodec& codec_;
};

// In-memory source for synthetic tasks (already feature-encoded).
class VectorBatchSource : public BatchSource {
 public:
  struct Sample {
    Eigen::VectorXd s;
    Eigen::VectorXi action_indices;
    Eigen::VectorXd rewards;
    Eigen::VectorXd s_next;
  };

  explicit VectorBatchSource(std::vector<Sample> samples);
  EncodedBatch sample(Rng& rng, int batch) const override;
  int feature_dim() const override;

 private:
  std::vector<Sample> samples_;
};

}  // namespace vvc::consensus
