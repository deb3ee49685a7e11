#include "vvc/replay.hpp"

#include <stdexcept>

namespace vvc::consensus {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
  data_.reserve(capacity);
}

void ReplayBuffer::push(env::Transition tr) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(tr));
  } else {
    data_[write_] = std::move(tr);  // FIFO eviction
    write_ = (write_ + 1) % capacity_;
  }
}

std::size_t ReplayBuffer::sample_index(Rng& rng) const {
  if (data_.empty()) throw std::runtime_error("sampling from an empty replay buffer");
  return static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(data_.size()) - 1));
}

ActionCodec ActionCodec::from_feeder(const feeder::FeederModel& f) {
  ActionCodec codec;
  codec.tap_min.resize(f.device_count());
  for (int d = 0; d < f.device_count(); ++d) {
    const auto& dev = f.devices[d];
    codec.space.group_sizes.push_back(dev.tap_max - dev.tap_min + 1);
    codec.tap_min[d] = dev.tap_min;
  }
  return codec;
}

ReplayBatchSource::ReplayBatchSource(const ReplayBuffer& buffer, const env::Environment& env,
                                     const ActionCodec& codec)
    : buffer_(buffer), env_(env), codec_(codec) {}

int ReplayBatchSource::feature_dim() const { return env_.feature_dim(); }

EncodedBatch ReplayBatchSource::sample(Rng& rng, int batch) const {
  if (batch < 1) throw std::invalid_argument("batch size must be positive");
  EncodedBatch out;
  const int dim = env_.feature_dim();
  const int groups = codec_.devices();
  out.s.resize(dim, batch);
  out.s_next.resize(dim, batch);
  out.actions.resize(groups, batch);
  out.rewards.resize(groups, batch);
  for (int k = 0; k < batch; ++k) {
    const auto& tr = buffer_.at(buffer_.sample_index(rng));
    out.s.col(k) = env_.encode(tr.state);
    out.s_next.col(k) = env_.encode(tr.next_state);
    for (int d = 0; d < groups; ++d)
      out.actions(d, k) = codec_.to_index(d, tr.action[d]);
    out.rewards.col(k) = tr.rewards;
  }
  return out;
}

VectorBatchSource::VectorBatchSource(std::vector<Sample> samples)
    : samples_(std::move(samples)) {
  if (samples_.empty()) throw std::invalid_argument("vector batch source needs samples");
}

int VectorBatchSource::feature_dim() const { return static_cast<int>(samples_[0].s.size()); }

EncodedBatch VectorBatchSource::sample(Rng& rng, int batch) const {
  EncodedBatch out;
  const int dim = feature_dim();
  const int groups = static_cast<int>(samples_[0].action_indices.size());
  const int agents = static_cast<int>(samples_[0].rewards.size());
  out.s.resize(dim, batch);
  out.s_next.resize(dim, batch);
  out.actions.resize(groups, batch);
  out.rewards.resize(agents, batch);
  for (int k = 0; k < batch; ++k) {
    const auto& smp = samples_[rng.uniform_int(0, static_cast<int>(samples_.size()) - 1)];
    out.s.col(k) = smp.s;
    out.s_next.col(k) = smp.s_next;
    out.actions.col(k) = smp.action_indices;
    out.rewards.col(k) = smp.rewards;
  }
  return out;
}

}  // namespace vvc::consensus
