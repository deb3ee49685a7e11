#pragma once

#include <string>
#include <vector>

#include "vvc/control_loop.hpp"

namespace vvc::metrics {

using consensus::HourMetrics;

inline constexpr const char* kMetricsHeader =
    "hour,mean_hourly_reward,mean_violations,transmitted_scalars_cumulative,wall_seconds";

// Streaming writer so long runs appear on disk as they go.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  ~MetricsWriter();
  void append(const HourMetrics& m);

 private:
  struct Impl;
  Impl* impl_;
};

std::vector<HourMetrics> read_metrics_csv(const std::string& path);

// Trailing moving average over `window` entries (shorter at the start).
std::vector<double> moving_average(const std::vector<double>& xs, int window);

// Pointwise median / min / max across runs of equal length.
struct Band {
  std::vector<double> median, lo, hi;
};
Band band_across_runs(const std::vector<std::vector<double>>& runs);

}  // namespace vvc::metrics
