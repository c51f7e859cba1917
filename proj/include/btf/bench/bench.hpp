#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "btf/models/encoder.hpp"

namespace btf::bench {

struct ForwardMeasurement {
  std::string model;
  std::size_t seq_len = 0;
  std::size_t batch = 0;
  std::size_t cores = 0;
  double median_ms = 0.0;
  double p5_ms = 0.0;
  double p95_ms = 0.0;
  std::size_t peak_activation_bytes = 0;
  bool skipped = false;
  std::string note;
};

struct MeasureOptions {
  std::size_t repeats = 5;
  std::size_t warmup = 1;
  std::size_t lanes = 1;
  // Runs whose estimated activation footprint exceeds this are skipped.
  std::size_t memory_budget_bytes = std::size_t{2} << 30;
  std::uint64_t seed = 1;
};

// Random full-length sequences of N tokens (ids drawn inside each table,
// [BOS] first and [EOS] last).
models::EncoderInput synthetic_input(const models::EncoderConfig& config, std::size_t seq_len, std::size_t batch,
                                     std::uint64_t seed);

// Element-count estimates of the live set scaled by dtype width, per sequence:
// d N (2L+1) + 8 h N for the RNN (all layer outputs plus one layer's gates)
// and d N + J N^2 + 2 h N for the Transformer (one layer at a time).
std::size_t estimated_activation_bytes(const models::EncoderConfig& config, std::size_t seq_len, std::size_t batch,
                                       std::size_t dtype_bytes);

// Inference forward pass without a tape. Peak activation bytes are the peak
// live tensor bytes during the pass minus the live bytes before it (the
// parameters and the input embedding tables).
template <typename T>
ForwardMeasurement measure_forward(const models::Encoder<T>& encoder, std::size_t seq_len, std::size_t batch,
                                   const MeasureOptions& options);

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

// Least squares of log y on log x; needs at least 4 distinct positive points.
LogLogFit loglog_fit(std::span<const double> x, std::span<const double> y);

struct ScalingReport {
  std::string csv;
  std::vector<std::pair<std::string, LogLogFit>> memory_fits;  // per model
  std::vector<std::pair<std::string, LogLogFit>> time_fits;
};

// CSV header: model,N,batch,cores,median_ms,p5_ms,p95_ms,peak_activation_bytes
// Skipped runs appear as rows with empty measurements. Fits are per model over
// the non-skipped rows with cores equal to the smallest core count present.
ScalingReport scaling_report(std::span<const ForwardMeasurement> rows);

std::string fits_json(const ScalingReport& report);

}  // namespace btf::bench
