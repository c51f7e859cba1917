#include "btf/bench/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>

#include <json.hpp>

#include "btf/common/error.hpp"
#include "btf/common/format.hpp"
#include "btf/numeric/alloc.hpp"
#include "btf/numeric/parallel.hpp"

namespace btf::bench {

models::EncoderInput synthetic_input(const models::EncoderConfig& config, std::size_t seq_len, std::size_t batch,
                                     std::uint64_t seed) {
  if (seq_len < 3) throw InputError("bench: sequence length must be at least 3");
  if (batch == 0) throw InputError("bench: batch must be > 0");
  Rng rng = Rng::derive(seed, seq_len);
  models::EncoderInput in;
  in.batch = batch;
  in.stride = seq_len;
  const auto ordinary = [&](std::size_t table, std::size_t reserved) {
    return static_cast<int>(reserved + rng.below(table - reserved));
  };
  // Amount/date tables hold their control ids at the top; ordinary bins sit below.
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < seq_len; ++t) {
      const bool edge = t == 0 || t + 1 == seq_len;
      in.x_ids.push_back(edge ? (t == 0 ? 1 : 2) : ordinary(config.vx, 8));
      in.a_ids.push_back(static_cast<int>(rng.below(config.va - 5)));
      in.d_ids.push_back(static_cast<int>(rng.below(config.vd - 5)));
      in.t_ids.push_back(0);
      in.mask.push_back(true);
    }
    in.lengths.push_back(seq_len);
  }
  return in;
}

std::size_t estimated_activation_bytes(const models::EncoderConfig& c, std::size_t n, std::size_t batch,
                                       std::size_t dtype_bytes) {
  std::size_t elems = c.arch == models::Arch::rnn ? c.d * n * (2 * c.L + 1) + 8 * c.h * n
                                                  : c.d * n + c.J * n * n + 2 * c.h * n;
  return elems * batch * dtype_bytes;
}

namespace {

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(v.size() - 1, lo + 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

template <typename T>
ForwardMeasurement measure_forward(const models::Encoder<T>& encoder, std::size_t seq_len, std::size_t batch,
                                   const MeasureOptions& options) {
  ForwardMeasurement m;
  m.model = models::arch_name(encoder.config().arch);
  m.seq_len = seq_len;
  m.batch = batch;
  m.cores = options.lanes;
  if (options.repeats == 0) throw ConfigError("bench: repeats must be > 0");
  const auto estimate = estimated_activation_bytes(encoder.config(), seq_len, batch, sizeof(T));
  if (estimate > options.memory_budget_bytes) {
    m.skipped = true;
    m.note = "estimated " + std::to_string(estimate) + " activation bytes exceed the budget of " +
             std::to_string(options.memory_budget_bytes);
    return m;
  }
  const auto in = synthetic_input(encoder.config(), seq_len, batch, options.seed);
  numeric::NoGrad<T> no_grad;
  std::vector<double> times;
  std::size_t peak = 0;
  numeric::with_lanes(options.lanes, [&] {
    for (std::size_t r = 0; r < options.warmup + options.repeats; ++r) {
      const std::size_t base = numeric::alloc_stats().live;
      numeric::reset_peak();
      const auto t0 = std::chrono::steady_clock::now();
      {
        auto out = encoder.forward(in);
        (void)out;
      }
      const auto t1 = std::chrono::steady_clock::now();
      peak = std::max(peak, numeric::alloc_stats().peak - base);
      if (r >= options.warmup) times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
  });
  m.median_ms = percentile(times, 0.5);
  m.p5_ms = percentile(times, 0.05);
  m.p95_ms = percentile(times, 0.95);
  m.peak_activation_bytes = peak;
  return m;
}

LogLogFit loglog_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("loglog_fit: length mismatch");
  if (x.size() < 4) throw InputError("loglog_fit: at least 4 points are required, got " + std::to_string(x.size()));
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InputError("loglog_fit: values must be positive");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  std::vector<double> distinct(x.begin(), x.end());
  std::sort(distinct.begin(), distinct.end());
  if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 4) {
    throw InputError("loglog_fit: at least 4 distinct x values are required");
  }
  LogLogFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  f.points = lx.size();
  return f;
}

ScalingReport scaling_report(std::span<const ForwardMeasurement> rows) {
  ScalingReport rep;
  rep.csv = "model,N,batch,cores,median_ms,p5_ms,p95_ms,peak_activation_bytes\n";
  std::map<std::string, std::size_t> min_cores;
  for (const auto& r : rows) {
    char buf[256];
    if (r.skipped) {
      std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,,,,\n", r.model.c_str(), r.seq_len, r.batch, r.cores);
    } else {
      std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%.3f,%.3f,%.3f,%zu\n", r.model.c_str(), r.seq_len, r.batch,
                    r.cores, r.median_ms, r.p5_ms, r.p95_ms, r.peak_activation_bytes);
      auto [it, fresh] = min_cores.try_emplace(r.model, r.cores);
      if (!fresh) it->second = std::min(it->second, r.cores);
    }
    rep.csv += buf;
  }
  for (const auto& [model, cores] : min_cores) {
    std::vector<double> n, mem, ms;
    for (const auto& r : rows) {
      if (r.skipped || r.model != model || r.cores != cores) continue;
      n.push_back(static_cast<double>(r.seq_len));
      mem.push_back(static_cast<double>(r.peak_activation_bytes));
      ms.push_back(std::max(r.median_ms, 1e-6));
    }
    if (n.size() < 4) {
      throw InputError("scaling_report: model '" + model + "' has " + std::to_string(n.size()) +
                       " measured lengths, at least 4 are required");
    }
    rep.memory_fits.emplace_back(model, loglog_fit(n, mem));
    rep.time_fits.emplace_back(model, loglog_fit(n, ms));
  }
  return rep;
}

std::string fits_json(const ScalingReport& report) {
  nlohmann::ordered_json j;
  auto put = [](const std::vector<std::pair<std::string, LogLogFit>>& fits) {
    nlohmann::ordered_json o;
    for (const auto& [model, f] : fits) {
      o[model] = {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}, {"points", f.points}};
    }
    return o;
  };
  j["memory"] = put(report.memory_fits);
  j["time"] = put(report.time_fits);
  return j.dump(1) + "\n";
}

template ForwardMeasurement measure_forward(const models::Encoder<float>&, std::size_t, std::size_t,
                                            const MeasureOptions&);
template ForwardMeasurement measure_forward(const models::Encoder<double>&, std::size_t, std::size_t,
                                            const MeasureOptions&);

}  // namespace btf::bench
