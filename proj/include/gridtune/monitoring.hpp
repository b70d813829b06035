#pragma once

// Per-node data buffers fed by instrumentation probes, and the metric
// derivations node agents run over pulled samples.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "gridtune/error.hpp"
#include "gridtune/grid_model.hpp"

namespace gridtune {

enum class MetricKind { CpuBusy, MemPressure, ThreadWork, Heartbeat };

inline std::string_view to_string(MetricKind k) {
  switch (k) {
    case MetricKind::CpuBusy: return "CpuBusy";
    case MetricKind::MemPressure: return "MemPressure";
    case MetricKind::ThreadWork: return "ThreadWork";
    case MetricKind::Heartbeat: return "Heartbeat";
  }
  return "?";
}

// CpuBusy: busy processor-seconds over the sample interval.
// MemPressure: fraction of node memory claimed by resident jobs.
// ThreadWork: work-units done by one thread of one job over the interval.
// Heartbeat: always 1.
struct MetricSample {
  SimTime at = 0.0;
  std::string node_id;
  MetricKind kind = MetricKind::Heartbeat;
  double value = 0.0;
  std::string job_id;  // ThreadWork only
  int thread = -1;     // ThreadWork only

  bool operator==(const MetricSample&) const = default;
};

class DataBuffer {
 public:
  static constexpr std::size_t kDefaultCapacity = 4096;

  explicit DataBuffer(std::string node_id, std::size_t capacity = kDefaultCapacity)
      : node_id_(std::move(node_id)), capacity_(std::max<std::size_t>(1, capacity)) {}

  const std::string& node_id() const noexcept { return node_id_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return samples_.size(); }
  const std::deque<MetricSample>& samples() const noexcept { return samples_; }
  const std::vector<MetricSample>& drops() const noexcept { return drops_; }

  // A consumer sees only samples recorded after it registers.
  void register_consumer(const std::string& consumer) { cursors_.try_emplace(consumer, base_ + samples_.size()); }

  // Appends; returns the evicted sample when the buffer overflowed.
  std::optional<MetricSample> record_sample(MetricSample sample) {
    if (sample.node_id.empty()) sample.node_id = node_id_;
    if (sample.node_id != node_id_)
      throw Error(Errc::ValidationError, "sample for node '" + sample.node_id + "' in buffer of '" + node_id_ + "'");
    if (last_at_ && sample.at < *last_at_)
      throw Error(Errc::TimeRegression,
                  "sample at " + std::to_string(sample.at) + " after " + std::to_string(*last_at_));
    last_at_ = sample.at;
    samples_.push_back(std::move(sample));
    if (samples_.size() <= capacity_) return std::nullopt;
    MetricSample evicted = std::move(samples_.front());
    samples_.pop_front();
    ++base_;
    drops_.push_back(evicted);
    return evicted;
  }

  std::vector<MetricSample> pull(const std::string& consumer) {
    auto it = cursors_.find(consumer);
    if (it == cursors_.end()) throw Error(Errc::UnknownConsumer, "'" + consumer + "' on buffer '" + node_id_ + "'");
    const std::uint64_t end = base_ + samples_.size();
    const std::uint64_t from = std::max(it->second, base_);
    std::vector<MetricSample> out(samples_.begin() + static_cast<std::ptrdiff_t>(from - base_), samples_.end());
    it->second = end;
    return out;
  }

 private:
  std::string node_id_;
  std::size_t capacity_;
  std::deque<MetricSample> samples_;
  std::uint64_t base_ = 0;  // absolute index of samples_.front()
  std::map<std::string, std::uint64_t> cursors_;
  std::vector<MetricSample> drops_;
  std::optional<SimTime> last_at_;
};

// Sum of CpuBusy in (end - window, end] over window * processors, clamped to
// [0,1]. `end` defaults to the newest sample time; no samples gives 0.
inline double cpu_usage(std::span<const MetricSample> samples, double window, int processors,
                        std::optional<SimTime> end = std::nullopt) {
  if (!(window > 0.0)) throw Error(Errc::ValidationError, "window must be > 0");
  if (processors < 1) throw Error(Errc::ValidationError, "processors must be >= 1");
  if (samples.empty()) return 0.0;
  SimTime window_end = end.value_or(samples.front().at);
  if (!end)
    for (const auto& s : samples) window_end = std::max(window_end, s.at);
  double busy = 0.0;
  for (const auto& s : samples)
    if (s.kind == MetricKind::CpuBusy && s.at > window_end - window && s.at <= window_end) busy += s.value;
  return std::clamp(busy / (window * processors), 0.0, 1.0);
}

// (max - mean) / max, or 0 when every entry is 0.
inline double load_imbalance(std::span<const double> per_thread_work) {
  if (per_thread_work.empty()) throw Error(Errc::EmptyInput, "load_imbalance needs at least one value");
  double max = 0.0;
  for (double w : per_thread_work) {
    if (w < 0.0) throw Error(Errc::ValidationError, "negative per-thread work");
    max = std::max(max, w);
  }
  if (max <= 0.0) return 0.0;
  const double mean = std::accumulate(per_thread_work.begin(), per_thread_work.end(), 0.0) /
                      static_cast<double>(per_thread_work.size());
  return (max - mean) / max;
}

// Shortest round-trip decimal form; what we write we read back bit-identically.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(Errc::ParseError, "not a number: '" + std::string(s) + "'");
  return v;
}

inline std::string metric_kind_column(const MetricSample& s) {
  if (s.kind == MetricKind::ThreadWork) return "ThreadWork:" + s.job_id + ":" + std::to_string(s.thread);
  return std::string(to_string(s.kind));
}

inline constexpr std::string_view kMetricsCsvHeader = "time,node,kind,value";

inline void write_metrics_csv(std::ostream& out, std::span<const MetricSample> samples) {
  out << kMetricsCsvHeader << '\n';
  for (const auto& s : samples)
    out << format_double(s.at) << ',' << s.node_id << ',' << metric_kind_column(s) << ',' << format_double(s.value)
        << '\n';
}

inline std::vector<MetricSample> parse_metrics_csv(std::string_view text) {
  std::vector<MetricSample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line != kMetricsCsvHeader) throw ParseError(1, "expected header '" + std::string(kMetricsCsvHeader) + "'");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string col;
    while (std::getline(ls, col, ',')) cols.push_back(col);
    if (cols.size() != 4) throw ParseError(lineno, "expected 4 columns");
    MetricSample s;
    s.at = parse_double(cols[0]);
    s.node_id = cols[1];
    s.value = parse_double(cols[3]);
    const std::string& kind = cols[2];
    if (kind == "CpuBusy") {
      s.kind = MetricKind::CpuBusy;
    } else if (kind == "MemPressure") {
      s.kind = MetricKind::MemPressure;
    } else if (kind == "Heartbeat") {
      s.kind = MetricKind::Heartbeat;
    } else if (kind.rfind("ThreadWork:", 0) == 0) {
      const auto last = kind.rfind(':');
      if (last <= 10) throw ParseError(lineno, "malformed ThreadWork kind");
      s.kind = MetricKind::ThreadWork;
      s.job_id = kind.substr(11, last - 11);
      s.thread = std::stoi(kind.substr(last + 1));
    } else {
      throw ParseError(lineno, "unknown metric kind '" + kind + "'");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace gridtune
