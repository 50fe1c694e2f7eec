#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace uot {

struct TraceRecord {
  std::size_t iter = 0;
  double objective = 0.0;
  double grad_norm_2 = 0.0;
  double grad_norm_inf = 0.0;
  /// Step size (stochastic solvers) or smoothness estimate L_t (accelerated solvers).
  double step_or_L = 0.0;
  bool restart = false;
  double wall_clock_ms = 0.0;
};

/// Per-iteration solver telemetry. The clock starts at construction; with the
/// clock disabled wall_clock_ms is recorded as 0 so that CSV output is
/// byte-identical across reruns.
class Trace {
 public:
  static constexpr const char* kCsvHeader =
      "iter,objective,grad_norm_2,grad_norm_inf,step_or_L,restart_flag,wall_clock_ms";

  explicit Trace(bool record_clock = true);

  /// Appends a record, stamping wall_clock_ms. Iterations must not decrease.
  void add(std::size_t iter, double objective, double grad_norm_2, double grad_norm_inf,
           double step_or_L, bool restart);

  /// Appends a record as given (e.g. re-labelled copies of another trace).
  /// Iterations and clock values must not decrease.
  void append(const TraceRecord& record);

  const std::vector<TraceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const TraceRecord& back() const { return records_.back(); }
  double elapsed_ms() const;

  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;

 private:
  bool record_clock_;
  std::chrono::steady_clock::time_point start_;
  std::vector<TraceRecord> records_;
};

}  // namespace uot
