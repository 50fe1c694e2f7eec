#include "uot/trace.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>

#include "uot/error.hpp"

namespace uot {

Trace::Trace(bool record_clock)
    : record_clock_(record_clock), start_(std::chrono::steady_clock::now()) {}

double Trace::elapsed_ms() const {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
      .count();
}

void Trace::add(std::size_t iter, double objective, double grad_norm_2, double grad_norm_inf,
                double step_or_L, bool restart) {
  if (!records_.empty() && iter < records_.back().iter) {
    throw_invalid("trace iterations must be nondecreasing");
  }
  double clock = record_clock_ ? elapsed_ms() : 0.0;
  if (!records_.empty() && clock < records_.back().wall_clock_ms) clock = records_.back().wall_clock_ms;
  records_.push_back({iter, objective, grad_norm_2, grad_norm_inf, step_or_L, restart, clock});
}

void Trace::append(const TraceRecord& record) {
  if (!records_.empty() && (record.iter < records_.back().iter ||
                            record.wall_clock_ms < records_.back().wall_clock_ms)) {
    throw_invalid("trace iterations and clock must be nondecreasing");
  }
  records_.push_back(record);
}

void Trace::write_csv(std::ostream& out) const {
  out << kCsvHeader << '\n';
  out << std::setprecision(17);
  for (const auto& r : records_) {
    out << r.iter << ',' << r.objective << ',' << r.grad_norm_2 << ',' << r.grad_norm_inf << ','
        << r.step_or_L << ',' << (r.restart ? 1 : 0) << ',' << std::setprecision(6)
        << r.wall_clock_ms << std::setprecision(17) << '\n';
  }
}

void Trace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, path.string() + ": cannot open for writing");
  write_csv(out);
  if (!out) throw Error(ErrorKind::Io, path.string() + ": write failed");
}

}  // namespace uot
