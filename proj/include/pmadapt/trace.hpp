#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pmadapt {

/// One chain iteration as persisted to the trace CSV.
struct TraceRecord {
  std::int64_t iter = 0;
  Eigen::VectorXd theta;
  int n_particles = 0;
  double log_lik_est = 0.0;
  bool accepted = false;
  std::optional<double> recycled_log_lik;
  std::optional<double> sigma_hat;  ///< only on epoch-closing iterations
  bool epoch_end = false;           ///< sigma_hat may be absent on an invalid epoch
};

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void begin(std::size_t dim) { (void)dim; }
  virtual void write(const TraceRecord& record) = 0;
  virtual void flush() {}
};

class NullTraceSink final : public TraceSink {
 public:
  void write(const TraceRecord&) override {}
};

class MemoryTraceSink final : public TraceSink {
 public:
  void write(const TraceRecord& record) override { records.push_back(record); }
  std::vector<TraceRecord> records;
};

/// Writes the trace CSV:
///   iter,theta_0..theta_{d-1},n_particles,log_lik_est,accepted,recycled_loglik,sigma_hat
/// Doubles use the shortest round-trip representation; absent values are
/// empty fields; an invalid epoch writes "nan" in sigma_hat.
class CsvTraceSink final : public TraceSink {
 public:
  explicit CsvTraceSink(std::ostream& out);
  /// Opens (truncating) `path`; throws IoError on failure.
  explicit CsvTraceSink(const std::string& path);

  void begin(std::size_t dim) override;
  void write(const TraceRecord& record) override;
  void flush() override;

 private:
  void check();
  std::ofstream file_;
  std::ostream* out_;
  std::string label_;
};

/// Shortest decimal representation that parses back to the same double;
/// "inf", "-inf" and "nan" for non-finite values.
std::string format_double(double x);

}  // namespace pmadapt
