#include "pmadapt/trace.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include "pmadapt/error.hpp"

namespace pmadapt {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

CsvTraceSink::CsvTraceSink(std::ostream& out) : out_(&out), label_("trace stream") {}

CsvTraceSink::CsvTraceSink(const std::string& path)
    : file_(path, std::ios::out | std::ios::trunc), out_(&file_), label_(path) {
  if (!file_) throw IoError("cannot open trace file " + path);
}

void CsvTraceSink::check() {
  if (!*out_) throw IoError("write failed on " + label_);
}

void CsvTraceSink::begin(std::size_t dim) {
  *out_ << "iter";
  for (std::size_t k = 0; k < dim; ++k) *out_ << ",theta_" << k;
  *out_ << ",n_particles,log_lik_est,accepted,recycled_loglik,sigma_hat\n";
  check();
}

void CsvTraceSink::write(const TraceRecord& r) {
  std::string line = std::to_string(r.iter);
  for (Eigen::Index k = 0; k < r.theta.size(); ++k) {
    line += ',';
    line += format_double(r.theta[k]);
  }
  line += ',';
  line += std::to_string(r.n_particles);
  line += ',';
  line += format_double(r.log_lik_est);
  line += r.accepted ? ",1," : ",0,";
  if (r.recycled_log_lik) line += format_double(*r.recycled_log_lik);
  line += ',';
  if (r.sigma_hat) {
    line += format_double(*r.sigma_hat);
  } else if (r.epoch_end) {
    line += "nan";
  }
  line += '\n';
  *out_ << line;
  check();
}

void CsvTraceSink::flush() {
  out_->flush();
  check();
}

}  // namespace pmadapt
