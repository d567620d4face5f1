#include "sipov/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "sipov/errors.hpp"

namespace sipov {

double compute_goodput(std::uint64_t completed, double window) {
  if (!(window > 0.0)) throw ParameterError("goodput window must be positive");
  return static_cast<double>(completed) / window;
}

std::optional<double> blocking_probability(std::uint64_t offered, std::uint64_t rejected_or_failed) {
  if (rejected_or_failed > offered) throw ParameterError("more blocked calls than offered");
  if (offered == 0) return std::nullopt;
  return static_cast<double>(rejected_or_failed) / static_cast<double>(offered);
}

DelaySummary summarize_delays(std::vector<double> delays) {
  DelaySummary s;
  s.count = delays.size();
  if (delays.empty()) return s;
  s.mean = std::accumulate(delays.begin(), delays.end(), 0.0) / static_cast<double>(delays.size());
  std::sort(delays.begin(), delays.end());
  // Nearest-rank percentile.
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(delays.size())));
  s.p95 = delays[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

double MetricsReport::goodput_between(double from, double to) const {
  if (!(to > from)) throw ParameterError("goodput interval must have to > from");
  std::uint64_t n = 0;
  for (const auto& c : calls) {
    if (c.outcome == CallOutcome::Success && c.end_t >= from && c.end_t < to) ++n;
  }
  return compute_goodput(n, to - from);
}

double MetricsReport::redundant_ratio() const {
  if (retransmissions == 0) return 0.0;
  return static_cast<double>(redundant_retransmissions) / static_cast<double>(retransmissions);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  if (v == std::floor(v) && std::fabs(v) < 1e15) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.9g", v);
  }
  return buf;
}

std::vector<std::pair<std::string, double>> MetricsReport::summary() const {
  std::vector<std::pair<std::string, double>> rows = {
      {"duration", duration},
      {"offered_calls", static_cast<double>(offered)},
      {"completed_calls", static_cast<double>(completed)},
      {"rejected_calls", static_cast<double>(rejected)},
      {"timed_out_calls", static_cast<double>(timed_out)},
      {"dropped_calls", static_cast<double>(dropped_calls)},
      {"goodput", overall_goodput()},
      {"blocking_probability", blocking ? *blocking : std::nan("")},
      {"retransmissions", static_cast<double>(retransmissions)},
      {"redundant_retransmissions", static_cast<double>(redundant_retransmissions)},
      {"nonredundant_retransmissions", static_cast<double>(nonredundant_retransmissions)},
      {"suppressed_retransmissions", static_cast<double>(suppressed_retransmissions)},
      {"redundant_responses", static_cast<double>(redundant_responses)},
      {"redundant_ratio", redundant_ratio()},
      {"messages_served", static_cast<double>(messages_served)},
      {"message_throughput", duration > 0 ? static_cast<double>(messages_served) / duration : 0.0},
      {"stale_messages", static_cast<double>(stale_messages)},
      {"protocol_errors", static_cast<double>(protocol_errors)},
      {"setup_delay_mean", setup_delay.mean},
      {"setup_delay_p95", setup_delay.p95},
  };
  return rows;
}

void write_series_csv(std::ostream& os, const std::vector<SeriesRow>& rows) {
  os << "t,server_id,q,q_r,rho,served_cum,rejected_cum,dropped_cum\n";
  for (const auto& r : rows) {
    os << format_number(r.t) << ',' << r.server_id << ',' << r.q << ',' << r.q_r << ','
       << format_number(r.rho) << ',' << r.served_cum << ',' << r.rejected_cum << ','
       << r.dropped_cum << '\n';
  }
}

void write_calls_csv(std::ostream& os, const std::vector<CallRow>& rows) {
  os << "call_id,start_t,end_t,outcome,setup_delay\n";
  for (const auto& r : rows) {
    os << r.call_id << ',' << format_number(r.start_t) << ',' << format_number(r.end_t) << ','
       << to_string(r.outcome) << ',' << (r.setup_delay ? format_number(*r.setup_delay) : "")
       << '\n';
  }
}

void write_summary_csv(std::ostream& os, const MetricsReport& report) {
  os << "metric,value\n";
  for (const auto& [k, v] : report.summary()) os << k << ',' << format_number(v) << '\n';
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + p.string() + " for writing");
  return f;
}

}  // namespace

void write_controller_csv(std::ostream& os, const std::vector<ControllerSample>& rows) {
  os << "t,node,variable,value\n";
  for (const auto& r : rows)
    os << format_number(r.t) << ',' << r.node << ',' << r.variable << ',' << format_number(r.value) << '\n';
}

void write_report(const std::filesystem::path& dir, const MetricsReport& report) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  {
    auto f = open_out(dir / "series.csv");
    write_series_csv(f, report.series);
  }
  {
    auto f = open_out(dir / "calls.csv");
    write_calls_csv(f, report.calls);
  }
  {
    auto f = open_out(dir / "summary.csv");
    write_summary_csv(f, report);
  }
  if (!report.controller_log.empty()) {
    auto f = open_out(dir / "controller.csv");
    write_controller_csv(f, report.controller_log);
  }
}

}  // namespace sipov
