#pragma once

// Run metrics and the CSV report formats (series.csv, calls.csv, summary.csv).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "sipov/sip.hpp"

namespace sipov {

/// Completed calls per second of `window`.
double compute_goodput(std::uint64_t completed, double window);

/// rejected_or_failed / offered; empty when nothing was offered.
std::optional<double> blocking_probability(std::uint64_t offered, std::uint64_t rejected_or_failed);

struct SeriesRow {
  double t = 0.0;
  std::string server_id;
  std::uint64_t q = 0;
  std::uint64_t q_r = 0;
  double rho = 0.0;
  std::uint64_t served_cum = 0;
  std::uint64_t rejected_cum = 0;
  std::uint64_t dropped_cum = 0;
  std::uint64_t arrivals_cum = 0;  // not emitted; kept for conservation checks
};

struct CallRow {
  CallId call_id = 0;
  double start_t = 0.0;
  double end_t = 0.0;
  CallOutcome outcome = CallOutcome::Success;
  std::optional<double> setup_delay;
  std::string server;  // cluster member that handled the call, if any
};

struct ControllerSample {
  double t = 0.0;
  std::string node;
  std::string variable;
  double value = 0.0;
};

struct DelaySummary {
  double mean = 0.0;
  double p95 = 0.0;
  std::size_t count = 0;
};

DelaySummary summarize_delays(std::vector<double> delays);

struct MetricsReport {
  double duration = 0.0;
  double goodput_window = 1.0;  // seconds per goodput bin
  std::vector<double> goodput;  // completed calls/s per bin, binned by completion time
  std::uint64_t offered = 0;
  std::uint64_t completed = 0;
  std::uint64_t rejected = 0;
  std::uint64_t timed_out = 0;
  std::uint64_t dropped_calls = 0;
  std::optional<double> blocking;
  std::uint64_t retransmissions = 0;
  std::uint64_t redundant_retransmissions = 0;
  std::uint64_t nonredundant_retransmissions = 0;
  std::uint64_t suppressed_retransmissions = 0;
  std::uint64_t redundant_responses = 0;
  std::uint64_t messages_served = 0;
  std::uint64_t stale_messages = 0;
  std::uint64_t protocol_errors = 0;
  DelaySummary setup_delay;
  std::vector<SeriesRow> series;
  std::vector<CallRow> calls;
  std::vector<ControllerSample> controller_log;

  double overall_goodput() const { return compute_goodput(completed, duration); }
  /// Goodput counting only completions inside [from, to).
  double goodput_between(double from, double to) const;
  double redundant_ratio() const;

  std::vector<std::pair<std::string, double>> summary() const;
};

void write_series_csv(std::ostream& os, const std::vector<SeriesRow>& rows);
void write_calls_csv(std::ostream& os, const std::vector<CallRow>& rows);
void write_summary_csv(std::ostream& os, const MetricsReport& report);

void write_controller_csv(std::ostream& os, const std::vector<ControllerSample>& rows);

/// Writes series.csv, calls.csv and summary.csv into `dir`, plus
/// controller.csv when a controller logged anything.
void write_report(const std::filesystem::path& dir, const MetricsReport& report);

std::string format_number(double v);

}  // namespace sipov
