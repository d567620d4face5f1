#include "sipov/compare.hpp"

#include <cmath>
#include <numeric>

#include "sipov/errors.hpp"
#include "sipov/metrics.hpp"
#include "sipov/simulation.hpp"

namespace sipov {

double CompareRow::mean(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

namespace {

ScenarioConfig strip(ScenarioConfig c) {
  c.controller = {};
  c.balancer.reset();
  c.costs = {};
  c.seed = 0;
  c.out.clear();
  return c;
}

}  // namespace

void check_comparable(const std::vector<Variant>& variants) {
  if (variants.empty()) throw ConfigError("", "nothing to compare");
  const ScenarioConfig base = strip(variants.front().config);
  for (const auto& v : variants) {
    const ScenarioConfig c = strip(v.config);
    if (c.duration != base.duration) throw ConfigError("run.duration", v.label + " differs in duration");
    if (!(c.workload == base.workload)) {
      throw ConfigError("workload.segments", v.label + " differs in workload");
    }
    if (!(c == base)) {
      throw ConfigError("", v.label + " differs in more than controller/balancer settings");
    }
  }
}

CompareTable compare(const std::vector<Variant>& variants, int seeds) {
  if (seeds < 1) throw ParameterError("need at least one seed");
  check_comparable(variants);
  CompareTable table;
  const std::uint64_t base = variants.front().config.seed;
  for (int k = 0; k < seeds; ++k) table.seeds.push_back(base + static_cast<std::uint64_t>(k));
  for (const auto& v : variants) {
    CompareRow row;
    row.label = v.label;
    for (const auto seed : table.seeds) {
      ScenarioConfig cfg = v.config;
      cfg.seed = seed;
      const auto res = simulate(cfg);
      const auto& r = res.report;
      row.goodput.push_back(r.overall_goodput());
      row.blocking.push_back(r.blocking ? *r.blocking : std::nan(""));
      row.redundant_ratio.push_back(r.redundant_ratio());
      row.setup_delay.push_back(r.setup_delay.mean);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_compare_csv(std::ostream& os, const CompareTable& table) {
  os << "config";
  for (const char* m : {"goodput", "blocking", "redundant_ratio", "setup_delay"}) {
    for (const auto s : table.seeds) os << ',' << m << "_seed" << s;
    os << ',' << m << "_mean";
  }
  os << '\n';
  for (const auto& row : table.rows) {
    os << row.label;
    for (const auto* v : {&row.goodput, &row.blocking, &row.redundant_ratio, &row.setup_delay}) {
      for (double x : *v) os << ',' << format_number(x);
      os << ',' << format_number(CompareRow::mean(*v));
    }
    os << '\n';
  }
}

}  // namespace sipov
