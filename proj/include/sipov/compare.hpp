#pragma once

// Paired comparison of scenario variants that differ only in their
// controller or balancer. Every variant runs on the same list of seeds.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "sipov/scenario.hpp"

namespace sipov {

struct CompareRow {
  std::string label;
  std::vector<double> goodput;  // per seed
  std::vector<double> blocking;
  std::vector<double> redundant_ratio;
  std::vector<double> setup_delay;

  static double mean(const std::vector<double>& v);
};

struct CompareTable {
  std::vector<std::uint64_t> seeds;
  std::vector<CompareRow> rows;
};

struct Variant {
  std::string label;
  ScenarioConfig config;
};

/// Throws ConfigError when two variants differ in anything but controller,
/// balancer, cost table, seed or output directory.
void check_comparable(const std::vector<Variant>& variants);

/// Runs every variant on seeds base, base+1, ..., where base is the first
/// variant's run.seed.
CompareTable compare(const std::vector<Variant>& variants, int seeds);

void write_compare_csv(std::ostream& os, const CompareTable& table);

}  // namespace sipov
