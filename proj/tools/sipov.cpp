// Command-line front end: run a scenario, compare variants, or integrate
// the fluid model alone.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "sipov/compare.hpp"
#include "sipov/errors.hpp"
#include "sipov/fluid.hpp"
#include "sipov/scenario.hpp"
#include "sipov/simulation.hpp"

namespace fs = std::filesystem;
using namespace sipov;

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

int cmd_run(const std::string& file, std::optional<std::uint64_t> seed, std::optional<std::string> out) {
  ScenarioConfig cfg = load_scenario(file);
  if (seed) cfg.seed = *seed;
  const fs::path dir = out ? *out : cfg.out;
  const auto report = run_scenario(cfg, dir);
  for (const auto& [k, v] : report.summary()) std::cout << k << ' ' << format_number(v) << '\n';
  return 0;
}

int cmd_compare(const std::vector<std::string>& files, int seeds, const std::string& out) {
  std::vector<Variant> variants;
  for (const auto& f : files) variants.push_back({fs::path(f).stem().string(), load_scenario(f)});
  const auto table = compare(variants, seeds);
  write_compare_csv(std::cout, table);
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream f(fs::path(out) / "compare.csv", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (fs::path(out) / "compare.csv").string());
    write_compare_csv(f, table);
  }
  return 0;
}

int cmd_fluid(const std::string& file) {
  const ScenarioConfig cfg = load_scenario(file);
  write_fluid_csv(std::cout, run_fluid(cfg));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SIP overload simulator"};
  app.require_subcommand(1);

  std::string run_file;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::string> run_out;
  auto* run = app.add_subcommand("run", "simulate one scenario and write CSV reports");
  run->add_option("scenario", run_file)->required();
  run->add_option("--seed", run_seed);
  run->add_option("--out", run_out);

  std::vector<std::string> cmp_files;
  int cmp_seeds = 1;
  std::string cmp_out;
  auto* cmp = app.add_subcommand("compare", "paired comparison of scenario variants");
  cmp->add_option("scenarios", cmp_files)->required();
  cmp->add_option("--seeds", cmp_seeds)->check(CLI::PositiveNumber);
  cmp->add_option("--out", cmp_out);

  std::string fluid_file;
  auto* fluid = app.add_subcommand("fluid", "integrate the fluid model only");
  fluid->add_option("scenario", fluid_file)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) return cmd_run(run_file, run_seed, run_out);
    if (*cmp) return cmd_compare(cmp_files, cmp_seeds, cmp_out);
    return cmd_fluid(fluid_file);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}
