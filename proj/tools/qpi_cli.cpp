#include "qpi/qpi.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <string>
#include <vector>

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kInfeasible = 3, kNumerical = 4 };

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  for (char c : text) {
    if (c == ',') {
      out.push_back(item);
      item.clear();
    } else if (c != ' ') {
      item += c;
    }
  }
  if (!item.empty() || !out.empty()) out.push_back(item);
  return out;
}

// "1,2,5-8" -> 1 2 5 6 7 8
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split(text)) {
    try {
      std::size_t used = 0;
      const auto dash = item.find('-', 1);
      if (dash == std::string::npos) {
        const long v = std::stol(item, &used);
        if (used != item.size() || v < 0) throw std::invalid_argument(item);
        seeds.push_back(static_cast<std::uint64_t>(v));
        continue;
      }
      const long lo = std::stol(item.substr(0, dash));
      const long hi = std::stol(item.substr(dash + 1), &used);
      if (used != item.size() - dash - 1 || lo < 0 || hi < lo) throw std::invalid_argument(item);
      for (long s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
    } catch (const std::logic_error&) {
      throw qpi::ConfigError("invalid seed '" + item + "'");
    }
  }
  return seeds;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  for (const auto& item : split(text)) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw qpi::ConfigError("invalid sweep value '" + item + "'");
    }
  }
  return values;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("qpi");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("QPI_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else spdlog::set_level(spdlog::level::info);
  if (level != "error" && level != "info" && level != "debug")
    spdlog::warn("unknown QPI_LOG level '{}', using info", level);
}

void log_report(const qpi::RunReport& r) {
  spdlog::debug("seed {}: {} ticks", r.seed, r.ticks);
  for (const auto& m : r.estimators) {
    spdlog::debug("  {} terminal |dm| {:.4f} kg, duty cycle {:.3f}", m.estimator, m.terminal_error(0),
                  m.duty_cycle);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Quadruped inertial parameter identification experiments"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir, seeds_text, values_text, param_text;
  std::uint64_t seed = 1;

  auto* run = app.add_subcommand("run", "Run one scenario with one seed");
  run->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--seed", seed, "Noise seed")->required();
  run->add_option("--out", out_dir, "Output directory")->required();

  auto* compare = app.add_subcommand("compare", "Run a scenario over several seeds");
  compare->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  compare->add_option("--seeds", seeds_text, "Seeds, e.g. 1,2,3 or 1-20")->required();
  compare->add_option("--out", out_dir, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Vary one setting over a list of values");
  sweep->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  sweep->add_option("--param", param_text, "noise-scale | forgetting | thresholds")
      ->required()
      ->check(CLI::IsMember({"noise-scale", "forgetting", "thresholds"}));
  sweep->add_option("--values", values_text, "Comma separated values")->required();
  sweep->add_option("--seed", seed, "Noise seed")->required();
  sweep->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    const qpi::ScenarioFile file = qpi::load_scenario(scenario_path);
    spdlog::info("scenario '{}': {} ticks at {} Hz", file.scenario.name, file.scenario.tick_count(),
                 file.scenario.tick_rate);

    if (run->parsed()) {
      const auto report = qpi::cmd_run(file, seed, out_dir);
      log_report(report);
      spdlog::info("wrote {}/trace.csv and report.txt", out_dir);
    } else if (compare->parsed()) {
      const auto seeds = parse_seeds(seeds_text);
      if (seeds.empty()) throw qpi::ConfigError("--seeds needs at least one seed");
      spdlog::info("running {} seeds", seeds.size());
      qpi::cmd_compare(file, seeds, out_dir);
      spdlog::info("wrote {}/compare.csv", out_dir);
    } else {
      const auto param = *qpi::sweep_parameter_from_string(param_text);
      const auto values = parse_values(values_text);
      if (values.empty()) throw qpi::ConfigError("--values needs at least one value");
      for (const auto& point : qpi::cmd_sweep(file, param, values, seed, out_dir)) {
        spdlog::debug("{} = {}", param_text, point.value);
        log_report(point.report);
      }
      spdlog::info("wrote {}/sweep.csv", out_dir);
    }
  } catch (const qpi::ConfigError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const qpi::DomainError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const qpi::SimulationError& e) {
    spdlog::error("{}", e.what());
    return kInfeasible;
  } catch (const qpi::NumericalError& e) {
    spdlog::error("{}", e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return kOk;
}
