// lowrank-sysid: batch front end for low-rank identification experiments.
//
// Exit status: 0 ok, 1 numeric failure, 2 invalid configuration, 3 I/O error.
// Errors are reported on stderr as one JSON object.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lowrank/io.hpp"
#include "lowrank/scenario.hpp"

namespace {

using namespace lowrank;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<std::string> out;
  unsigned threads = 1;
};

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::config: return 2;
    case ErrorCode::io: return 3;
    default: return 1;
  }
}

int report(const Error& e) {
  json j{{"error", to_string(e.code())}, {"message", e.what()}};
  if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) j["fields"] = ce->issues();
  std::cerr << j.dump() << "\n";
  return exit_code(e.code());
}

ScenarioConfig resolve(ScenarioConfig c, const Overrides& o) {
  if (o.seed) c.master_seed = *o.seed;
  if (o.runs) {
    if (*o.runs < 1) throw ConfigError({"--runs: expected an integer >= 1"});
    c.runs = *o.runs;
  }
  if (o.out) c.output_dir = *o.out;
  return c;
}

void print_summary(const ScenarioConfig& c, const ScenarioArtifacts& a) {
  const McSummary& s = a.result.summary;
  std::cout << "scenario " << s.scenario_id << ": " << s.runs << " runs, " << s.failures << " failed"
            << (s.valid ? "" : " (summary invalid)") << "\n";
  for (const auto& p : s.params) {
    std::cout << "  " << p.name << "  median " << format_double(p.stats.median) << "  var "
              << format_double(p.stats.variance);
    if (p.true_value) std::cout << "  true " << format_double(*p.true_value);
    std::cout << "\n";
  }
  for (const auto& b : s.bode)
    std::cout << "  bode " << b.name << "  max_rel_err " << format_double(b.comparison.max_rel_err) << "\n";
  std::cout << "artifacts written to " << c.output_dir << "\n";
}

int run_config(const ScenarioConfig& c, unsigned threads) {
  const ScenarioArtifacts a = run_scenario(c, threads);
  write_artifacts(c, a);
  print_summary(c, a);
  return a.result.summary.valid ? 0 : 1;
}

int simulate_config(const ScenarioConfig& c) {
  const ScenarioData d = simulate_scenario(c, mix_seed(c.master_seed, 0));
  std::filesystem::create_directories(c.output_dir);
  const std::string path = (std::filesystem::path(c.output_dir) / "data.csv").string();
  if (d.u.n() > 0)
    write_text(path, series_csv({&d.y1, &d.y2, &d.u}));
  else
    write_text(path, series_csv({&d.y1, &d.y2}));
  write_text((std::filesystem::path(c.output_dir) / "config.echo.json").string(), dump(to_json(c)));
  std::cout << "wrote " << path << "\n";
  return 0;
}

int identify_config(const ScenarioConfig& c, const std::string& data_path) {
  const CsvTable t = read_csv(data_path);
  ScenarioData d{{t.column("y1"), "y1"}, {t.column("y2"), "y2"}, {}};
  if (c.kind == ScenarioKind::with_input) d.u = {t.column("u"), "u"};
  const ScenarioEstimate e = estimate_scenario(c, d);
  const json rep = estimation_report(c, e, "identify");
  std::filesystem::create_directories(c.output_dir);
  const std::string path = (std::filesystem::path(c.output_dir) / "estimate.json").string();
  write_text(path, dump(rep));
  std::cout << rep.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Identification of low-rank stationary processes through their deterministic feedback relation"};
  app.require_subcommand(1);

  Overrides ov;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", ov.seed, "Override master_seed");
    sub->add_option("--runs", ov.runs, "Override the number of Monte-Carlo runs");
    sub->add_option("--out", ov.out, "Override output_dir");
    sub->add_option("--threads", ov.threads, "Worker threads (0 = auto)");
  };

  std::string config_path;
  auto* run = app.add_subcommand("run", "Simulate, estimate and summarize a scenario");
  run->add_option("config", config_path, "Scenario JSON")->required();
  add_common(run);

  std::string preset_name;
  bool emit_config = false;
  auto* pre = app.add_subcommand("preset", "Run (or print) one of the built-in example scenarios");
  pre->add_option("name", preset_name, "example1, example2 or example3")->required();
  pre->add_flag("--emit-config", emit_config, "Print the resolved configuration instead of running it");
  add_common(pre);

  auto* sim = app.add_subcommand("simulate", "Write the data of run 0 to <output_dir>/data.csv");
  sim->add_option("config", config_path, "Scenario JSON")->required();
  add_common(sim);

  std::string data_path;
  auto* ident = app.add_subcommand("identify", "Estimate the scenario's models from a CSV data file");
  ident->add_option("config", config_path, "Scenario JSON")->required();
  ident->add_option("--data", data_path, "CSV with columns y1, y2 (and u for with_input)")->required();
  add_common(ident);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) return run_config(resolve(load_config(config_path), ov), ov.threads);
    if (*pre) {
      const ScenarioConfig c = resolve(preset(preset_name), ov);
      if (emit_config) {
        std::cout << dump(to_json(c));
        return 0;
      }
      return run_config(c, ov.threads);
    }
    if (*sim) return simulate_config(resolve(load_config(config_path), ov));
    if (*ident) return identify_config(resolve(load_config(config_path), ov), data_path);
  } catch (const Error& e) {
    return report(e);
  } catch (const std::filesystem::filesystem_error& e) {
    return report(Error(ErrorCode::io, e.what()));
  } catch (const std::exception& e) {
    return report(Error(ErrorCode::numeric, e.what()));
  }
  return 0;
}
