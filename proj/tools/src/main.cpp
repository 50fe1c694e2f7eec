#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "uot/error.hpp"
#include "uot/experiments.hpp"

namespace {

uot::ExperimentConfig resolve_config(const std::string& experiment, const std::string& path) {
  if (path.empty()) return uot::default_config(experiment);
  std::ifstream in(path);
  if (!in) throw uot::Error(uot::ErrorKind::Io, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  uot::Json j;
  try {
    j = uot::Json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw uot::Error(uot::ErrorKind::InvalidInput, path + ": not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw uot::Error(uot::ErrorKind::InvalidInput, path + ": config must be an object");
  if (!j.contains("experiment")) j["experiment"] = experiment;
  if (j["experiment"] != experiment) {
    throw uot::Error(uot::ErrorKind::InvalidInput,
                     path + ": config is for '" + j["experiment"].dump() + "', not '" + experiment + "'");
  }
  try {
    return uot::parse_config(j);
  } catch (const uot::Error& e) {
    throw uot::Error(e.kind(), path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropic unbalanced optimal transport experiments"};
  app.require_subcommand(1);
  std::string config_path;
  std::string output;
  std::vector<std::uint64_t> seed;
  for (const auto& name : uot::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "JSON config file (experiment defaults when omitted)");
    sub->add_option("--output", output, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "run only this seed (overrides seeds)")->expected(1);
  }
  CLI11_PARSE(app, argc, argv);

  const std::string experiment = app.get_subcommands().front()->get_name();
  try {
    uot::ExperimentConfig c = resolve_config(experiment, config_path);
    if (!output.empty()) c.output_dir = output;
    if (!seed.empty()) c.seeds = seed;
    const uot::Json summary = uot::run_experiment(c);
    std::cout << (c.output_dir / c.experiment / "summary.json").string() << '\n';
    if (experiment == "verify") {
      for (const auto& r : summary["checks"]) {
        std::cout << (r["passed"].get<bool>() ? "PASS " : "FAIL ") << r["name"].get<std::string>()
                  << " measured=" << r["measured"] << " tolerance=" << r["tolerance"] << '\n';
      }
      return summary["passed"].get<bool>() ? 0 : 1;
    }
    return 0;
  } catch (const uot::Error& e) {
    std::cerr << "uot: " << uot::to_string(e.kind()) << ": " << e.what() << '\n';
    return 2;
  }
}
