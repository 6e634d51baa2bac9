// Command-line front end: one subcommand per experiment family, JSON config
// files with CLI overrides, machine-readable errors on failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "seqlab/harness/config.hpp"
#include "seqlab/harness/experiments.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string scale;
  std::string out_dir;
  std::string family;
  long long seed = -1;
  long long seeds = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_option("--scale", flags.scale, "preset scale: smoke|desk|paper");
  cmd->add_option("--out", flags.out_dir, "output directory");
  cmd->add_option("--family", flags.family, "architecture family");
  cmd->add_option("--seed", flags.seed, "base seed");
  cmd->add_option("--seeds", flags.seeds, "number of seeds");
}

seqlab::harness::ExperimentConfig resolve_config(const std::string& experiment,
                                                 const CommonFlags& flags) {
  namespace harness = seqlab::harness;
  harness::ExperimentConfig config;
  if (!flags.config_path.empty()) {
    config = harness::load_config_file(flags.config_path, flags.scale);
    if (config.experiment != experiment) {
      throw std::invalid_argument("config file is for experiment '" + config.experiment +
                                  "' but the subcommand is '" + experiment + "'");
    }
  } else {
    config = harness::preset(experiment, flags.scale.empty() ? "desk" : flags.scale);
  }
  if (!flags.family.empty()) {
    config.family = flags.family;
    if (flags.config_path.empty() && flags.out_dir.empty()) {
      config.out_dir = "runs/" + experiment + "-" + config.family + "-" + config.scale;
    }
  }
  if (flags.seed >= 0) config.base_seed = static_cast<std::uint64_t>(flags.seed);
  if (flags.seeds > 0) config.seeds = static_cast<std::size_t>(flags.seeds);
  if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
  seqlab::harness::resolve(config);
  return config;
}

int fail_with_json(const std::string& type, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"]["type"] = type;
  j["error"]["message"] = message;
  std::cerr << j.dump(2) << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"teacher-student laboratory for length and compositional generalization"};
  app.require_subcommand(1);

  const std::vector<std::string> experiments = {"lengthgen", "compgen",  "failure",
                                                "cot",       "nonrealizable", "finite",
                                                "cover",     "lipschitz", "discrete"};
  std::vector<CommonFlags> flag_sets(experiments.size());
  std::vector<CLI::App*> cmds;
  for (std::size_t i = 0; i < experiments.size(); ++i) {
    CLI::App* cmd = app.add_subcommand(experiments[i], experiments[i] + " experiment");
    add_common(cmd, flag_sets[i]);
    cmds.push_back(cmd);
  }

  std::string plot_out = "plots";
  std::vector<std::string> plot_reports;
  CLI::App* plot = app.add_subcommand("plot", "re-render charts from report.json files");
  plot->add_option("reports", plot_reports, "report.json paths")->required();
  plot->add_option("--out", plot_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (plot->parsed()) {
      auto written = seqlab::harness::emit_plots(plot_reports, plot_out);
      for (const std::string& path : written) std::cout << path << "\n";
      return 0;
    }
    for (std::size_t i = 0; i < experiments.size(); ++i) {
      if (!cmds[i]->parsed()) continue;
      auto config = resolve_config(experiments[i], flag_sets[i]);
      auto outcome = seqlab::harness::run_experiment(config);
      std::cout << "wrote " << outcome.out_dir << " (config hash "
                << seqlab::harness::config_hash(config) << ")\n";
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    return fail_with_json("invalid_argument", e.what());
  } catch (const std::exception& e) {
    return fail_with_json("runtime_error", e.what());
  }
  return fail_with_json("usage", "no subcommand given");
}
