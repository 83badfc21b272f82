#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "topicdiv/pipeline.hpp"
#include "topicdiv/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitStage = 2;

void print_report(const topicdiv::pipeline::RunReport& report) {
  for (const auto& s : report.stages) {
    std::printf("%-10s %-9s %.2fs\n", s.name.c_str(), s.status.c_str(), s.seconds);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"topicdiv: topical diversity measurement and treatment-effect estimation"};
  app.set_version_flag("--version", std::string(topicdiv::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  bool force = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string stage_name;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "pipeline config file")->required();
    cmd->add_flag("--force", force, "ignore the stage cache");
    cmd->add_option("--seed", seed, "override every stage seed");
    cmd->add_option("--jobs", jobs, "worker threads for parallel stages");
  };

  CLI::App* run = app.add_subcommand("run", "run the selected stages");
  add_common(run);
  CLI::App* stage = app.add_subcommand("stage", "run a single stage");
  add_common(stage);
  stage->add_option("name", stage_name, "stage name")->required();
  CLI::App* clean = app.add_subcommand("clean", "remove stage artifacts, cache and log");
  clean->add_option("--config", config_path, "pipeline config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    const topicdiv::pipeline::PipelineConfig cfg =
        topicdiv::pipeline::load_config(config_path);
    if (clean->parsed()) {
      topicdiv::pipeline::clean_outputs(cfg);
      return kExitOk;
    }
    topicdiv::pipeline::RunOptions options;
    options.force = force;
    options.seed = seed;
    options.jobs = jobs;
    if (stage->parsed()) options.stages = {stage_name};
    print_report(topicdiv::pipeline::run_pipeline(cfg, options));
    return kExitOk;
  } catch (const topicdiv::pipeline::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const topicdiv::pipeline::StageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitStage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitStage;
  }
}
