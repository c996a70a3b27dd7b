#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.h"

int main(int argc, char** argv) {
  using namespace amfsl::cli;

  CLI::App app{"Additive-margin prototypical few-shot learning"};
  app.require_subcommand(1);

  Options options;
  std::string config, out = ".", checkpoint;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "run config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--out", out, "output directory")->capture_default_str();
    cmd->add_flag("--json", options.json, "print the report as JSON");
  };

  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const Options&, std::ostream&);
    bool wants_checkpoint;
  };
  const Entry entries[] = {
      {"gen-data", "write a synthetic blob dataset", gen_data, false},
      {"train", "episodic training; writes checkpoint.json and train_log.csv", train, false},
      {"eval", "novel-class episode accuracy with 95% interval", eval, true},
      {"gfsl-eval", "generalized few-shot accuracy over a shot sweep", gfsl_eval, true},
      {"gradcheck", "finite-difference gradient check of the configured loss", gradcheck,
       false},
      {"oracle", "compare episode losses against the scalar oracle", oracle, false},
  };

  std::vector<std::pair<CLI::App*, const Entry*>> commands;
  for (const Entry& e : entries) {
    CLI::App* cmd = app.add_subcommand(e.name, e.help);
    add_common(cmd);
    if (e.wants_checkpoint) {
      cmd->add_option("--checkpoint", checkpoint, "trained checkpoint")
          ->check(CLI::ExistingFile);
    }
    commands.emplace_back(cmd, &e);
  }

  CLI11_PARSE(app, argc, argv);

  for (auto [cmd, entry] : commands) {
    if (!cmd->parsed()) continue;
    if (!config.empty()) options.config = config;
    if (cmd->count("--seed") > 0) options.seed = seed;
    if (!checkpoint.empty()) options.checkpoint = checkpoint;
    options.out = out;
    return guarded([&] { return entry->run(options, std::cout); }, std::cerr);
  }
  return kExitError;
}
