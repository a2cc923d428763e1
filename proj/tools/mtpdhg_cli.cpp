// Copyright 2026 The mtpdhg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// mtpdhg_cli <lp|svm|custom|selftest> [--config file] [--<key> value ...]

#include <CLI11.hpp>
#include <iostream>

#include "mtpdhg/mtpdhg.hpp"

namespace {

struct Command {
  CLI::App* app = nullptr;
  std::string config;
  std::map<std::string, std::string> flags;
};

Command add_command(CLI::App& root, const std::string& name, const std::string& help) {
  Command c;
  c.app = root.add_subcommand(name, help);
  return c;
}

void add_flags(Command& c) {
  c.app->add_option("--config", c.config, "flat key=value file; flags override it")->check(CLI::ExistingFile);
  for (const auto& key : mtpdhg::RunConfig::keys()) {
    std::string names = "--" + key;
    std::string dashed = key;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    if (dashed != key) names += ",--" + dashed;
    c.app->add_option_function<std::string>(
        names, [&c, key](const std::string& v) { c.flags[key] = v; }, "RunConfig." + key);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App root{"Multi-timescale primal-dual solver and experiment driver"};
  root.require_subcommand(1);
  std::vector<Command> commands;
  commands.reserve(4);
  commands.push_back(add_command(root, "lp", "random LP: MT-PDHG against the naive-delay PDHG baseline"));
  commands.push_back(add_command(root, "svm", "decentralized SVM through the network simulator"));
  commands.push_back(add_command(root, "custom", "problem read from a JSON file (problem_file)"));
  commands.push_back(add_command(root, "selftest", "quick end-to-end self checks"));
  for (auto& c : commands) add_flags(c);
  CLI11_PARSE(root, argc, argv);

  for (auto& c : commands) {
    if (!c.app->parsed()) continue;
    try {
      mtpdhg::RunConfig cfg;
      if (!c.config.empty()) cfg.apply(mtpdhg::load_key_value(c.config));
      cfg.apply(c.flags);
      cfg.experiment = c.app->get_name();
      cfg.validate();
      const mtpdhg::ExperimentOutput out = mtpdhg::run_experiment(cfg);
      mtpdhg::write_outputs(cfg.out, out);
      std::cout << out.summary.dump(2) << "\n";
      std::cout << (out.passed ? "ok" : "FAILED") << ": outputs in " << cfg.out << "\n";
      return out.passed ? 0 : 1;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }
  return 2;
}
