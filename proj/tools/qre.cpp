// Copyright 2026 The QRE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// qre: experiment runner. Every subcommand reads an optional TOML-style config
// file (section named after the subcommand), applies --key value overrides and
// writes its tables under <out>/<subcommand>-<config hash>/.

#include <iostream>

#include "CLI11.hpp"
#include "qre/harness.hpp"

namespace {

using namespace qre::harness;

void print_config(const std::string &command, const Json &cfg) {
  std::cout << "[" << command << "]\n";
  for (const auto &[k, v] : cfg.items()) std::cout << k << " = " << v.dump() << "\n";
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Adversarial robustness experiments for quantum classifiers"};
  app.set_version_flag("--version", std::string(QRE_VERSION));
  app.require_subcommand(1);

  Options opt;
  bool print_only = false;
  std::map<std::string, std::map<std::string, std::string>> values;
  for (const auto &schema : schemas()) {
    auto *sub = app.add_subcommand(schema.command, schema.summary);
    sub->add_option("-c,--config", opt.config_file, "TOML-style config file")->check(CLI::ExistingFile);
    sub->add_option("-o,--out", opt.out_root, "root directory for run outputs")->capture_default_str();
    sub->add_flag("--force", opt.force, "replace an existing run directory");
    sub->add_flag("--check", opt.check, "exit with status 4 when a built-in check fails");
    sub->add_flag("--print-config", print_only, "print the resolved config and exit");
    for (const auto &key : schema.keys) {
      const std::string def = key.fallback.is_string() ? key.fallback.get<std::string>() : key.fallback.dump();
      sub->add_option("--" + key.name, values[schema.command][key.name], key.help + " [" + def + "]");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  for (auto *sub : app.get_subcommands()) opt.command = sub->get_name();
  const auto *sub = app.get_subcommand(opt.command);
  for (const auto &[k, v] : values[opt.command]) {
    if (sub->count("--" + k) > 0) opt.overrides[k] = v;
  }

  if (print_only) {
    try {
      const RawConfig file = opt.config_file.empty() ? RawConfig{} : load_config_file(opt.config_file);
      const Json cfg = resolve_config(opt.command, file, opt.overrides);
      print_config(opt.command, cfg);
      std::cout << "# hash " << config_hash(opt.command, cfg) << "\n";
      return kOk;
    } catch (const qre::ConfigError &e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kConfigError;
    }
  }

  const auto outcome = execute(opt, std::cerr);
  if (outcome.code == kOk) {
    std::cout << outcome.dir.string() << "\n";
  } else {
    const char *kind = outcome.code == kConfigError      ? "config error"
                       : outcome.code == kNumericalError ? "numerical failure"
                       : outcome.code == kCheckFailed    ? "check failed"
                                                         : "error";
    std::cerr << "qre " << opt.command << ": " << kind << ": " << outcome.message << "\n";
    if (!outcome.dir.empty() && outcome.code == kCheckFailed) std::cout << outcome.dir.string() << "\n";
  }
  return outcome.code;
}
