/*
 * Copyright 2026 The IAMs Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line front end over the C API.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "iams/iams.h"
#include "json.hpp"

namespace {

struct Flags {
  std::string model;
  std::string manifest;
  std::string out = "out";
  std::string scorer;
  std::optional<double> lambda;
  std::string grid;
  std::optional<int> max_order;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  bool list = false;
};

int Report(iams_status status) {
  nlohmann::json err = {{"error",
                         {{"code", iams_status_name(status)},
                          {"status", static_cast<int>(status)},
                          {"message", iams_last_error()}}}};
  std::cerr << err.dump() << "\n";
  return static_cast<int>(status);
}

int UsageError(const std::string& message) {
  nlohmann::json err = {{"error",
                         {{"code", "invalid_argument"},
                          {"status", static_cast<int>(IAMS_ERR_INVALID_ARGUMENT)},
                          {"message", message}}}};
  std::cerr << err.dump() << "\n";
  return static_cast<int>(IAMS_ERR_INVALID_ARGUMENT);
}

void Emit(char* text) {
  std::cout << text << "\n";
  iams_string_free(text);
}

int ModelOnly(const std::string& command, const Flags& f) {
  iams_model* model = nullptr;
  if (auto s = iams_model_load(f.model.c_str(), &model); s != IAMS_OK) return Report(s);
  iams_status s = IAMS_OK;
  char* text = nullptr;
  if (command == "validate") {
    s = iams_model_describe(model, &text);
    if (s == IAMS_OK) Emit(text);
  } else {
    std::uint64_t count = 0;
    s = iams_model_subprompt_count(model, &count);
    if (s == IAMS_OK) {
      std::cout << count << "\n";
      if (f.list) {
        s = iams_model_list_subprompts(model, &text);
        if (s == IAMS_OK) {
          std::cout << text;
          iams_string_free(text);
        }
      }
    }
  }
  iams_model_free(model);
  return s == IAMS_OK ? 0 : Report(s);
}

int WithManifest(const std::string& command, const Flags& f) {
  iams_run* run = nullptr;
  if (auto s = iams_run_open(f.manifest.c_str(), f.out.c_str(), &run); s != IAMS_OK) {
    return Report(s);
  }
  std::vector<std::pair<const char*, std::string>> options;
  if (!f.model.empty()) options.emplace_back("model", f.model);
  if (!f.scorer.empty()) options.emplace_back("scorer", f.scorer);
  if (f.lambda) options.emplace_back("lambda", std::to_string(*f.lambda));
  if (!f.grid.empty()) options.emplace_back("grid", f.grid);
  if (f.max_order) options.emplace_back("max_order", std::to_string(*f.max_order));
  if (f.alpha) options.emplace_back("alpha", std::to_string(*f.alpha));
  if (f.seed) options.emplace_back("seed", std::to_string(*f.seed));
  iams_status s = IAMS_OK;
  for (const auto& [name, value] : options) {
    s = iams_run_set_option(run, name, value.c_str());
    if (s != IAMS_OK) break;
  }
  char* text = nullptr;
  if (s == IAMS_OK) s = iams_run_execute(run, command.c_str(), &text);
  iams_run_free(run);
  if (s != IAMS_OK) return Report(s);
  if (command == "enumerate") {
    std::cout << nlohmann::json::parse(text).at("count").get<std::uint64_t>() << "\n";
    iams_string_free(text);
  } else {
    Emit(text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompt-component attribution pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(iams_version()));
  Flags f;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"validate", "Check a prompt-model file or a run manifest"},
      {"enumerate", "Count (and optionally list) every subprompt"},
      {"score", "Score every subprompt into scores.jsonl"},
      {"design", "Export the design matrix"},
      {"fit", "Fit the manifest's regression into fit.json"},
      {"path", "Fit a lasso path into lasso_path.csv"},
      {"select", "Hierarchical forward selection"},
      {"shapley", "Stratum-aware Shapley attribution"},
      {"report", "Write the report bundle"},
      {"run", "Run every stage in order"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--model", f.model, "Prompt-model file");
    sub->add_option("--manifest", f.manifest, "Run manifest");
    sub->add_option("--out", f.out, "Output directory")->capture_default_str();
    sub->add_option("--scorer", f.scorer, "Scorer override")
        ->check(CLI::IsMember({"endpoint", "synthetic", "replay"}));
    sub->add_option("--lambda", f.lambda, "Penalty override");
    sub->add_option("--grid", f.grid, "Lambda grid lo:hi:step");
    sub->add_option("--max-order", f.max_order, "Highest interaction order");
    sub->add_option("--alpha", f.alpha, "Selection significance level");
    sub->add_option("--seed", f.seed, "Seed override");
    if (name == "enumerate") sub->add_flag("--list", f.list, "Print every subprompt key");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return UsageError(e.what());
  }

  const std::string command = app.get_subcommands().front()->get_name();
  if (f.manifest.empty()) {
    if ((command == "validate" || command == "enumerate") && !f.model.empty()) {
      return ModelOnly(command, f);
    }
    return UsageError(command + " requires --manifest");
  }
  return WithManifest(command, f);
}
