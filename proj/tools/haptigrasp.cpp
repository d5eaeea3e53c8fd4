#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "haptigrasp/commands.hpp"
#include "haptigrasp/error.hpp"

namespace {

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  1  internal or argument error\n"
    "  2  config or input validation failure\n"
    "  3  missing artifact\n"
    "  4  provenance or fingerprint mismatch\n"
    "  5  training failure (divergence, too few examples, empty class)\n"
    "  6  unsupported format version or corrupt file\n"
    "Errors print one line to stderr: error code=<n> message=<text>";

int fail(int code, const std::string& message) {
  std::string flat = message;
  for (char& c : flat)
    if (c == '\n') c = ' ';
  std::cerr << "error code=" << code << " message=" << flat << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tactile-only grasping simulator: catalog, collection, training, evaluation and reports."};
  app.footer(kExitCodes);
  app.require_subcommand(1);

  std::string config_path;
  std::string root = ".";
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "JSON run config; defaults apply when omitted");
  app.add_option("-r,--root", root, "workspace root every configured path is relative to")->capture_default_str();
  app.add_option("-s,--set", overrides, "override a config key, e.g. --set encoder.epochs=2 (repeatable)");
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the resolved config and exit after the command is parsed");

  using Command = std::function<std::string(const hg::CommandContext&)>;
  const std::vector<std::tuple<const char*, const char*, Command>> commands{
      {"gen-catalog", "generate the seeded object catalog", hg::cmd_gen_catalog},
      {"collect", "collect the two-set grasp dataset", hg::cmd_collect},
      {"train-ae", "train the haptic autoencoder on train-split episodes", hg::cmd_train_ae},
      {"train-heads", "train the stability head and the re-grasp policy", hg::cmd_train_heads},
      {"eval-perception", "material and stability grids over features x classifiers", hg::cmd_eval_perception},
      {"eval-grasping", "re-grasping and full-pipeline arms on held-out objects", hg::cmd_eval_grasping},
      {"report", "render every table from stored metrics", hg::cmd_report},
  };
  std::map<CLI::App*, Command> handlers;
  for (const auto& [name, help, fn] : commands) handlers[app.add_subcommand(name, help)] = fn;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(1, e.what());
  }

  try {
    hg::CommandContext ctx;
    ctx.root = root;
    ctx.config = config_path.empty() ? hg::RunConfig{} : hg::load_config(config_path);
    ctx.config = hg::apply_overrides(ctx.config, overrides);
    if (print_config) {
      std::cout << hg::config_to_json(ctx.config) << "\n";
      return 0;
    }
    for (auto* sub : app.get_subcommands()) std::cout << handlers.at(sub)(ctx) << "\n";
    return 0;
  } catch (const hg::Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(1, e.what());
  }
}
