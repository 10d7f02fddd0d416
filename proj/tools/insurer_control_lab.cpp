#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "insurer/commands.hpp"

int main(int argc, char** argv) {
  using namespace insurer::cli;
  CLI::App app{"Optimal investment and risk control for an insurer: solve, simulate, verify."};
  app.name("insurer-control-lab");

  Invocation inv;
  std::string out_dir;
  std::uint64_t seed = 0;
  app.add_option("command", inv.command, "solve | simulate | evaluate | oracle | verify | sweep")
      ->required()
      ->check(CLI::IsMember(std::vector<std::string>(std::begin(kCommands), std::end(kCommands))));
  app.add_option("--config", inv.config_path, "JSON configuration file")->required();
  auto* out_opt = app.add_option("--out", out_dir, "directory for report files");
  auto* seed_opt = app.add_option("--seed", seed, "64-bit seed; overrides simulation.seed");
  app.add_option("--threads", inv.threads, "worker threads (results do not depend on it)")
      ->check(CLI::Range(1u, 1024u));
  app.add_flag("--clamp-zero", inv.clamp_zero,
               "where the technical condition fails, set the risk control to zero instead of failing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ExitCode::io_error;
  }
  if (*out_opt) inv.out_dir = out_dir;
  if (*seed_opt) inv.seed = seed;
  return run(inv, std::cout, std::cerr);
}
