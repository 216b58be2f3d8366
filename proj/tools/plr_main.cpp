#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plr/commands.hpp"
#include "plr/estimation.hpp"
#include "plr/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Plackett-Luce ordering optimizer for in-context examples"};
  app.set_version_flag("--version", plr::kLibraryVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  int parallel = 1;
  bool trace = true;

  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run configuration (JSON)")->required();
    cmd->add_option("--seeds", seeds, "Comma-separated seed list (overrides the config)")->delimiter(',');
    cmd->add_option("--out", out_dir, "Output directory (overrides the config)");
    cmd->add_option("--parallel", parallel, "Seeds to run concurrently")->check(CLI::PositiveNumber);
    cmd->add_flag("--trace,!--no-trace", trace, "Write per-iteration trace files (default on)");
  };

  auto* optimize = app.add_subcommand("optimize", "Learn an ordering distribution and select an ordering per seed");
  add_run_flags(optimize);

  std::string kind = "topk";
  auto* baseline = app.add_subcommand("baseline", "Evaluate the static or uniform top-k baseline");
  add_run_flags(baseline);
  baseline->add_option("--kind", kind, "static or topk")->check(CLI::IsMember({"static", "topk"}));

  std::string fault;
  auto* verify = app.add_subcommand("verify", "Run the oracle-backed property checks");
  verify->add_option("--inject-fault", fault, "Self-test: break a component on purpose (gradient-sign)")
      ->check(CLI::IsMember({"gradient-sign"}));

  std::vector<double> logits;
  auto* enumerate = app.add_subcommand("enumerate", "Print the exact PL distribution for n <= 8 logits");
  enumerate->add_option("--logits", logits, "Comma-separated logits")->delimiter(',')->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : plr::kExitConfigError;
  }

  plr::CommandOptions options;
  if (!seeds.empty()) options.seeds = seeds;
  if (!out_dir.empty()) options.out_dir = out_dir;
  options.parallel = parallel;
  options.trace = trace;

  if (*optimize) return plr::cmd_optimize(config_path, options, std::cerr);
  if (*baseline) {
    return plr::cmd_baseline(config_path, kind == "static" ? plr::BaselineKind::Static : plr::BaselineKind::TopK,
                             options, std::cerr);
  }
  if (*verify) {
    plr::VerifyOptions vopts;
    if (fault == "gradient-sign") {
      vopts.gradient = [](const plr::PLParams& theta, const plr::EliteSet& elites) {
        auto g = plr::pl_grad(theta, elites);
        for (double& x : g) x = -x;
        return g;
      };
    }
    return plr::cmd_verify(vopts, std::cout);
  }
  if (*enumerate) return plr::cmd_enumerate(logits, std::cout, std::cerr);
  return plr::kExitConfigError;
}
