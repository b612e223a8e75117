#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "clbf/config.hpp"
#include "clbf/pipeline.hpp"

namespace {

struct common_args {
  std::string config_path;
  std::string out_dir;
  int workers = 0;
  double delta = 0.0;
};

void add_common(CLI::App* cmd, common_args& a) {
  cmd->add_option("--config", a.config_path, "problem description (JSON)")
      ->required();
  cmd->add_option("--out", a.out_dir, "output directory override");
  cmd->add_option("--workers", a.workers, "worker thread count override");
  cmd->add_option("--delta", a.delta, "witness slack override");
}

clbf::project_config load(const common_args& a) {
  clbf::project_config cfg = clbf::load_config(a.config_path);
  if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
  if (a.workers > 0) cfg.workers = a.workers;
  if (a.delta > 0.0) cfg.delta = a.delta;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"safety-filter toolchain: verify, package, simulate"};
  app.require_subcommand(1);

  common_args va, ba, sa, ea;
  CLI::App* verify =
      app.add_subcommand("verify", "run the certificate checks end to end");
  add_common(verify, va);
  CLI::App* build =
      app.add_subcommand("build", "package the verified controller artifacts");
  add_common(build, ba);
  CLI::App* simulate =
      app.add_subcommand("simulate", "batch closed-loop rollouts");
  add_common(simulate, sa);
  CLI::App* emit =
      app.add_subcommand("emit-smt2", "write the proof obligations as SMT-LIB");
  add_common(emit, ea);

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) return clbf::cmd_verify(load(va), std::cout);
    if (build->parsed()) return clbf::cmd_build(load(ba), std::cout);
    if (simulate->parsed()) return clbf::cmd_simulate(load(sa), std::cout);
    if (emit->parsed()) return clbf::cmd_emit_smt2(load(ea), std::cout);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 3;
  }
  return 3;
}
