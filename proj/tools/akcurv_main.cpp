#include <akcurv/run.hpp>

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"akcurv: curvature of almost-Kähler metrics in Darboux coordinates"};
  app.require_subcommand(1);

  akcurv::run::RunOptions options;
  std::string out;
  int h_refine = -1;
  for (const std::string& name : akcurv::run::kTaskNames) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " task");
    sub->add_option("--config", options.config_path, "configuration file")->required();
    sub->add_option("--out", out, "output directory (overrides [run] out)");
    sub->add_option("--h-refine", h_refine, "number of grid refinements (overrides [run] h_refine)")
        ->check(CLI::Range(0, 4));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  options.task = app.get_subcommands().front()->get_name();
  if (!out.empty()) options.out = out;
  if (h_refine >= 0) options.h_refine = h_refine;
  return akcurv::run::run(options, std::cerr);
}
