#include <CLI11.hpp>

#include <iostream>

#include "carleman/cli.hpp"

int main(int argc, char** argv) {
  using namespace carleman::cli;
  CLI::App app{"Carleman-matrix continuation for couple-stress elasticity"};
  app.require_subcommand(1);

  SelftestOptions st;
  auto* selftest = app.add_subcommand("selftest", "run the built-in numerical checks");
  selftest->add_option("--filter", st.filter, "run only checks whose name contains this text");
  selftest->add_option("--inject-c3-scale", st.c3_scale, "multiply C3 in the Carleman check (fault injection)")
      ->check(CLI::PositiveNumber);

  ReconstructOptions ro;
  std::string out_dir;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  auto* rec = app.add_subcommand("reconstruct", "run a reconstruction sweep from a JSON config");
  rec->add_option("--config", ro.config, "experiment config (JSON)")->required();
  auto* out_opt = rec->add_option("--out", out_dir, "output directory (overrides output_dir)");
  auto* seed_opt = rec->add_option("--seed", seed, "seed for sources and noise (overrides seed)");
  auto* threads_opt = rec->add_option("--threads", threads, "worker threads, 0 for all cores (overrides threads)");

  std::string table_in, table_plot;
  auto* table = app.add_subcommand("table", "convergence table from results.csv");
  table->add_option("--in", table_in, "results.csv from reconstruct")->required();
  auto* plot_opt = table->add_option("--plot", table_plot, "also write a plot-ready CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  if (*selftest) return report_selftest(run_selftest(st), std::cout);
  if (*rec) {
    if (*out_opt) ro.out = out_dir;
    if (*seed_opt) ro.seed = seed;
    if (*threads_opt) ro.threads = threads;
    return run_reconstruct(ro, std::cerr);
  }
  std::optional<std::string> plot;
  if (*plot_opt) plot = table_plot;
  return run_table(table_in, plot, std::cout, std::cerr);
}
