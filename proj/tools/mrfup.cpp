// mrfup command-line driver: upsample, benchmark, filter, synth.
#include <cmath>
#include <cstdint>
#include <exception>
#include <iostream>
#include <limits>
#include <string>

#include <CLI11.hpp>

#include "mrfup/commands.hpp"

namespace {

// Single line, parseable: "error: <kind>: <message>".
int report(const std::string& kind, const std::string& msg, int code) {
  std::string flat = msg;
  for (char& c : flat)
    if (c == '\n' || c == '\r') c = ' ';
  std::cerr << "error: " << kind << ": " << flat << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guided depth upsampling with a collinearity MRF"};
  app.require_subcommand(1);

  std::string config;
  auto* up = app.add_subcommand("upsample", "Upsample sparse depth guided by an RGB image");
  up->add_option("--config", config, "Run config (JSON)")->required();

  std::string bench_config;
  auto* bench = app.add_subcommand("benchmark", "Planar vs baseline sweep on synthetic scenes");
  bench->add_option("--config", bench_config, "Benchmark config (JSON)")->required();

  std::string depth, var, out;
  double threshold = std::numeric_limits<double>::quiet_NaN();
  auto* filt = app.add_subcommand("filter", "Mask depths by variance threshold");
  filt->add_option("--depth", depth, "Depth PFM")->required();
  filt->add_option("--var", var, "Variance PFM")->required();
  filt->add_option("--threshold", threshold, "Keep pixels with variance below this")->required();
  filt->add_option("--out", out, "Output PFM")->required();

  std::string scene, out_dir, mode = "equidistant";
  double ratio = 0.01;
  std::uint64_t seed = 0;
  auto* synth = app.add_subcommand("synth", "Export a synthetic scene as CLI inputs");
  synth->add_option("--scene", scene, "Scene spec (JSON)")->required();
  synth->add_option("--out-dir", out_dir, "Output directory")->required();
  synth->add_option("--ratio", ratio, "Downsampling ratio");
  synth->add_option("--mode", mode, "equidistant | random");
  synth->add_option("--seed", seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("config", e.what(), 1);
  }

  try {
    if (*up) return mrfup::commands::cmd_upsample(config, std::cout);
    if (*bench) return mrfup::commands::cmd_benchmark(bench_config, std::cout);
    if (*filt) return mrfup::commands::cmd_filter(depth, var, threshold, out, std::cout);
    if (*synth) return mrfup::commands::cmd_synth(scene, out_dir, ratio, mode, seed, std::cout);
  } catch (const mrfup::Error& e) {
    return report(e.kind(), e.what(), e.exit_code());
  } catch (const std::filesystem::filesystem_error& e) {
    return report("io", e.what(), 2);
  } catch (const std::exception& e) {
    return report("numerical", e.what(), 3);
  }
  return 0;
}
