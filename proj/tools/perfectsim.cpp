// Command-line front end: sample, validate, plotdata.
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "perfectsim/app.hpp"
#include "perfectsim/parallel.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSampler = 3;

void apply_thread_env() {
  const char* v = std::getenv("PERFECTSIM_THREADS");
  if (!v || !*v) return;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw perfectsim::ConfigError("PERFECTSIM_THREADS must be a positive integer");
  perfectsim::set_worker_count(static_cast<int>(n));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Exact and approximate samplers for cluster, Boolean and Hawkes point processes"};
  cli.require_subcommand(1);

  std::string config, outdir = "out", kind, outfile;
  auto* sample = cli.add_subcommand("sample", "draw replicates and write pattern files");
  sample->add_option("-c,--config", config, "config file")->required();
  sample->add_option("-o,--out", outdir, "output directory");

  auto* validate = cli.add_subcommand("validate", "run the statistical checks for a config");
  validate->add_option("-c,--config", config, "config file")->required();
  validate->add_option("-o,--out", outfile, "write the report JSON here instead of stdout");

  auto* plot = cli.add_subcommand("plotdata", "emit plot data as CSV");
  plot->add_option("-c,--config", config, "config file")->required();
  plot->add_option("--kind", kind, "points-2d | counts-histogram | sandwich-curves | coverage-raster")->required();
  plot->add_option("-o,--out", outfile, "write CSV here instead of stdout");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    apply_thread_env();
    const auto cfg = perfectsim::app::load_config(config);
    if (sample->parsed()) {
      perfectsim::app::write_samples(cfg, outdir);
      return 0;
    }
    if (validate->parsed()) {
      const auto reports = perfectsim::app::validate(cfg);
      bool rejected = false;
      for (const auto& r : reports) rejected = rejected || r.reject;
      const auto doc = perfectsim::to_json(std::span<const perfectsim::TestReport>(reports)).dump(2);
      if (outfile.empty()) {
        std::cout << doc << '\n';
      } else {
        std::ofstream(outfile) << doc << '\n';
      }
      for (const auto& r : reports) {
        std::cerr << (r.reject ? "REJECT " : "accept ") << r.name << " (p=" << r.p_value << ")\n";
      }
      return rejected ? kExitValidation : 0;
    }
    if (outfile.empty()) {
      perfectsim::app::plot_data(cfg, kind, std::cout);
    } else {
      std::ofstream f(outfile);
      perfectsim::app::plot_data(cfg, kind, f);
    }
    return 0;
  } catch (const perfectsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "sampler error: " << e.what() << '\n';
    return kExitSampler;
  }
}
