#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "dynmpi/config.hpp"
#include "dynmpi/pipeline.hpp"

namespace {

dynmpi::Config load_config(const std::string& path, const std::vector<std::string>& overrides,
                           const std::string& out_dir, long long seed) {
  dynmpi::Config cfg = dynmpi::Config::load(path);
  for (const auto& o : overrides) cfg.apply_override(o);
  if (!out_dir.empty()) cfg.set("paths.out", out_dir);
  if (seed >= 0) {
    cfg.set("noise.seed", std::to_string(seed));
    cfg.set("recon.seed", std::to_string(seed));
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynmpi - dynamic magnetic particle imaging simulation and reconstruction"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  std::vector<std::string> overrides;
  std::string algorithm = "joint_of_l1";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config file")->required();
    cmd->add_option("--override", overrides, "section.key=value overrides")
        ->take_all()
        ->expected(0, -1);
    cmd->add_option("--seed", seed, "override noise and solver seeds");
    cmd->add_option("--out", out_dir, "output directory (overrides paths.out)");
  };

  CLI::App* calibrate = app.add_subcommand("calibrate", "assemble the system matrix");
  add_common(calibrate);
  CLI::App* simulate = app.add_subcommand("simulate", "render phantom and simulate signals");
  add_common(simulate);
  CLI::App* preprocess =
      app.add_subcommand("preprocess", "frequency selection, weighting, real split");
  add_common(preprocess);
  CLI::App* reconstruct = app.add_subcommand("reconstruct", "run a reconstruction algorithm");
  add_common(reconstruct);
  reconstruct->add_option("--algorithm", algorithm,
                          "kaczmarz | spdhg_framewise | joint_of_l1 | joint_of_l2 | "
                          "joint_mc_l1 | joint_mc_l2");
  CLI::App* metrics = app.add_subcommand("metrics", "quality metrics for reconstructions");
  add_common(metrics);
  CLI::App* sweep = app.add_subcommand("sweep", "parameter sweep ranked by SSIM");
  add_common(sweep);

  CLI11_PARSE(app, argc, argv);

  try {
    const dynmpi::Config cfg = load_config(config_path, overrides, out_dir, seed);
    if (calibrate->parsed()) dynmpi::cmd_calibrate(cfg);
    if (simulate->parsed()) dynmpi::cmd_simulate(cfg);
    if (preprocess->parsed()) dynmpi::cmd_preprocess(cfg);
    if (reconstruct->parsed()) dynmpi::cmd_reconstruct(cfg, algorithm);
    if (metrics->parsed()) dynmpi::cmd_metrics(cfg, std::cout);
    if (sweep->parsed()) dynmpi::cmd_sweep(cfg, std::cout);
  } catch (const dynmpi::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
