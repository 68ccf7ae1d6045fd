#ifndef DYNMPI_PIPELINE_HPP
#define DYNMPI_PIPELINE_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "dynmpi/acquisition.hpp"
#include "dynmpi/config.hpp"
#include "dynmpi/phantoms.hpp"
#include "dynmpi/preprocessing.hpp"
#include "dynmpi/recon.hpp"
#include "dynmpi/scanner.hpp"

namespace dynmpi {

/// Everything the commands need, resolved and validated from a Config.
struct Experiment {
  ScannerModel scanner;
  CycleClock clock;
  Grid3 recon_grid;
  Grid3 sim_grid;
  PhantomSpec phantom;
  int n_frames = 10;
  NoiseModel noise;
  FrequencySelection selection;
  ReconProblem recon;
  MotionProblem motion;
  double kaczmarz_lambda = 1.0;
  int kaczmarz_sweeps = 10;
  bool kaczmarz_positivity = true;
  int kaczmarz_average_frames = 1;
  std::size_t element_budget = 200000000;
  int threads = 0;
  std::string out_dir = "out";
};

Experiment experiment_from_config(const Config& cfg);

// Pipeline commands. All artifact files land under Experiment::out_dir with a
// "key = value" metadata sidecar recording inputs and the config hash.
void cmd_calibrate(const Config& cfg);
void cmd_simulate(const Config& cfg);
void cmd_preprocess(const Config& cfg);
void cmd_reconstruct(const Config& cfg, const std::string& algorithm);
void cmd_metrics(const Config& cfg, std::ostream& out);
void cmd_sweep(const Config& cfg, std::ostream& out);

// Artifact access shared by commands, tests and the acceptance suite.
struct ProcessedData {
  SystemMatrix matrix;
  MeasurementSeries data;
};
ProcessedData load_processed(const Config& cfg);
ImageSequence load_truth(const Config& cfg);

std::vector<std::string> reconstruct_algorithms();

}  // namespace dynmpi

#endif
