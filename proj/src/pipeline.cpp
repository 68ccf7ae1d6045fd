#include "dynmpi/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "dynmpi/analysis.hpp"

namespace dynmpi {

namespace fs = std::filesystem;

namespace {

std::string num_str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Grid3 grid_from_config(const Config& cfg) {
  const auto dims = cfg.get_ivec3("grid.recon_dims", {16, 16, 1});
  const auto vs = cfg.get_vec3("grid.recon_voxel_size", {2e-3, 2e-3, 2e-3});
  return Grid3::centered(dims, vs);
}

Grid3 refine_grid(const Grid3& g, int factor) {
  std::array<int, 3> dims{};
  std::array<double, 3> vs{};
  for (int a = 0; a < 3; ++a) {
    dims[a] = g.dims[a] > 1 ? g.dims[a] * factor : 1;
    vs[a] = g.dims[a] > 1 ? g.voxel_size[a] / factor : g.voxel_size[a];
  }
  return Grid3::centered(dims, vs);
}

Eigen::MatrixXd coils_from_axes(const std::string& axes) {
  if (axes.empty()) throw config_error("scanner.coil_axes must name at least one axis");
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(3, static_cast<Eigen::Index>(axes.size()));
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const char c = axes[i];
    if (c == 'x')
      R(0, i) = 1.0;
    else if (c == 'y')
      R(1, i) = 1.0;
    else if (c == 'z')
      R(2, i) = 1.0;
    else
      throw config_error(std::string("scanner.coil_axes: unknown axis '") + c + "'");
  }
  return R;
}

std::string meta_path(const std::string& artifact) { return artifact + ".meta"; }

void write_meta(const std::string& artifact, const Config& cfg,
                const std::vector<std::pair<std::string, std::string>>& inputs,
                const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  std::ofstream os(meta_path(artifact));
  if (!os) throw std::runtime_error("cannot write metadata for " + artifact);
  os << "config_hash = " << hash_hex(cfg.content_hash()) << '\n';
  for (const auto& [name, path] : inputs)
    os << "input." << name << " = " << path << ':' << hash_hex(hash_file(path)) << '\n';
  for (const auto& [k, v] : extra) os << k << " = " << v << '\n';
}

std::map<std::string, std::string> read_meta(const std::string& artifact) {
  std::ifstream is(meta_path(artifact));
  if (!is) throw std::runtime_error("missing metadata sidecar: " + meta_path(artifact));
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

void verify_inputs(const std::string& artifact) {
  for (const auto& [key, value] : read_meta(artifact)) {
    if (key.rfind("input.", 0) != 0) continue;
    const auto colon = value.rfind(':');
    if (colon == std::string::npos)
      throw std::runtime_error("malformed input record in " + meta_path(artifact));
    const std::string path = value.substr(0, colon);
    const std::string recorded = value.substr(colon + 1);
    if (hash_hex(hash_file(path)) != recorded)
      throw std::runtime_error("provenance mismatch: " + path +
                               " changed since " + artifact + " was produced");
  }
}

struct Paths {
  std::string dir;
  std::string system_matrix, phantom_fine, truth_recon, flow_truth;
  std::string measurements, measurements_clean;
  std::string matrix_proc, data_proc, selection;

  explicit Paths(const std::string& out_dir) : dir(out_dir) {
    system_matrix = dir + "/system_matrix.dmpi";
    phantom_fine = dir + "/phantom_fine.dmpi";
    truth_recon = dir + "/truth_recon.dmpi";
    flow_truth = dir + "/flow_truth.dmpi";
    measurements = dir + "/measurements.dmpi";
    measurements_clean = dir + "/measurements_clean.dmpi";
    matrix_proc = dir + "/matrix_proc.dmpi";
    data_proc = dir + "/data_proc.dmpi";
    selection = dir + "/selection.txt";
  }
  std::string recon(const std::string& algo) const { return dir + "/recon_" + algo + ".dmpi"; }
  std::string flow(const std::string& algo) const { return dir + "/flow_" + algo + ".dmpi"; }
  std::string manifest(const std::string& algo) const {
    return dir + "/manifest_" + algo + ".txt";
  }
  std::string trace(const std::string& algo) const { return dir + "/trace_" + algo + ".txt"; }
};

PhantomSpec phantom_from_config(const Config& cfg) {
  PhantomSpec spec;
  const std::string kind = cfg.get_string("phantom.kind", "rotating_rod");
  if (kind == "spiral_ball")
    spec.kind = PhantomSpec::Kind::spiral_ball;
  else if (kind == "rotating_rod")
    spec.kind = PhantomSpec::Kind::rotating_rod;
  else if (kind == "static_delta")
    spec.kind = PhantomSpec::Kind::static_delta;
  else
    throw config_error("phantom.kind: unknown phantom '" + kind + "'");
  spec.ball_radius = cfg.get_double("phantom.ball_radius", 2e-3);
  spec.circle_diameter = cfg.get_double("phantom.circle_diameter", 11.5e-3);
  spec.z_pitch = cfg.get_double("phantom.z_pitch", 0.0);
  spec.rod_length = cfg.get_double("phantom.rod_length", 4e-3);
  spec.rod_width = cfg.get_double("phantom.rod_width", 4e-3);
  const auto c = cfg.get_vec3("phantom.center", {0, 0, 0});
  spec.center = Eigen::Vector3d(c[0], c[1], c[2]);
  spec.intensity = cfg.get_double("phantom.intensity", 1.0);
  spec.angular_speed = cfg.get_double("phantom.angular_speed", 0.4061);
  spec.phase0 = cfg.get_double("phantom.phase0", 0.0);
  return spec;
}

}  // namespace

Experiment experiment_from_config(const Config& cfg) {
  Experiment ex;

  ParticleModel particle = ParticleModel::from_core_parameters(
      cfg.get_double("particle.saturation_magnetization", 0.6),
      cfg.get_double("particle.core_diameter", 2e-8),
      cfg.get_double("particle.temperature", 293.0));
  if (cfg.has("particle.beta"))
    particle = ParticleModel(cfg.get_double("particle.beta", 0.0),
                             cfg.has("particle.m0") ? cfg.get_double("particle.m0", 0.0)
                                                    : particle.m0);

  const auto g = cfg.get_vec3("scanner.gradient", {0.5, 0.5, 1.0});
  const auto a = cfg.get_vec3("scanner.drive_amplitudes", {0.014, 0.014, 0.0});
  const auto div = cfg.get_ivec3("scanner.drive_divisors", {17, 16, 1});
  const double f_base = cfg.get_double("scanner.base_frequency", 2.5e6);
  const double f_s = cfg.get_double("scanner.sample_rate", f_base);
  try {
    ex.scanner = ScannerModel(Eigen::Vector3d(g[0], g[1], g[2]).asDiagonal(),
                              Eigen::Vector3d(a[0], a[1], a[2]), div, f_base, f_s,
                              coils_from_axes(cfg.get_string("scanner.coil_axes", "xy")),
                              particle);
    ex.clock = ex.scanner.clock();
  } catch (const std::invalid_argument& e) {
    throw config_error(e.what());
  }

  ex.recon_grid = grid_from_config(cfg);
  const int refine = cfg.get_int("grid.sim_refine", 2);
  if (refine < 2)
    throw config_error("grid.sim_refine must be >= 2 so the simulation grid is finer "
                       "than the reconstruction grid");
  ex.sim_grid = refine_grid(ex.recon_grid, refine);

  ex.phantom = phantom_from_config(cfg);
  ex.n_frames = cfg.get_int("phantom.frames", 10);
  if (ex.n_frames < 1) throw config_error("phantom.frames must be >= 1");

  ex.noise = NoiseModel(cfg.get_double("noise.level", 0.5), cfg.get_u64("noise.seed", 1));

  const std::string mode = cfg.get_string("preprocessing.mode", "mixing_order");
  if (mode == "mixing_order")
    ex.selection.mode = FrequencySelection::Mode::mixing_order;
  else if (mode == "snr_threshold")
    ex.selection.mode = FrequencySelection::Mode::snr_threshold;
  else if (mode == "band_only")
    ex.selection.mode = FrequencySelection::Mode::band_only;
  else
    throw config_error("preprocessing.mode: unknown mode '" + mode + "'");
  ex.selection.max_mixing_order = cfg.get_int("preprocessing.max_mixing_order", 4);
  ex.selection.min_frequency = cfg.get_double("preprocessing.min_frequency", 0.0);
  ex.selection.snr_threshold = cfg.get_double("preprocessing.snr_threshold", 5.0);

  ex.recon.alpha1 = cfg.get_double("recon.alpha1", 0.6);
  ex.recon.alpha2 = cfg.get_double("recon.alpha2", 0.1);
  ex.recon.gamma = cfg.get_double("recon.gamma", 100.0);
  ex.recon.batches = cfg.get_int("recon.batches", 3);
  ex.recon.stage_iters = cfg.get_int("recon.stage_iters", 200);
  ex.recon.alternations = cfg.get_int("recon.alternations", 3);
  ex.recon.seed = cfg.get_u64("recon.seed", 7);
  ex.recon.positivity = cfg.get_int("recon.positivity", 1) != 0;

  const std::string reg = cfg.get_string("motion.regularizer", "tv_l1");
  if (reg == "tv_l1")
    ex.motion.flow_regularizer = MotionProblem::FlowRegularizer::tv_l1;
  else if (reg == "grad_l2")
    ex.motion.flow_regularizer = MotionProblem::FlowRegularizer::grad_l2;
  else if (reg == "l2_tikhonov")
    ex.motion.flow_regularizer = MotionProblem::FlowRegularizer::l2_tikhonov;
  else
    throw config_error("motion.regularizer: unknown regularizer '" + reg + "'");
  ex.motion.beta = cfg.get_double("motion.beta", 0.1);
  ex.motion.gamma = ex.recon.gamma;
  ex.motion.pyramid_levels = cfg.get_int("motion.levels", 0);
  ex.motion.scale_factor = cfg.get_double("motion.scale_factor", 0.5);
  ex.motion.warp_increments = cfg.get_int("motion.warp_increments", 2);
  ex.motion.solver.max_iters = cfg.get_int("motion.solver_iters", 120);

  ex.kaczmarz_lambda = cfg.get_double("kaczmarz.lambda", 1.0);
  ex.kaczmarz_sweeps = cfg.get_int("kaczmarz.sweeps", 10);
  ex.kaczmarz_positivity = cfg.get_int("kaczmarz.positivity", 1) != 0;
  ex.kaczmarz_average_frames = cfg.get_int("kaczmarz.average_frames", 1);

  ex.element_budget = cfg.get_u64("matrix.element_budget", 200000000ull);
  ex.threads = cfg.get_int("pipeline.threads", 0);
  ex.out_dir = cfg.get_string("paths.out", "out");
  return ex;
}

void cmd_calibrate(const Config& cfg) {
  const Experiment ex = experiment_from_config(cfg);
  const Paths paths(ex.out_dir);
  fs::create_directories(paths.dir);

  SystemMatrix S =
      build_system_matrix(ex.recon_grid, ex.clock, ex.scanner, ex.threads, ex.element_budget);
  save_array(paths.system_matrix,
             {static_cast<std::uint64_t>(S.n_rows), static_cast<std::uint64_t>(S.n_cols)},
             S.data.data());
  write_meta(paths.system_matrix, cfg, {},
             {{"rows", std::to_string(S.n_rows)},
              {"cols", std::to_string(S.n_cols)},
              {"domain", "time"},
              {"samples_per_cycle", std::to_string(ex.clock.samples_per_cycle)},
              {"coils", std::to_string(ex.scanner.n_coils())}});
}

void cmd_simulate(const Config& cfg) {
  const Experiment ex = experiment_from_config(cfg);
  const Paths paths(ex.out_dir);
  fs::create_directories(paths.dir);

  for (int a = 0; a < 3; ++a)
    if (ex.recon_grid.dims[a] > 1 && ex.sim_grid.dims[a] <= ex.recon_grid.dims[a])
      throw config_error("inverse-crime guard: simulation grid must be strictly finer than "
                         "the reconstruction grid");

  RenderedPhantom phantom = render_phantom(ex.phantom, ex.sim_grid, ex.n_frames);
  MeasurementSeries clean =
      simulate_dynamic_signal(phantom.images, ex.scanner, ex.clock, ex.threads);
  MeasurementSeries noisy = add_noise(clean, ex.noise);

  // block-mean restriction of the fine phantom onto the reconstruction grid
  ImageSequence truth(ex.recon_grid, ex.n_frames);
  std::array<int, 3> factor{};
  for (int a = 0; a < 3; ++a) factor[a] = ex.sim_grid.dims[a] / ex.recon_grid.dims[a];
  for (int k = 0; k < ex.n_frames; ++k) {
    std::vector<double> fine(phantom.images.frame(k),
                             phantom.images.frame(k) + ex.sim_grid.n_voxels());
    auto coarse = resample_trilinear(fine, ex.sim_grid.dims, factor, ResampleMode::down_average);
    std::copy(coarse.begin(), coarse.end(), truth.frame(k));
  }

  double umax = 0.0;
  for (double v : clean.data) umax = std::max(umax, std::abs(v));

  save_image_sequence(paths.phantom_fine, phantom.images);
  save_image_sequence(paths.truth_recon, truth);
  save_flow_field(paths.flow_truth, phantom.truth_flow);
  save_measurement_series(paths.measurements_clean, clean);
  save_measurement_series(paths.measurements, noisy);

  std::vector<std::pair<std::string, std::string>> extra = {
      {"noise_level", num_str(ex.noise.level)},
      {"noise_seed", std::to_string(ex.noise.seed)},
      {"noise_sigma", num_str(ex.noise.level * umax)},
      {"rng", "splitmix64-counter box-muller"},
      {"frames", std::to_string(ex.n_frames)}};
  if (ex.n_frames > 1) {
    const auto ratios = neglected_term_ratio(phantom.images, ex.scanner, ex.clock, clean);
    const double worst = *std::max_element(ratios.begin(), ratios.end());
    extra.emplace_back("neglected_dcdt_ratio", num_str(worst));
  }
  write_meta(paths.measurements, cfg, {{"clean", paths.measurements_clean}}, extra);
  write_meta(paths.truth_recon, cfg, {{"phantom_fine", paths.phantom_fine}}, {});
  write_meta(paths.flow_truth, cfg, {{"phantom_fine", paths.phantom_fine}}, {});
  write_meta(paths.phantom_fine, cfg, {}, {});
  write_meta(paths.measurements_clean, cfg, {{"phantom_fine", paths.phantom_fine}}, {});
}

void cmd_preprocess(const Config& cfg) {
  const Experiment ex = experiment_from_config(cfg);
  const Paths paths(ex.out_dir);

  LoadedArray raw_matrix = load_array(paths.system_matrix);
  if (raw_matrix.dims.size() != 2)
    throw std::runtime_error("cmd_preprocess: system matrix is not 2-d");
  SystemMatrix S;
  S.grid = ex.recon_grid;
  S.n_rows = static_cast<int>(raw_matrix.dims[0]);
  S.n_cols = static_cast<int>(raw_matrix.dims[1]);
  S.data = std::move(raw_matrix.values);
  S.domain_tag = DomainTag::time_domain;

  MeasurementSeries u = load_measurement_series(paths.measurements, DomainTag::time_domain);

  const int n_channels = ex.scanner.n_coils();
  SpectralMatrix Sf = matrix_to_frequency_domain(S, n_channels, ex.clock);
  SpectralSeries uf = series_to_frequency_domain(u, n_channels, ex.clock);

  FrequencySelection resolved;
  if (ex.selection.mode == FrequencySelection::Mode::snr_threshold) {
    MeasurementSeries clean =
        load_measurement_series(paths.measurements_clean, DomainTag::time_domain);
    SpectralSeries cleanf = series_to_frequency_domain(clean, n_channels, ex.clock);
    const auto meta = read_meta(paths.measurements);
    const double sigma = meta.count("noise_sigma") ? std::stod(meta.at("noise_sigma")) : 0.0;
    if (!(sigma > 0.0))
      throw config_error("snr_threshold selection needs noisy data (noise.level > 0)");
    const auto snr = estimate_snr(cleanf, sigma, ex.clock.samples_per_cycle);
    resolved = select_frequencies(Sf.n_bins, n_channels, ex.clock, ex.selection, &snr);
  } else {
    resolved = select_frequencies(Sf.n_bins, n_channels, ex.clock, ex.selection);
  }

  SystemMatrix Sp = split_real_imag(Sf, resolved, ex.clock);
  MeasurementSeries up = split_real_imag(uf, resolved);

  // Per-row weighting as used for measured data; simulated pipelines default
  // to a single global scale so weak mixing bins do not amplify noise.
  RowNormalizeReport report;
  if (cfg.get_int("preprocessing.row_normalize", 0) != 0) {
    report = row_normalize(Sp, up);
  } else {
    double max_norm = 0.0;
    for (int r = 0; r < Sp.n_rows; ++r) {
      double s = 0.0;
      const double* row = Sp.row(r);
      for (int j = 0; j < Sp.n_cols; ++j) s += row[j] * row[j];
      max_norm = std::max(max_norm, std::sqrt(s));
    }
    if (!(max_norm > 0.0)) throw std::runtime_error("cmd_preprocess: zero system matrix");
    const double inv = 1.0 / max_norm;
    for (double& v : Sp.data) v *= inv;
    for (double& v : up.data) v *= inv;
    report.kept = Sp.n_rows;
  }

  save_array(paths.matrix_proc,
             {static_cast<std::uint64_t>(Sp.n_rows), static_cast<std::uint64_t>(Sp.n_cols)},
             Sp.data.data());
  save_measurement_series(paths.data_proc, up);
  {
    std::ofstream os(paths.selection);
    os << selection_table(Sp);
  }
  const auto inputs_common =
      std::vector<std::pair<std::string, std::string>>{{"system_matrix", paths.system_matrix},
                                                       {"measurements", paths.measurements}};
  write_meta(paths.matrix_proc, cfg, inputs_common,
             {{"rows", std::to_string(Sp.n_rows)},
              {"dropped_rows", std::to_string(report.dropped)},
              {"selection", paths.selection}});
  write_meta(paths.data_proc, cfg, inputs_common, {{"rows", std::to_string(up.n_rows)}});
}

ProcessedData load_processed(const Config& cfg) {
  const Experiment ex = experiment_from_config(cfg);
  const Paths paths(ex.out_dir);
  verify_inputs(paths.matrix_proc);
  verify_inputs(paths.data_proc);

  LoadedArray raw = load_array(paths.matrix_proc);
  if (raw.dims.size() != 2) throw std::runtime_error("processed matrix is not 2-d");
  ProcessedData out;
  out.matrix.grid = ex.recon_grid;
  out.matrix.n_rows = static_cast<int>(raw.dims[0]);
  out.matrix.n_cols = static_cast<int>(raw.dims[1]);
  out.matrix.data = std::move(raw.values);
  out.matrix.domain_tag = DomainTag::frequency_selected_real_split;
  if (out.matrix.n_cols != static_cast<int>(ex.recon_grid.n_voxels()))
    throw std::runtime_error("processed matrix does not match the reconstruction grid");

  // restore row descriptors from the selection sidecar
  std::ifstream sel(paths.selection);
  if (sel) {
    std::string line;
    while (std::getline(sel, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream is(line);
      SystemMatrixRowMeta meta;
      std::string part;
      double freq;
      if (is >> meta.channel >> meta.index >> freq >> part) {
        meta.frequency_hz = freq;
        meta.part = part == "re" ? SystemMatrixRowMeta::Part::real
                                 : SystemMatrixRowMeta::Part::imag;
        out.matrix.row_meta.push_back(meta);
      }
    }
  }

  out.data = load_measurement_series(paths.data_proc,
                                     DomainTag::frequency_selected_real_split);
  if (out.data.n_rows != out.matrix.n_rows)
    throw std::runtime_error("processed data and matrix disagree on row count");
  return out;
}

ImageSequence load_truth(const Config& cfg) {
  const Experiment ex = experiment_from_config(cfg);
  const Paths paths(ex.out_dir);
  return load_image_sequence(paths.truth_recon, ex.recon_grid);
}

std::vector<std::string> reconstruct_algorithms() {
  return {"kaczmarz", "spdhg_framewise", "joint_of_l1", "joint_of_l2", "joint_mc_l1",
          "joint_mc_l2"};
}

namespace {

void configure_algorithm(const std::string& algorithm, ReconProblem& problem) {
  if (algorithm == "joint_of_l1" || algorithm == "joint_mc_l1")
    problem.data_term = ReconProblem::DataTerm::l1;
  else
    problem.data_term = ReconProblem::DataTerm::l2;
  problem.motion_model = (algorithm == "joint_mc_l1" || algorithm == "joint_mc_l2")
                             ? MotionProblem::Model::mass_conservation
                             : MotionProblem::Model::optical_flow;
}

}  // namespace

void cmd_reconstruct(const Config& cfg, const std::string& algorithm) {
  const Experiment ex = experiment_from_config(cfg);
  const Paths paths(ex.out_dir);
  const auto algos = reconstruct_algorithms();
  if (std::find(algos.begin(), algos.end(), algorithm) == algos.end())
    throw config_error("unknown reconstruction algorithm: " + algorithm);

  ProcessedData in = load_processed(cfg);

  ImageSequence result;
  FlowField flow;
  std::vector<double> objective_trace;
  bool has_flow = false;

  if (algorithm == "kaczmarz") {
    MeasurementSeries data = in.data;
    double lambda = ex.kaczmarz_lambda;
    if (ex.kaczmarz_average_frames > 1) {
      data = average_frames(data, ex.kaczmarz_average_frames);
      lambda /= std::sqrt(static_cast<double>(ex.kaczmarz_average_frames));
    }
    result = kaczmarz_series(in.matrix, data, lambda, ex.kaczmarz_sweeps,
                             ex.kaczmarz_positivity, ex.threads);
  } else if (algorithm == "spdhg_framewise") {
    ReconProblem p = ex.recon;
    SolveDiagnostics diag;
    result = reconstruct_framewise_spdhg(in.matrix, in.data, p, &diag);
    objective_trace = diag.objective_trace;
  } else {
    ReconProblem p = ex.recon;
    configure_algorithm(algorithm, p);
    MotionProblem mp = ex.motion;
    mp.parallelism = ex.threads;
    const std::string init = cfg.get_string("recon.init", "zeros");
    JointResult joint = alternate_joint(in.matrix, in.data, p, mp,
                                        init == "framewise" ? JointInit::framewise_warmstart
                                                            : JointInit::zeros);
    result = std::move(joint.images);
    flow = std::move(joint.flow);
    objective_trace = joint.objective_per_alternation;
    has_flow = true;
  }

  for (double v : result.data)
    if (!std::isfinite(v))
      throw std::runtime_error("cmd_reconstruct: non-finite output from " + algorithm);

  save_image_sequence(paths.recon(algorithm), result);
  const std::vector<std::pair<std::string, std::string>> inputs = {
      {"matrix_proc", paths.matrix_proc}, {"data_proc", paths.data_proc}};
  std::vector<std::pair<std::string, std::string>> extra = {
      {"algorithm", algorithm},
      {"seed", std::to_string(ex.recon.seed)},
      {"alpha1", num_str(ex.recon.alpha1)},
      {"alpha2", num_str(ex.recon.alpha2)},
      {"gamma", num_str(ex.recon.gamma)},
      {"beta", num_str(ex.motion.beta)},
      {"kaczmarz_lambda", num_str(ex.kaczmarz_lambda)}};
  write_meta(paths.recon(algorithm), cfg, inputs, extra);

  if (has_flow) {
    save_flow_field(paths.flow(algorithm), flow);
    write_meta(paths.flow(algorithm), cfg, inputs, {{"algorithm", algorithm}});
  }

  {
    std::ofstream os(paths.manifest(algorithm));
    os << "algorithm = " << algorithm << '\n'
       << "config_hash = " << hash_hex(cfg.content_hash()) << '\n';
    for (const auto& [name, path] : inputs)
      os << "input." << name << " = " << path << ':' << hash_hex(hash_file(path)) << '\n';
    os << cfg.dump();
  }
  if (!objective_trace.empty()) {
    std::ofstream os(paths.trace(algorithm));
    os << "# iteration objective\n";
    for (std::size_t i = 0; i < objective_trace.size(); ++i)
      os << i << ' ' << objective_trace[i] << '\n';
  }
}

void cmd_metrics(const Config& cfg, std::ostream& out) {
  const Experiment ex = experiment_from_config(cfg);
  const Paths paths(ex.out_dir);
  ImageSequence truth = load_truth(cfg);

  out << "algorithm ssim mass_cov radius_mm\n";
  std::ofstream file(ex.out_dir + "/metrics.txt");
  file << "algorithm ssim mass_cov radius_mm\n";
  for (const auto& algo : reconstruct_algorithms()) {
    const std::string path = paths.recon(algo);
    if (!fs::exists(path)) continue;
    verify_inputs(path);
    ImageSequence recon = load_image_sequence(path, ex.recon_grid);
    const double s = ssim(recon, truth).mean;
    const double cov = mass_cov(recon, 0, recon.n_frames);
    std::ostringstream line;
    line << algo << ' ' << s << ' ' << cov;
    if (fs::exists(paths.flow(algo)) && recon.n_frames >= 3) {
      FlowField flow = load_flow_field(paths.flow(algo), ex.recon_grid);
      try {
        const Trajectory traj = extract_trajectory(recon, flow, 0, recon.n_frames);
        const CircleFit fit = fit_circle(traj.points);
        line << ' ' << fit.radius * 1e3;
      } catch (const std::exception&) {
        line << " -";
      }
    } else {
      line << " -";
    }
    out << line.str() << '\n';
    file << line.str() << '\n';
  }
}

namespace {

std::vector<double> log_grid(const std::vector<double>& spec_minmaxcount,
                             const std::string& key) {
  if (spec_minmaxcount.size() != 3)
    throw config_error("sweep key " + key + " must be 'min max count'");
  const double lo = spec_minmaxcount[0], hi = spec_minmaxcount[1];
  const int count = static_cast<int>(spec_minmaxcount[2]);
  if (!(lo > 0.0) || !(hi >= lo) || count < 1)
    throw config_error("sweep key " + key + ": need 0 < min <= max and count >= 1");
  std::vector<double> out;
  if (count == 1) return {lo};
  for (int i = 0; i < count; ++i)
    out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  return out;
}

}  // namespace

void cmd_sweep(const Config& cfg, std::ostream& out) {
  const Experiment ex = experiment_from_config(cfg);
  ProcessedData in = load_processed(cfg);
  ImageSequence truth = load_truth(cfg);
  const std::string algorithm = cfg.get_string("recon.algorithm", "joint_of_l1");

  struct Entry {
    double ssim_value;
    std::string description;
  };
  std::vector<Entry> entries;

  if (algorithm == "kaczmarz") {
    const auto lambdas = log_grid(
        cfg.get_list("sweep.kaczmarz_lambda").empty() ? std::vector<double>{0.1, 10.0, 3}
                                                      : cfg.get_list("sweep.kaczmarz_lambda"),
        "sweep.kaczmarz_lambda");
    for (double lambda : lambdas) {
      ImageSequence recon = kaczmarz_series(in.matrix, in.data, lambda, ex.kaczmarz_sweeps,
                                            ex.kaczmarz_positivity, ex.threads);
      entries.push_back({ssim(recon, truth).mean, "lambda=" + num_str(lambda)});
    }
  } else {
    const auto a1 = log_grid(cfg.get_list("sweep.alpha1").empty()
                                 ? std::vector<double>{ex.recon.alpha1, ex.recon.alpha1, 1}
                                 : cfg.get_list("sweep.alpha1"),
                             "sweep.alpha1");
    const auto a2 = log_grid(cfg.get_list("sweep.alpha2").empty()
                                 ? std::vector<double>{ex.recon.alpha2, ex.recon.alpha2, 1}
                                 : cfg.get_list("sweep.alpha2"),
                             "sweep.alpha2");
    const auto gammas = log_grid(cfg.get_list("sweep.gamma").empty()
                                     ? std::vector<double>{ex.recon.gamma, ex.recon.gamma, 1}
                                     : cfg.get_list("sweep.gamma"),
                                 "sweep.gamma");
    for (double alpha1 : a1)
      for (double alpha2 : a2)
        for (double gamma : gammas) {
          ReconProblem p = ex.recon;
          configure_algorithm(algorithm, p);
          p.alpha1 = alpha1;
          p.alpha2 = alpha2;
          p.gamma = gamma;
          MotionProblem mp = ex.motion;
          mp.parallelism = ex.threads;
          double value;
          if (algorithm == "spdhg_framewise") {
            value = ssim(reconstruct_framewise_spdhg(in.matrix, in.data, p), truth).mean;
          } else {
            value = ssim(alternate_joint(in.matrix, in.data, p, mp).images, truth).mean;
          }
          std::ostringstream desc;
          desc << "alpha1=" << alpha1 << " alpha2=" << alpha2 << " gamma=" << gamma;
          entries.push_back({value, desc.str()});
        }
  }

  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.ssim_value > b.ssim_value; });

  std::ofstream file(ex.out_dir + "/sweep_manifest.txt");
  out << "# rank ssim parameters (" << algorithm << ")\n";
  file << "# rank ssim parameters (" << algorithm << ")\n";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out << i + 1 << ' ' << entries[i].ssim_value << ' ' << entries[i].description << '\n';
    file << i + 1 << ' ' << entries[i].ssim_value << ' ' << entries[i].description << '\n';
  }
}

}  // namespace dynmpi
