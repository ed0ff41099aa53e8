// Command-line front end: simulate records, reconstruct density matrices,
// print degree diagnostics, run the full pipeline, or sweep noise seeds.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "su11/errors.hpp"
#include "su11/experiment.hpp"

namespace fs = std::filesystem;
using namespace su11;

namespace {

// Exit codes: 1 usage or config, 2 I/O, 3 contract or numeric failure.
struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOpts {
  std::string config_path;
  std::string output;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  std::string noise_mode;
  std::string degree_policy;
  bool assume_symmetry = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config JSON");
  cmd->add_option("--seed", opts.seed, "noise seed (overrides config)");
  cmd->add_option("--output", opts.output, "output directory (overrides config)");
  cmd->add_flag("--assume-symmetry", opts.assume_symmetry,
                "measure k=0,1 only and fill the rest by symmetry");
  cmd->add_option("--noise-mode", opts.noise_mode, "exact, shot, paper, or moment");
  cmd->add_option("--threshold", opts.threshold, "singular value truncation threshold");
  cmd->add_option("--degree-policy", opts.degree_policy, "auto, paper, or fixed:<d0,d1,...>");
}

void apply_degree_policy(experiment::ExperimentConfig& config, const std::string& text) {
  if (text == "auto") {
    config.policy = diagnostics::DegreePolicy::Auto;
    return;
  }
  if (text == "paper") {
    config.policy = diagnostics::DegreePolicy::PaperFixed;
    return;
  }
  if (text.rfind("fixed:", 0) == 0) {
    config.policy = diagnostics::DegreePolicy::UserFixed;
    std::vector<int> degrees;
    std::string rest = text.substr(6);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const std::size_t comma = rest.find(',', pos);
      const std::string item = rest.substr(pos, comma == std::string::npos
                                                    ? std::string::npos
                                                    : comma - pos);
      try {
        std::size_t used = 0;
        const int d = std::stoi(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        degrees.push_back(d);
      } catch (const std::exception&) {
        throw usage_error("bad degree list entry '" + item + "' in --degree-policy");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (degrees.empty()) throw usage_error("empty degree list in --degree-policy");
    // A short list repeats its last entry for the remaining bands.
    config.degree_overrides.clear();
    for (int k = 0; k <= config.n_max; ++k) {
      const std::size_t idx =
          std::min<std::size_t>(static_cast<std::size_t>(k), degrees.size() - 1);
      config.degree_overrides[k] = degrees[idx];
    }
    return;
  }
  throw usage_error("unknown --degree-policy '" + text + "'");
}

experiment::ExperimentConfig build_config(const CommonOpts& opts, bool allow_surface_noise) {
  experiment::ExperimentConfig config;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path, std::ios::binary);
    if (!in) throw io_error("cannot open config: " + opts.config_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
      config = experiment::config_from_json(buf.str());
    } catch (const std::exception& e) {
      throw usage_error(e.what());
    }
  }
  if (opts.seed) config.noise.seed = *opts.seed;
  if (!opts.output.empty()) config.output_dir = opts.output;
  if (opts.assume_symmetry) config.assume_symmetry = true;
  if (opts.threshold) config.threshold = *opts.threshold;
  if (!opts.noise_mode.empty()) {
    if (opts.noise_mode == "moment") {
      config.placement = experiment::NoisePlacement::Moment;
      config.noise.mode = simulation::NoiseMode::PaperLiteral;
    } else if (allow_surface_noise) {
      config.placement = experiment::NoisePlacement::Surface;
      try {
        config.noise.mode = simulation::mode_from_name(opts.noise_mode);
      } catch (const std::exception&) {
        throw usage_error("unknown --noise-mode '" + opts.noise_mode + "'");
      }
    } else {
      throw usage_error("this subcommand only accepts --noise-mode moment; "
                        "surface noise is already part of the record");
    }
  }
  if (!opts.degree_policy.empty()) apply_degree_policy(config, opts.degree_policy);
  for (const std::string& w : experiment::config_warnings(config))
    std::cerr << "warning: " << w << "\n";
  return config;
}

int cmd_simulate(const CommonOpts& opts) {
  const experiment::ExperimentConfig config = build_config(opts, true);
  const states::DensityMatrix rho = states::make_state(config.state, config.n_max);
  simulation::MeasurementRecord record =
      simulation::sample_exact(rho, config.state.charge, config.grid);
  if (config.placement == experiment::NoisePlacement::Surface &&
      config.noise.mode != simulation::NoiseMode::Exact)
    record = simulation::add_noise(record, config.noise);

  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw io_error("cannot create output directory: " + config.output_dir);
  const fs::path dir(config.output_dir);
  simulation::save_record(record, (dir / "record.json").string());
  simulation::save_record_csv(record, (dir / "record.csv").string());
  states::save_density(rho, (dir / "state.json").string());
  std::printf("wrote %s\n", (dir / "record.json").string().c_str());
  std::printf("wrote %s\n", (dir / "record.csv").string().c_str());
  std::printf("wrote %s\n", (dir / "state.json").string().c_str());
  return 0;
}

int cmd_reconstruct(const CommonOpts& opts, const std::string& record_path) {
  const experiment::ExperimentConfig config = build_config(opts, false);
  const simulation::MeasurementRecord record = simulation::load_record(record_path);
  const inversion::ReconstructionConfig rc = experiment::reconstruction_config(config);
  const inversion::ReconstructionReport report = inversion::reconstruct(record, rc);

  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw io_error("cannot create output directory: " + config.output_dir);
  const fs::path dir(config.output_dir);
  inversion::save_report(report, (dir / "report.json").string());
  std::printf("wrote %s\n", (dir / "report.json").string().c_str());
  std::printf("trace = %.6g%+.6gi, min eigenvalue = %.6g\n", report.physicality.trace_re,
              report.physicality.trace_im, report.physicality.min_eigenvalue);
  for (const auto& [k, br] : report.per_k)
    if (!br.error.empty()) std::printf("band k=%d failed: %s\n", k, br.error.c_str());
  return 0;
}

int cmd_diagnose(const CommonOpts& opts, const std::string& record_path) {
  const experiment::ExperimentConfig config = build_config(opts, false);
  const simulation::MeasurementRecord record = simulation::load_record(record_path);
  const inversion::ReconstructionConfig rc = experiment::reconstruction_config(config);

  const std::vector<double> y_vec = simulation::y_nodes(record.grid);
  const Eigen::VectorXd y =
      Eigen::Map<const Eigen::VectorXd>(y_vec.data(), static_cast<Eigen::Index>(y_vec.size()));
  const int k_max = config.assume_symmetry ? std::min(1, config.n_max) : config.n_max;

  std::printf("%3s %6s %8s %8s %10s  %s\n", "k", "degree", "policy", "fallback",
              "sign_chg", "S(m), m=1..");
  for (int k = 0; k <= k_max; ++k) {
    Eigen::VectorXcd g = transforms::dft_phase(record, k);
    transforms::MomentTable table = transforms::scale_to_moments(g, y, record.q, k);
    if (rc.moment_noise) table = transforms::perturb_moments(table, *rc.moment_noise);
    int user_degree = -1;
    auto it = rc.degree_overrides.find(k);
    if (it != rc.degree_overrides.end()) user_degree = it->second;
    const diagnostics::DiagnosticsReport diag =
        diagnostics::diagnose(table, rc.policy, k, config.n_max, rc.auto_settings,
                              user_degree);
    const int sc = diag.selected_degree < static_cast<int>(diag.sign_changes.size())
                       ? diag.sign_changes[static_cast<std::size_t>(diag.selected_degree)]
                       : -1;
    std::printf("%3d %6d %8s %8s %10d  ", k, diag.selected_degree,
                diagnostics::policy_name(diag.policy), diag.fallback ? "yes" : "no", sc);
    for (Eigen::Index m = 0; m < diag.seq_sum_squares.size(); ++m)
      std::printf("%.3e ", diag.seq_sum_squares(m));
    std::printf("\n");
  }
  return 0;
}

int cmd_run(const CommonOpts& opts) {
  const experiment::ExperimentConfig config = build_config(opts, true);
  const states::DensityMatrix rho = states::make_state(config.state, config.n_max);
  const inversion::ReconstructionReport report = experiment::run_experiment(config);
  const double max_err = (report.rho_hat.elements - rho.elements).cwiseAbs().maxCoeff();
  std::printf("wrote artifact set under %s\n", config.output_dir.c_str());
  std::printf("max |rho_hat - rho| = %.6g\n", max_err);
  std::printf("trace = %.6g%+.6gi, min eigenvalue = %.6g\n", report.physicality.trace_re,
              report.physicality.trace_im, report.physicality.min_eigenvalue);
  return 0;
}

int cmd_ensemble(const CommonOpts& opts, int n_seeds) {
  const experiment::ExperimentConfig config = build_config(opts, true);
  const experiment::EnsembleSummary summary = experiment::run_ensemble(config, n_seeds);
  std::printf("ran %d seeds starting at %llu\n", summary.n_seeds,
              static_cast<unsigned long long>(summary.first_seed));
  std::printf("max mean |error| = %.6g, max rms error = %.6g\n",
              summary.mean_error.maxCoeff(), summary.rms_error.maxCoeff());
  for (const auto& [k, stats] : summary.per_k) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (Eigen::Index j = 0; j < stats.empirical.size(); ++j) {
      if (stats.predicted(j) <= 0.0) continue;
      const double r = stats.empirical(j) / stats.predicted(j);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    std::printf("k=%d: retained %d of degree %d, empirical/predicted in [%.3g, %.3g]\n",
                k, stats.retained, stats.degree, lo, hi);
  }
  std::printf("wrote ensemble tables under %s\n", config.output_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-mode state reconstruction from amplifier probability data"};
  app.require_subcommand(1);

  CommonOpts sim_opts, rec_opts, diag_opts, run_opts, ens_opts;
  std::string rec_record, diag_record;
  int n_seeds = 50;

  CLI::App* sim = app.add_subcommand("simulate", "state -> measurement record files");
  add_common(sim, sim_opts);

  CLI::App* rec = app.add_subcommand("reconstruct", "record file -> reconstruction report");
  add_common(rec, rec_opts);
  rec->add_option("record", rec_record, "measurement record JSON")->required();

  CLI::App* diag = app.add_subcommand("diagnose", "record file -> per-band degree table");
  add_common(diag, diag_opts);
  diag->add_option("record", diag_record, "measurement record JSON")->required();

  CLI::App* run = app.add_subcommand("run", "full simulate -> reconstruct pipeline");
  add_common(run, run_opts);

  CLI::App* ens = app.add_subcommand("ensemble", "pipeline swept over noise seeds");
  add_common(ens, ens_opts);
  ens->add_option("--n-seeds", n_seeds, "number of consecutive seeds")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
    if (app.got_subcommand(sim)) return cmd_simulate(sim_opts);
    if (app.got_subcommand(rec)) return cmd_reconstruct(rec_opts, rec_record);
    if (app.got_subcommand(diag)) return cmd_diagnose(diag_opts, diag_record);
    if (app.got_subcommand(run)) return cmd_run(run_opts);
    if (app.got_subcommand(ens)) return cmd_ensemble(ens_opts, n_seeds);
    std::cerr << "error: no subcommand given\n";
    return 1;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
