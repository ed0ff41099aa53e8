#pragma once

#include <map>
#include <string>
#include <vector>

#include "su11/inversion.hpp"

namespace su11::experiment {

using inversion::ReconstructionReport;
using simulation::GridSpec;
using simulation::MeasurementRecord;
using simulation::NoiseSpec;
using states::DensityMatrix;
using states::StateParams;

// Where seeded perturbations enter the pipeline. Surface perturbs the
// simulated probabilities themselves; Moment leaves the record exact and
// perturbs the scaled moment tables instead, which is the level the
// polynomial fit actually consumes.
enum class NoisePlacement { Surface, Moment };

std::string placement_name(NoisePlacement placement);

struct ExperimentConfig {
  StateParams state;
  int n_max = 10;
  GridSpec grid;
  NoiseSpec noise;
  NoisePlacement placement = NoisePlacement::Surface;
  double threshold = 0.1;
  bool relative_threshold = false;
  diagnostics::DegreePolicy policy = diagnostics::DegreePolicy::PaperFixed;
  std::map<int, int> degree_overrides;
  bool assume_symmetry = false;
  diagnostics::AutoSettings auto_settings;
  std::string output_dir = "out";
};

// Single-document JSON config. "noise.mode" accepts "exact", "shot", "paper"
// (all surface placement) and "moment" (paper-style perturbation applied to
// the moment tables). Complex state parameters are a number or {"re","im"}.
// A "degrees" array is expanded to per-k overrides, repeating its last entry.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

// Non-fatal advisories, currently the alias bound: n_phi < 2 n_max + 1 means
// bands beyond the cutoff fold back onto measured ones.
std::vector<std::string> config_warnings(const ExperimentConfig& config);

inversion::ReconstructionConfig reconstruction_config(const ExperimentConfig& config);

struct PipelineResult {
  DensityMatrix rho_exact;
  MeasurementRecord record;  // the record the inversion consumed
  ReconstructionReport report;
};

// simulate -> perturb -> reconstruct, no file output.
PipelineResult run_pipeline(const ExperimentConfig& config);

// run_pipeline plus the artifact set under output_dir: record.json and
// record.csv, moments_q{q}_k{k}.csv for every measured band (the perturbed
// tables under moment placement), report.json, and the three figure tables
// fig_exact.csv, fig_reconstructed.csv, fig_difference.csv as (m, n, value)
// triples of real parts. Re-runs with the same config are byte-identical.
ReconstructionReport run_experiment(const ExperimentConfig& config);

struct EnsembleBandStats {
  int k = 0;
  int degree = 0;
  int retained = 0;
  int n_runs = 0;                   // seeds that produced this band
  double mean_residual_variance = 0.0;  // mean over seeds of chi^2 / (N - retained)
  Eigen::VectorXd empirical;        // per-coefficient variance across seeds
  Eigen::VectorXd predicted;        // variances[j] * mean_residual_variance
};

struct EnsembleSummary {
  int n_seeds = 0;
  std::uint64_t first_seed = 0;
  Eigen::MatrixXd mean_error;  // mean over seeds of |rho_hat - rho|
  Eigen::MatrixXd rms_error;   // sqrt(mean over seeds of |rho_hat - rho|^2)
  std::map<int, EnsembleBandStats> per_k;
};

// Repeats the pipeline over noise seeds seed+0 .. seed+n_seeds-1 and compares
// the spread of the fitted coefficients against the propagated-variance
// formula. Writes ensemble_mean_error.csv, ensemble_rms_error.csv,
// ensemble_variance_k{k}.csv and ensemble_summary.json under output_dir.
EnsembleSummary run_ensemble(const ExperimentConfig& config, int n_seeds);

}  // namespace su11::experiment
