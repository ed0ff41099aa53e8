#pragma once

#include <map>
#include <optional>
#include <string>

#include "su11/diagnostics.hpp"

namespace su11::inversion {

using simulation::MeasurementRecord;
using simulation::NoiseSpec;
using states::Complex;
using states::DensityMatrix;
using transforms::MomentTable;

// Polynomial regression instance for one moment band: G_ij = y_i^{j-1}
// (monomial basis on the raw grid), target f_k(q, y_i).
struct DesignProblem {
  int k = 0;
  int q = 0;
  int degree = 0;  // M - 1
  Eigen::MatrixXd design;
  Eigen::VectorXcd target;
};

struct SvdSolution {
  Eigen::VectorXcd coefficients;
  Eigen::VectorXd variances;        // sum over retained modes of v_ji^2 / sigma_i^2
  Eigen::VectorXd singular_values;  // descending
  int retained_count = 0;
  double chi_squared = 0.0;
  // Squared entries of the truncated pseudo-inverse rows (M x N); row j gives
  // the exact noise propagation Var(a_j) = sum_i pinv_sq(j, i) * Var(b_i).
  Eigen::MatrixXd pinv_sq;
};

DesignProblem build_design(const MomentTable& moments, int degree);

// Thin SVD of the real design matrix; modes with sigma_i > threshold are
// retained and the truncated pseudo-inverse is applied separately to the real
// and imaginary parts of the target. chi_squared = |G a - b|^2.
SvdSolution solve_svd(const DesignProblem& problem, double threshold);

// rho_{m+k,m}(q) = a_{m+1} / B_mk(q) for m = 0..degree.
Eigen::VectorXcd extract_rho_band(const SvdSolution& solution, int k, int q);

struct BandReport {
  int k = 0;
  int degree = 0;
  SvdSolution solution;
  Eigen::VectorXcd band;       // rho_{m+k,m}
  Eigen::VectorXd band_sigma;  // propagated standard deviation per element
  bool below_noise_floor = false;
  int not_estimated_from = -1;  // first m with no estimate; -1 when the band is full
  bool derived_from_symmetry = false;
  std::string error;  // nonempty when this band failed; other bands continue
  std::optional<diagnostics::DiagnosticsReport> diag;
};

struct Physicality {
  double trace_re = 0.0;
  double trace_im = 0.0;
  double min_eigenvalue = 0.0;
};

struct ReconstructionConfig {
  int n_max = 10;
  double threshold = 0.1;
  bool relative_threshold = false;  // interpret threshold as a fraction of sigma_1
  diagnostics::DegreePolicy policy = diagnostics::DegreePolicy::PaperFixed;
  std::map<int, int> degree_overrides;  // per-k degrees, applied over any policy
  bool assume_symmetry = false;         // measure k = 0, 1 and fill the rest
  diagnostics::AutoSettings auto_settings;
  // When set, noise enters at the moment level: the record is taken as exact
  // and each moment table is perturbed by R g sqrt(|f|/tau) instead.
  std::optional<NoiseSpec> moment_noise;
};

struct ReconstructionReport {
  DensityMatrix rho_hat;
  std::map<int, BandReport> per_k;
  std::map<int, int> degrees_used;
  double truncation_threshold = 0.0;
  Physicality physicality;
};

// Full inversion: for each k, DFT -> scaling -> degree selection -> truncated
// SVD solve -> band extraction; k < 0 filled by conjugation. Per-band failures
// are recorded in the report and do not abort the remaining bands.
ReconstructionReport reconstruct(const MeasurementRecord& record,
                                 const ReconstructionConfig& config);

std::string report_to_json(const ReconstructionReport& report);
void save_report(const ReconstructionReport& report, const std::string& path);

}  // namespace su11::inversion
