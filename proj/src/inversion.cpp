#include "su11/inversion.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "su11/errors.hpp"

namespace su11::inversion {

namespace {

using json = nlohmann::ordered_json;
using simulation::NoiseMode;

// Per-row variance of the scaled moment f_k(y_i) implied by the record's
// noise model; zero for exact records. The DFT averages n_phi independent
// per-setting variances, and the y^{-k/2}/(1-y)^{q+1} scaling squares.
Eigen::VectorXd moment_noise_variances(const MeasurementRecord& record,
                                       const ReconstructionConfig& config, int k,
                                       const MomentTable& table) {
  const Eigen::Index n = table.y_values.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  const double tau_m = config.moment_noise
                           ? static_cast<double>(config.moment_noise->tau)
                           : static_cast<double>(record.noise.tau);
  if (config.moment_noise) {
    if (config.moment_noise->mode == NoiseMode::Exact) return w;
    for (Eigen::Index i = 0; i < n; ++i)
      w(i) = std::abs(table.f_values(i)) / (3.0 * tau_m);
    return w;
  }
  if (record.noise.mode == NoiseMode::Exact) return w;
  const double tau = static_cast<double>(record.noise.tau);
  const int n_phi = record.grid.n_phi;
  for (Eigen::Index i = 0; i < n; ++i) {
    double base = 0.0;
    for (int s = 0; s < n_phi; ++s) {
      const double v = record.values(i, s);
      base += record.noise.mode == NoiseMode::PhysicalShot
                  ? std::max(v * (1.0 - v), 0.0) / tau
                  : std::abs(v) / (3.0 * tau);
    }
    base /= static_cast<double>(n_phi) * static_cast<double>(n_phi);
    const double y = table.y_values(i);
    w(i) = base * std::exp(-k * std::log(y) - 2.0 * (table.q + 1) * std::log1p(-y));
  }
  return w;
}

json complex_vector_json(const Eigen::VectorXcd& v, bool imag) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    arr.push_back(imag ? v(i).imag() : v(i).real());
  return arr;
}

json real_vector_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

DesignProblem build_design(const MomentTable& moments, int degree) {
  const Eigen::Index n = moments.y_values.size();
  if (degree < 0) throw contract_error("build_design: negative degree");
  if (degree + 1 > n)
    throw contract_error("build_design: degree too high for the number of grid points");
  for (Eigen::Index i = 1; i < n; ++i)
    if (moments.y_values(i) <= moments.y_values(i - 1))
      throw contract_error("build_design: y grid must be strictly increasing");

  DesignProblem problem;
  problem.k = moments.k;
  problem.q = moments.q;
  problem.degree = degree;
  problem.design.resize(n, degree + 1);
  problem.design.col(0).setOnes();
  for (int j = 1; j <= degree; ++j)
    problem.design.col(j) = problem.design.col(j - 1).cwiseProduct(moments.y_values);
  problem.target = moments.f_values;
  return problem;
}

SvdSolution solve_svd(const DesignProblem& problem, double threshold) {
  if (threshold < 0.0) throw contract_error("solve_svd: negative threshold");
  if (!problem.design.allFinite() || !problem.target.allFinite())
    throw contract_error("solve_svd: non-finite design or target");
  const Eigen::Index n = problem.design.rows();
  const Eigen::Index m = problem.design.cols();
  if (problem.target.size() != n)
    throw contract_error("solve_svd: target length does not match design rows");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(problem.design,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw contract_error("solve_svd: SVD failed to converge");

  SvdSolution sol;
  sol.singular_values = svd.singularValues();
  int r = 0;
  while (r < static_cast<int>(m) && sol.singular_values(r) > threshold) ++r;
  sol.retained_count = r;

  const Eigen::MatrixXd u = svd.matrixU().leftCols(r);
  const Eigen::MatrixXd v = svd.matrixV().leftCols(r);
  const Eigen::VectorXd inv_sigma =
      sol.singular_values.head(r).cwiseInverse();

  const Eigen::VectorXd b_re = problem.target.real();
  const Eigen::VectorXd b_im = problem.target.imag();
  Eigen::VectorXd a_re = v * (inv_sigma.asDiagonal() * (u.transpose() * b_re));
  Eigen::VectorXd a_im = v * (inv_sigma.asDiagonal() * (u.transpose() * b_im));
  sol.coefficients.resize(m);
  sol.coefficients.real() = a_re;
  sol.coefficients.imag() = a_im;

  sol.variances = Eigen::VectorXd::Zero(m);
  for (int j = 0; j < static_cast<int>(m); ++j)
    for (int i = 0; i < r; ++i)
      sol.variances(j) += v(j, i) * v(j, i) * inv_sigma(i) * inv_sigma(i);

  sol.pinv_sq = (v * inv_sigma.asDiagonal() * u.transpose()).array().square();
  sol.chi_squared = (problem.design * a_re - b_re).squaredNorm() +
                    (problem.design * a_im - b_im).squaredNorm();
  return sol;
}

Eigen::VectorXcd extract_rho_band(const SvdSolution& solution, int k, int q) {
  const Eigen::Index m = solution.coefficients.size();
  Eigen::VectorXcd band(m);
  for (Eigen::Index i = 0; i < m; ++i)
    band(i) = solution.coefficients(i) /
              transforms::series_coefficient(static_cast<int>(i), k, q);
  return band;
}

ReconstructionReport reconstruct(const MeasurementRecord& record,
                                 const ReconstructionConfig& config) {
  if (config.n_max < 0) throw contract_error("reconstruct: negative n_max");
  if (config.moment_noise && record.noise.mode != NoiseMode::Exact)
    throw contract_error("reconstruct: moment-placement noise needs an exact record");

  const int n_max = config.n_max;
  const int q = record.q;
  const std::vector<double> y_vec = simulation::y_nodes(record.grid);
  const Eigen::VectorXd y =
      Eigen::Map<const Eigen::VectorXd>(y_vec.data(), static_cast<Eigen::Index>(y_vec.size()));
  const Eigen::Index n_rows = y.size();

  ReconstructionReport report;
  report.truncation_threshold = config.threshold;
  report.rho_hat.q = q;
  report.rho_hat.n_max = n_max;
  report.rho_hat.elements = Eigen::MatrixXcd::Zero(n_max + 1, n_max + 1);

  const int k_measured = config.assume_symmetry ? std::min(1, n_max) : n_max;
  for (int k = 0; k <= k_measured; ++k) {
    BandReport br;
    br.k = k;
    try {
      Eigen::VectorXcd g = transforms::dft_phase(record, k);
      MomentTable table = transforms::scale_to_moments(g, y, q, k);
      if (config.moment_noise)
        table = transforms::perturb_moments(table, *config.moment_noise);

      int degree;
      auto ov = config.degree_overrides.find(k);
      if (ov != config.degree_overrides.end()) {
        degree = ov->second;
      } else {
        degree = diagnostics::select_degree(table, config.policy, k, n_max,
                                            config.auto_settings);
      }
      degree = std::min<int>({degree, n_max - k, static_cast<int>(n_rows) - 1});
      if (degree < 0) throw contract_error("reconstruct: empty band");
      br.degree = degree;
      br.diag = diagnostics::diagnose(table, config.policy, k, n_max,
                                      config.auto_settings, degree);

      DesignProblem problem = build_design(table, degree);
      double threshold = config.threshold;
      if (config.relative_threshold) {
        Eigen::JacobiSVD<Eigen::MatrixXd> probe(problem.design);
        threshold *= probe.singularValues()(0);
      }
      br.solution = solve_svd(problem, threshold);
      br.band = extract_rho_band(br.solution, k, q);

      // Noise propagation through the truncated pseudo-inverse; falls back to
      // residual scaling when the record carries no noise model.
      const Eigen::VectorXd w = moment_noise_variances(record, config, k, table);
      const Eigen::Index m_count = br.band.size();
      br.band_sigma.resize(m_count);
      const double dof =
          std::max<double>(1.0, static_cast<double>(n_rows - br.solution.retained_count));
      const double s2 = br.solution.chi_squared / dof;
      for (Eigen::Index mi = 0; mi < m_count; ++mi) {
        double var_a = w.maxCoeff() > 0.0 ? br.solution.pinv_sq.row(mi).dot(w)
                                          : s2 * br.solution.variances(mi);
        const double b = transforms::series_coefficient(static_cast<int>(mi), k, q);
        br.band_sigma(mi) = std::sqrt(var_a) / b;
      }

      br.below_noise_floor =
          table.f_values.squaredNorm() <= 2.0 * w.sum() + 1e-20;
      br.not_estimated_from = degree < n_max - k ? degree + 1 : -1;

      for (int mi = 0; mi <= degree; ++mi) {
        if (k == 0) {
          // The diagonal estimate picks up a small imaginary part from noise;
          // keep the assembled matrix exactly Hermitian.
          report.rho_hat.elements(mi, mi) = br.band(mi).real();
        } else {
          report.rho_hat.elements(mi + k, mi) = br.band(mi);
          report.rho_hat.elements(mi, mi + k) = std::conj(br.band(mi));
        }
      }
      report.degrees_used[k] = degree;
    } catch (const std::exception& e) {
      br.error = e.what();
    }
    report.per_k.emplace(k, std::move(br));
  }

  // Symmetry fill: band 2j from the diagonal, band 2j+1 from the k=1 band.
  if (config.assume_symmetry && n_max >= 1) {
    const auto& diag_band = report.per_k.at(0);
    const auto& one_band = report.per_k.at(1);
    for (int k = 2; k <= n_max; ++k) {
      BandReport br;
      br.k = k;
      br.derived_from_symmetry = true;
      const int j = k / 2;
      const bool odd = (k % 2) != 0;
      const auto& source = odd ? one_band : diag_band;
      if (!source.error.empty()) {
        br.error = "symmetry source band failed: " + source.error;
        report.per_k.emplace(k, std::move(br));
        continue;
      }
      const int count = n_max - k + 1;
      br.band = Eigen::VectorXcd::Zero(count);
      br.band_sigma = Eigen::VectorXd::Zero(count);
      int filled = count;
      for (int mi = 0; mi < count; ++mi) {
        const int src = mi + j;
        if (src >= source.band.size()) {
          filled = std::min(filled, mi);
          continue;
        }
        br.band(mi) = source.band(src);
        br.band_sigma(mi) = source.band_sigma(src);
        report.rho_hat.elements(mi + k, mi) = br.band(mi);
        report.rho_hat.elements(mi, mi + k) = std::conj(br.band(mi));
      }
      br.degree = filled - 1;
      br.below_noise_floor = source.below_noise_floor;
      br.not_estimated_from = filled < count ? filled : -1;
      report.degrees_used[k] = br.degree;
      report.per_k.emplace(k, std::move(br));
    }
  }

  report.physicality.trace_re = report.rho_hat.elements.trace().real();
  report.physicality.trace_im = report.rho_hat.elements.trace().imag();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(report.rho_hat.elements,
                                                     Eigen::EigenvaluesOnly);
  report.physicality.min_eigenvalue =
      es.info() == Eigen::Success ? es.eigenvalues().minCoeff()
                                  : std::numeric_limits<double>::quiet_NaN();
  return report;
}

std::string report_to_json(const ReconstructionReport& report) {
  json doc;
  doc["rho_hat"] = json::parse(states::to_json(report.rho_hat));
  doc["truncation_threshold"] = report.truncation_threshold;
  doc["physicality"] = {{"trace_re", report.physicality.trace_re},
                        {"trace_im", report.physicality.trace_im},
                        {"min_eigenvalue", report.physicality.min_eigenvalue}};
  json per_k = json::array();
  for (const auto& [k, br] : report.per_k) {
    json entry;
    entry["k"] = k;
    if (!br.error.empty()) {
      entry["error"] = br.error;
      per_k.push_back(std::move(entry));
      continue;
    }
    entry["error"] = nullptr;
    entry["degree"] = br.degree;
    entry["derived_from_symmetry"] = br.derived_from_symmetry;
    if (!br.derived_from_symmetry) {
      entry["retained"] = br.solution.retained_count;
      entry["singular_values"] = real_vector_json(br.solution.singular_values);
      entry["variances"] = real_vector_json(br.solution.variances);
      entry["chi_squared"] = br.solution.chi_squared;
      entry["coefficients_re"] = complex_vector_json(br.solution.coefficients, false);
      entry["coefficients_im"] = complex_vector_json(br.solution.coefficients, true);
    }
    entry["band_re"] = complex_vector_json(br.band, false);
    entry["band_im"] = complex_vector_json(br.band, true);
    entry["band_sigma"] = real_vector_json(br.band_sigma);
    entry["below_noise_floor"] = br.below_noise_floor;
    if (br.not_estimated_from >= 0)
      entry["not_estimated_from"] = br.not_estimated_from;
    else
      entry["not_estimated_from"] = nullptr;
    if (br.diag) {
      json d;
      d["seq_sum_squares"] = real_vector_json(br.diag->seq_sum_squares);
      d["sign_changes"] = br.diag->sign_changes;
      d["selected_degree"] = br.diag->selected_degree;
      d["policy"] = diagnostics::policy_name(br.diag->policy);
      d["fallback"] = br.diag->fallback;
      entry["diagnostics"] = std::move(d);
    }
    per_k.push_back(std::move(entry));
  }
  doc["per_k"] = std::move(per_k);
  json degrees = json::object();
  for (const auto& [k, d] : report.degrees_used) degrees[std::to_string(k)] = d;
  doc["degrees_used"] = std::move(degrees);
  return doc.dump(2) + "\n";
}

void save_report(const ReconstructionReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << report_to_json(report);
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace su11::inversion
