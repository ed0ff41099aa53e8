#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <json.hpp>
#include <limits>

#include "su11/errors.hpp"
#include "su11/inversion.hpp"

using namespace su11;
using inversion::ReconstructionConfig;
using inversion::ReconstructionReport;
using simulation::GridSpec;
using simulation::MeasurementRecord;
using simulation::NoiseMode;
using simulation::NoiseSpec;
using states::Complex;
using states::DensityMatrix;
using transforms::MomentTable;

namespace {

MomentTable table_from(const Eigen::VectorXd& y, const Eigen::VectorXcd& f, int q = 0,
                       int k = 0) {
  MomentTable table;
  table.q = q;
  table.k = k;
  table.y_values = y;
  table.f_values = f;
  return table;
}

Eigen::VectorXd default_y() {
  const std::vector<double> y = simulation::y_nodes(GridSpec{});
  return Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
}

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

// Direct binomial-ratio route to the series coefficient, for cross-checking
// the band extraction at small indices.
double series_coeff_direct(int m, int k, int q) {
  auto fact = [](int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
  };
  return std::sqrt(fact(m + k + q) * fact(m + q) / (fact(m) * fact(m + k))) / fact(q);
}

}  // namespace

TEST_CASE("design matrix holds raw monomials") {
  Eigen::VectorXd y(3);
  y << 0.1, 0.5, 0.9;
  Eigen::VectorXcd f = Eigen::VectorXcd::Zero(3);
  const inversion::DesignProblem p = inversion::build_design(table_from(y, f, 2, 1), 2);
  CHECK(p.q == 2);
  CHECK(p.k == 1);
  CHECK(p.degree == 2);
  CHECK(p.design.rows() == 3);
  CHECK(p.design.cols() == 3);
  const double expected[3][3] = {{1.0, 0.1, 0.01}, {1.0, 0.5, 0.25}, {1.0, 0.9, 0.81}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(p.design(i, j) == doctest::Approx(expected[i][j]).epsilon(1e-15));

  const inversion::DesignProblem constant = inversion::build_design(table_from(y, f), 0);
  CHECK(constant.design.cols() == 1);
  CHECK((constant.design.col(0).array() == 1.0).all());
}

TEST_CASE("design construction rejects bad input") {
  Eigen::VectorXd y(3);
  y << 0.1, 0.5, 0.9;
  const Eigen::VectorXcd f = Eigen::VectorXcd::Zero(3);
  CHECK_THROWS_AS(inversion::build_design(table_from(y, f), 3), contract_error);
  CHECK_THROWS_AS(inversion::build_design(table_from(y, f), -1), contract_error);
  Eigen::VectorXd flat(3);
  flat << 0.1, 0.1, 0.9;
  CHECK_THROWS_AS(inversion::build_design(table_from(flat, f), 1), contract_error);
  Eigen::VectorXd down(3);
  down << 0.9, 0.5, 0.1;
  CHECK_THROWS_AS(inversion::build_design(table_from(down, f), 1), contract_error);
}

TEST_CASE("monomial design on the standard grid is severely ill-conditioned") {
  const Eigen::VectorXd y = default_y();
  const Eigen::VectorXcd f = Eigen::VectorXcd::Zero(y.size());
  const inversion::DesignProblem p = inversion::build_design(table_from(y, f), 10);
  const inversion::SvdSolution sol = inversion::solve_svd(p, 0.0);
  CHECK(sol.singular_values(0) / sol.singular_values(10) > 1e6);
}

TEST_CASE("untruncated solve matches the normal equations") {
  const Eigen::VectorXd y = default_y();
  Eigen::VectorXcd f(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i)
    f(i) = Complex(std::exp(-y(i)), 0.2 * std::sin(2.0 * y(i)));
  const inversion::DesignProblem p = inversion::build_design(table_from(y, f), 3);
  const inversion::SvdSolution sol = inversion::solve_svd(p, 0.0);
  CHECK(sol.retained_count == 4);

  const Eigen::MatrixXd gtg = p.design.transpose() * p.design;
  const Eigen::VectorXd a_re = gtg.ldlt().solve(p.design.transpose() * f.real());
  const Eigen::VectorXd a_im = gtg.ldlt().solve(p.design.transpose() * f.imag());
  for (int j = 0; j < 4; ++j) {
    CHECK(std::abs(sol.coefficients(j).real() - a_re(j)) < 1e-10);
    CHECK(std::abs(sol.coefficients(j).imag() - a_im(j)) < 1e-10);
  }
  // chi^2 equals the explicit residual of the returned coefficients.
  const Eigen::VectorXcd r = p.design * sol.coefficients - f;
  CHECK(sol.chi_squared == doctest::Approx(r.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("consistent systems are recovered exactly") {
  const Eigen::VectorXd y = default_y();
  Eigen::VectorXcd a_true(5);
  a_true << Complex(0.4, -0.3), Complex(-1.0, 0.1), Complex(2.5, 0.0), Complex(0.0, 1.5),
      Complex(-0.7, 0.2);
  Eigen::VectorXcd f = Eigen::VectorXcd::Zero(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    Complex acc(0.0, 0.0);
    double p = 1.0;
    for (int j = 0; j < 5; ++j) {
      acc += a_true(j) * p;
      p *= y(i);
    }
    f(i) = acc;
  }
  const inversion::DesignProblem p = inversion::build_design(table_from(y, f), 4);
  const inversion::SvdSolution sol = inversion::solve_svd(p, 0.0);
  CHECK((sol.coefficients - a_true).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(sol.chi_squared < 1e-20);
}

TEST_CASE("degree-6 spectrum on the standard grid") {
  // Reference singular values computed independently for the 101-point
  // monomial design on y in [0.1, 0.9].
  const double expected[7] = {12.2716, 4.00265, 0.964488, 0.176915,
                              0.0245331, 0.00247435, 0.00015933};
  const Eigen::VectorXd y = default_y();
  const Eigen::VectorXcd f = Eigen::VectorXcd::Zero(y.size());
  const inversion::DesignProblem p = inversion::build_design(table_from(y, f), 6);
  const inversion::SvdSolution sol = inversion::solve_svd(p, 0.1);
  REQUIRE(sol.singular_values.size() == 7);
  for (int i = 0; i < 7; ++i)
    CHECK(sol.singular_values(i) == doctest::Approx(expected[i]).epsilon(5e-4));
  CHECK(sol.retained_count == 4);
}

TEST_CASE("raising the truncation threshold trades variance for bias") {
  const Eigen::VectorXd y = default_y();
  Eigen::VectorXcd f(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i)
    f(i) = Complex(1.0 / (1.0 + y(i)), 0.1 * y(i) * y(i));
  const inversion::DesignProblem p = inversion::build_design(table_from(y, f), 6);
  const double thresholds[4] = {0.0, 0.05, 0.2, 1.0};
  int last_retained = 8;
  double last_chi2 = -1.0;
  Eigen::VectorXd last_var;
  for (double t : thresholds) {
    const inversion::SvdSolution sol = inversion::solve_svd(p, t);
    CHECK(sol.retained_count <= last_retained);
    CHECK(sol.chi_squared >= last_chi2);
    if (last_var.size() > 0)
      for (int j = 0; j < 7; ++j) CHECK(sol.variances(j) <= last_var(j) + 1e-18);
    last_retained = sol.retained_count;
    last_chi2 = sol.chi_squared;
    last_var = sol.variances;
  }
}

TEST_CASE("singular spectrum does not depend on the target") {
  const Eigen::VectorXd y = default_y();
  Eigen::VectorXcd f1(y.size()), f2(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    f1(i) = Complex(y(i), -y(i));
    f2(i) = Complex(std::cos(3.0 * y(i)), 0.7);
  }
  const inversion::SvdSolution s1 =
      inversion::solve_svd(inversion::build_design(table_from(y, f1), 5), 0.0);
  const inversion::SvdSolution s2 =
      inversion::solve_svd(inversion::build_design(table_from(y, f2), 5), 0.0);
  CHECK((s1.singular_values.array() == s2.singular_values.array()).all());
}

TEST_CASE("non-finite targets and bad thresholds are rejected") {
  const Eigen::VectorXd y = default_y();
  Eigen::VectorXcd f = Eigen::VectorXcd::Zero(y.size());
  f(3) = Complex(std::numeric_limits<double>::quiet_NaN(), 0.0);
  CHECK_THROWS_AS(inversion::solve_svd(inversion::build_design(table_from(y, f), 2), 0.0),
                  contract_error);
  Eigen::VectorXcd ok = Eigen::VectorXcd::Zero(y.size());
  CHECK_THROWS_AS(inversion::solve_svd(inversion::build_design(table_from(y, ok), 2), -0.1),
                  contract_error);
}

TEST_CASE("band extraction divides out the series coefficients") {
  inversion::SvdSolution sol;
  sol.coefficients.resize(3);
  sol.coefficients << Complex(1.0, 2.0), Complex(-0.5, 0.0), Complex(0.0, 0.25);

  // For zero charge the series coefficients are exactly 1 and the band is the
  // coefficient vector itself.
  const Eigen::VectorXcd plain = inversion::extract_rho_band(sol, 4, 0);
  for (int m = 0; m < 3; ++m) CHECK(plain(m) == sol.coefficients(m));

  const Eigen::VectorXcd band = inversion::extract_rho_band(sol, 2, 1);
  for (int m = 0; m < 3; ++m) {
    const Complex expected = sol.coefficients(m) / series_coeff_direct(m, 2, 1);
    CHECK(std::abs(band(m) - expected) < 1e-14 * (1.0 + std::abs(expected)));
  }
}

TEST_CASE("one exact band round-trips through transform, solve, and extraction") {
  const int n_max = 10;
  const int k = 2;
  const DensityMatrix rho = states::state_pair_coherent({3.0, 0.0}, 0, n_max);
  const GridSpec grid{0.1, 0.9, 101, 21};
  const MeasurementRecord record = simulation::sample_exact(rho, 0, grid);
  const Eigen::VectorXd y = default_y();

  const Eigen::VectorXcd g = transforms::dft_phase(record, k);
  const MomentTable table = transforms::scale_to_moments(g, y, 0, k);
  const inversion::DesignProblem p = inversion::build_design(table, n_max - k);
  const inversion::SvdSolution sol = inversion::solve_svd(p, 0.0);
  const Eigen::VectorXcd band = inversion::extract_rho_band(sol, k, 0);
  for (int m = 0; m + k <= n_max; ++m)
    CHECK(std::abs(band(m) - rho.elements(m + k, m)) < 1e-8);
}

TEST_CASE("exact vacuum record reconstructs to the vacuum") {
  states::StateParams params;
  params.family = states::StateFamily::Custom;
  params.charge = 1;
  params.custom_coeffs = Eigen::VectorXcd::Ones(1);
  const DensityMatrix rho = states::make_state(params, 4);
  const MeasurementRecord record = simulation::sample_exact(rho, 1, GridSpec{0.1, 0.9, 41, 11});

  ReconstructionConfig config;
  config.n_max = 4;
  config.threshold = 0.0;
  const ReconstructionReport report = inversion::reconstruct(record, config);
  CHECK(std::abs(report.rho_hat.elements(0, 0) - Complex(1.0, 0.0)) < 1e-10);
  Eigen::MatrixXcd rest = report.rho_hat.elements;
  rest(0, 0) = 0.0;
  CHECK(max_abs(rest) < 1e-10);
  CHECK(report.degrees_used.at(0) == 4);  // preset capped by the band length
  CHECK(report.degrees_used.at(1) == 3);
  CHECK(report.degrees_used.at(4) == 0);
  CHECK(report.physicality.trace_im == 0.0);
}

TEST_CASE("exact group coherent record reconstructs to high accuracy") {
  const int n_max = 10;
  const DensityMatrix rho = states::state_perelomov({0.6, 0.0}, 0, n_max);
  const MeasurementRecord record =
      simulation::sample_exact(rho, 0, GridSpec{0.1, 0.9, 101, 21});

  ReconstructionConfig config;
  config.n_max = n_max;
  config.threshold = 0.0;
  for (int k = 0; k <= n_max; ++k) config.degree_overrides[k] = n_max - k;
  const ReconstructionReport report = inversion::reconstruct(record, config);
  CHECK(max_abs(report.rho_hat.elements - rho.elements) < 1e-6);
  CHECK(report.physicality.trace_re == doctest::Approx(rho.elements.trace().real()).epsilon(1e-8));
  CHECK(report.physicality.min_eigenvalue > -1e-7);
  for (int k = 0; k <= n_max; ++k) {
    CHECK(report.per_k.at(k).error.empty());
    CHECK_FALSE(report.per_k.at(k).below_noise_floor);
  }
}

TEST_CASE("reconstruction from perturbed moments stays close to the state") {
  const int n_max = 10;
  const DensityMatrix rho = states::state_pair_coherent({3.0, 0.0}, 0, n_max);
  const MeasurementRecord record =
      simulation::sample_exact(rho, 0, GridSpec{0.1, 0.9, 101, 21});

  ReconstructionConfig config;
  config.n_max = n_max;
  config.threshold = 0.1;
  config.moment_noise = NoiseSpec{NoiseMode::PaperLiteral, 20000, 7};
  const ReconstructionReport report = inversion::reconstruct(record, config);
  CHECK(max_abs(report.rho_hat.elements - rho.elements) < 0.1);
  CHECK(report.degrees_used.at(0) == 6);
  CHECK(report.degrees_used.at(1) == 5);
  CHECK(report.degrees_used.at(3) == 4);
  CHECK(report.degrees_used.at(10) == 0);
  CHECK(report.per_k.at(0).solution.retained_count == 4);
  // Propagated uncertainties are positive once noise is present.
  for (Eigen::Index m = 0; m < report.per_k.at(0).band_sigma.size(); ++m)
    CHECK(report.per_k.at(0).band_sigma(m) > 0.0);
}

TEST_CASE("assembled estimate is exactly Hermitian even under noise") {
  const int n_max = 8;
  const DensityMatrix rho = states::state_perelomov({0.55, -0.2}, 0, n_max);
  const MeasurementRecord record =
      simulation::sample_exact(rho, 0, GridSpec{0.1, 0.9, 101, 21});
  ReconstructionConfig config;
  config.n_max = n_max;
  config.moment_noise = NoiseSpec{NoiseMode::PaperLiteral, 20000, 5};
  const ReconstructionReport report = inversion::reconstruct(record, config);
  CHECK(max_abs(report.rho_hat.elements - report.rho_hat.elements.adjoint()) == 0.0);
  CHECK(report.physicality.trace_im == 0.0);
}

TEST_CASE("relative threshold scales with the leading singular value") {
  const int n_max = 10;
  const DensityMatrix rho = states::state_pair_coherent({3.0, 0.0}, 0, n_max);
  const MeasurementRecord record =
      simulation::sample_exact(rho, 0, GridSpec{0.1, 0.9, 101, 21});
  ReconstructionConfig config;
  config.n_max = n_max;
  config.threshold = 0.01;  // 0.01 * sigma_1 = 0.123 on the degree-6 design
  config.relative_threshold = true;
  const ReconstructionReport report = inversion::reconstruct(record, config);
  CHECK(report.per_k.at(0).solution.retained_count == 4);
}

TEST_CASE("symmetry fill reproduces the direct reconstruction for a symmetric state") {
  const int n_max = 10;
  const DensityMatrix rho = states::state_perelomov({0.6, 0.0}, 0, n_max);
  const MeasurementRecord record =
      simulation::sample_exact(rho, 0, GridSpec{0.1, 0.9, 101, 21});

  ReconstructionConfig config;
  config.n_max = n_max;
  config.threshold = 0.0;
  config.degree_overrides[0] = n_max;
  config.degree_overrides[1] = n_max - 1;
  config.assume_symmetry = true;
  const ReconstructionReport report = inversion::reconstruct(record, config);
  CHECK(max_abs(report.rho_hat.elements - rho.elements) < 1e-6);

  const auto& b2 = report.per_k.at(2);
  CHECK(b2.derived_from_symmetry);
  CHECK(b2.error.empty());
  CHECK(b2.not_estimated_from == -1);
  CHECK(b2.band.size() == n_max - 2 + 1);
  CHECK(report.degrees_used.at(2) == n_max - 2);
  // Even bands replicate the shifted diagonal, odd bands the first band.
  const auto& b0 = report.per_k.at(0);
  for (int m = 0; m + 2 <= n_max; ++m) CHECK(b2.band(m) == b0.band(m + 1));
  const auto& b3 = report.per_k.at(3);
  const auto& b1 = report.per_k.at(1);
  for (int m = 0; m + 3 <= n_max; ++m) CHECK(b3.band(m) == b1.band(m + 1));
}

TEST_CASE("a band without a usable degree fails alone") {
  const DensityMatrix rho = states::state_pair_coherent({3.0, 0.0}, 0, 6);
  const MeasurementRecord record = simulation::sample_exact(rho, 0, GridSpec{0.1, 0.9, 41, 13});
  ReconstructionConfig config;
  config.n_max = 6;
  config.threshold = 0.0;
  config.policy = diagnostics::DegreePolicy::UserFixed;
  config.degree_overrides[0] = 5;  // only the diagonal has a degree
  const ReconstructionReport report = inversion::reconstruct(record, config);
  CHECK(report.per_k.at(0).error.empty());
  for (int k = 1; k <= 6; ++k) CHECK_FALSE(report.per_k.at(k).error.empty());
  CHECK(report.degrees_used.size() == 1);
  // The diagonal is still estimated.
  CHECK(report.rho_hat.elements(0, 0).real() > 0.01);
}

TEST_CASE("moment-placement noise requires an exact record") {
  const DensityMatrix rho = states::state_pair_coherent({3.0, 0.0}, 0, 6);
  const MeasurementRecord exact = simulation::sample_exact(rho, 0, GridSpec{0.1, 0.9, 41, 13});
  const MeasurementRecord noisy =
      simulation::add_noise(exact, NoiseSpec{NoiseMode::PhysicalShot, 20000, 1});
  ReconstructionConfig config;
  config.n_max = 6;
  config.moment_noise = NoiseSpec{NoiseMode::PaperLiteral, 20000, 2};
  CHECK_THROWS_AS(inversion::reconstruct(noisy, config), contract_error);
}

TEST_CASE("odd bands of an even superposition sit below the noise floor") {
  const int n_max = 8;
  const DensityMatrix rho = states::state_superposition_pair({3.0, 0.0}, 0, n_max);
  const MeasurementRecord record =
      simulation::sample_exact(rho, 0, GridSpec{0.1, 0.9, 61, 21});
  ReconstructionConfig config;
  config.n_max = n_max;
  config.moment_noise = NoiseSpec{NoiseMode::PaperLiteral, 20000, 11};
  const ReconstructionReport report = inversion::reconstruct(record, config);
  for (int k = 0; k <= n_max; ++k) {
    REQUIRE(report.per_k.at(k).error.empty());
    CHECK(report.per_k.at(k).below_noise_floor == (k % 2 == 1));
  }
}

TEST_CASE("report serialization is deterministic and structured") {
  const DensityMatrix rho = states::state_pair_coherent({3.0, 0.0}, 0, 5);
  const MeasurementRecord record = simulation::sample_exact(rho, 0, GridSpec{0.1, 0.9, 41, 13});
  ReconstructionConfig config;
  config.n_max = 5;
  config.moment_noise = NoiseSpec{NoiseMode::PaperLiteral, 20000, 3};

  const std::string a = inversion::report_to_json(inversion::reconstruct(record, config));
  const std::string b = inversion::report_to_json(inversion::reconstruct(record, config));
  CHECK(a == b);

  const nlohmann::json doc = nlohmann::json::parse(a);
  CHECK(doc.contains("rho_hat"));
  CHECK(doc.contains("physicality"));
  CHECK(doc.contains("degrees_used"));
  CHECK(doc["truncation_threshold"].get<double>() == 0.1);
  REQUIRE(doc["per_k"].size() == 6);
  const auto& entry = doc["per_k"][0];
  CHECK(entry["k"].get<int>() == 0);
  CHECK(entry["error"].is_null());
  CHECK(entry["singular_values"].size() == entry["degree"].get<int>() + 1);
  CHECK(entry["band_re"].size() == entry["band_im"].size());
  CHECK(entry["diagnostics"].contains("sign_changes"));
}

TEST_CASE("reconstruct rejects a negative cutoff") {
  const DensityMatrix rho = states::state_pair_coherent({3.0, 0.0}, 0, 4);
  const MeasurementRecord record = simulation::sample_exact(rho, 0, GridSpec{0.1, 0.9, 21, 9});
  ReconstructionConfig config;
  config.n_max = -1;
  CHECK_THROWS_AS(inversion::reconstruct(record, config), contract_error);
}
