#include "su11/states.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "su11/errors.hpp"
#include "su11/fock.hpp"

namespace su11::states {

namespace {

using json = nlohmann::ordered_json;

DensityMatrix from_ket(const Eigen::VectorXcd& ket, int q) {
  DensityMatrix rho;
  rho.q = q;
  rho.n_max = static_cast<int>(ket.size()) - 1;
  rho.elements = ket * ket.adjoint();
  return rho;
}

// Unnormalized pair-coherent amplitude xi^n / sqrt(n! (n+p)!) in log-polar form.
Complex pair_amplitude(double log_abs_xi, double arg_xi, int n, int p) {
  double mag = std::exp(n * log_abs_xi -
                        0.5 * (fock::log_factorial(n) + fock::log_factorial(n + p)));
  return std::polar(mag, n * arg_xi);
}

}  // namespace

void check_density(const DensityMatrix& rho) {
  const int dim = rho.n_max + 1;
  if (rho.q < 0) throw contract_error("density matrix: negative charge");
  if (rho.n_max < 0) throw contract_error("density matrix: negative n_max");
  if (rho.elements.rows() != dim || rho.elements.cols() != dim)
    throw contract_error("density matrix: elements shape does not match n_max");
  if (!rho.elements.allFinite()) throw contract_error("density matrix: non-finite elements");

  double herm = (rho.elements - rho.elements.adjoint()).cwiseAbs().maxCoeff();
  if (herm > 1e-12) throw contract_error("density matrix: not Hermitian");

  Complex tr = rho.elements.trace();
  if (std::abs(tr.imag()) > 1e-12 || tr.real() > 1.0 + 1e-12)
    throw contract_error("density matrix: trace exceeds 1");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho.elements, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw contract_error("density matrix: eigensolve failed");
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw contract_error("density matrix: not positive semidefinite");
}

DensityMatrix state_pair_coherent(Complex xi, int p, int n_max) {
  if (p < 0) throw contract_error("pair coherent: negative charge");
  if (n_max < 0) throw contract_error("pair coherent: negative n_max");

  Eigen::VectorXcd ket = Eigen::VectorXcd::Zero(n_max + 1);
  if (std::abs(xi) == 0.0) {
    ket(0) = 1.0;
    return from_ket(ket, p);
  }

  // Normalization from the full series sum_n |xi|^{2n} / (n! (n+p)!).
  const double log_x2 = 2.0 * std::log(std::abs(xi));
  double norm2 = 0.0;
  for (int n = 0; n < 500; ++n) {
    double term =
        std::exp(n * log_x2 - fock::log_factorial(n) - fock::log_factorial(n + p));
    norm2 += term;
    if (n > 0 && term < 1e-16 * norm2) break;
  }

  const double log_abs = std::log(std::abs(xi));
  const double arg = std::arg(xi);
  const double inv_norm = 1.0 / std::sqrt(norm2);
  for (int n = 0; n <= n_max; ++n) ket(n) = inv_norm * pair_amplitude(log_abs, arg, n, p);
  return from_ket(ket, p);
}

DensityMatrix state_perelomov(Complex eta, int q, int n_max) {
  if (q < 0) throw contract_error("perelomov: negative charge");
  if (n_max < 0) throw contract_error("perelomov: negative n_max");
  const double r = std::abs(eta);
  if (r >= 1.0) throw contract_error("perelomov: |eta| must be < 1");

  DensityMatrix rho;
  rho.q = q;
  rho.n_max = n_max;
  rho.elements = Eigen::MatrixXcd::Zero(n_max + 1, n_max + 1);
  if (r == 0.0) {
    rho.elements(0, 0) = 1.0;
    return rho;
  }

  const double log_r = std::log(r);
  const double arg = std::arg(eta);
  const double log_pref =
      (q + 1) * std::log1p(-r * r) - fock::log_factorial(q);
  // Fill the lower triangle and mirror so the matrix is Hermitian to the bit,
  // not just up to the rounding of exp and polar.
  const std::vector<double> half = fock::half_log_weights(n_max, q);
  for (int n = 0; n <= n_max; ++n)
    for (int m = 0; m <= n; ++m) {
      double mag = std::exp(log_pref + half[static_cast<std::size_t>(n)] +
                            half[static_cast<std::size_t>(m)] + (n + m) * log_r);
      const Complex v = std::polar(mag, (n - m) * arg);
      rho.elements(n, m) = v;
      if (m != n) rho.elements(m, n) = std::conj(v);
    }
  return rho;
}

DensityMatrix state_superposition_pair(Complex xi, int p, int n_max) {
  if (p < 0) throw contract_error("superposition: negative charge");
  if (n_max < 0) throw contract_error("superposition: negative n_max");

  Eigen::VectorXcd ket = Eigen::VectorXcd::Zero(n_max + 1);
  if (std::abs(xi) == 0.0) {
    ket(0) = 1.0;
    return from_ket(ket, p);
  }

  // (+xi) and (-xi) branches cancel at odd n and double at even n; the
  // constant factor and the global phase e^{-i pi/4}/sqrt(2) are absorbed by
  // renormalizing the truncated ket.
  const double log_abs = std::log(std::abs(xi));
  const double arg = std::arg(xi);
  for (int n = 0; n <= n_max; n += 2) ket(n) = pair_amplitude(log_abs, arg, n, p);
  double norm = ket.norm();
  if (norm == 0.0) throw contract_error("superposition: empty truncated ket");
  ket *= std::polar(1.0, -M_PI / 4.0) / norm;
  return from_ket(ket, p);
}

DensityMatrix state_custom(const Eigen::VectorXcd& coeffs, int q, bool normalize) {
  if (q < 0) throw contract_error("custom state: negative charge");
  if (coeffs.size() == 0) throw contract_error("custom state: empty coefficient vector");
  double norm = coeffs.norm();
  if (norm < 1e-150) throw contract_error("custom state: zero coefficient vector");
  if (!normalize && std::abs(norm - 1.0) > 1e-12)
    throw contract_error("custom state: coefficients not unit norm");
  Eigen::VectorXcd ket = coeffs / norm;
  return from_ket(ket, q);
}

DensityMatrix make_state(const StateParams& params, int n_max) {
  switch (params.family) {
    case StateFamily::PairCoherent:
      return state_pair_coherent(params.xi, params.charge, n_max);
    case StateFamily::Perelomov:
      return state_perelomov(params.eta, params.charge, n_max);
    case StateFamily::SuperpositionPair:
      return state_superposition_pair(params.xi, params.charge, n_max);
    case StateFamily::Custom: {
      if (!params.custom_coeffs)
        throw contract_error("custom state: coefficients missing");
      const Eigen::VectorXcd& c = *params.custom_coeffs;
      if (c.size() > n_max + 1)
        throw contract_error("custom state: more coefficients than n_max+1");
      Eigen::VectorXcd padded = Eigen::VectorXcd::Zero(n_max + 1);
      padded.head(c.size()) = c;
      return state_custom(padded, params.charge);
    }
  }
  throw contract_error("make_state: unknown family");
}

std::string to_json(const DensityMatrix& rho) {
  const int dim = rho.n_max + 1;
  json re = json::array(), im = json::array();
  for (int n = 0; n < dim; ++n) {
    json row_re = json::array(), row_im = json::array();
    for (int m = 0; m < dim; ++m) {
      row_re.push_back(rho.elements(n, m).real());
      row_im.push_back(rho.elements(n, m).imag());
    }
    re.push_back(std::move(row_re));
    im.push_back(std::move(row_im));
  }
  json doc;
  doc["q"] = rho.q;
  doc["n_max"] = rho.n_max;
  doc["re"] = std::move(re);
  doc["im"] = std::move(im);
  return doc.dump(2) + "\n";
}

DensityMatrix density_from_json(const std::string& text) {
  json doc = json::parse(text);
  DensityMatrix rho;
  rho.q = doc.at("q").get<int>();
  rho.n_max = doc.at("n_max").get<int>();
  const int dim = rho.n_max + 1;
  const auto& re = doc.at("re");
  const auto& im = doc.at("im");
  if (static_cast<int>(re.size()) != dim || static_cast<int>(im.size()) != dim)
    throw io_error("density matrix json: wrong row count");
  rho.elements.resize(dim, dim);
  for (int n = 0; n < dim; ++n) {
    if (static_cast<int>(re[n].size()) != dim || static_cast<int>(im[n].size()) != dim)
      throw io_error("density matrix json: wrong column count");
    for (int m = 0; m < dim; ++m)
      rho.elements(n, m) = Complex(re[n][m].get<double>(), im[n][m].get<double>());
  }
  check_density(rho);
  return rho;
}

void save_density(const DensityMatrix& rho, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << to_json(rho);
  if (!out) throw io_error("write failed: " + path);
}

DensityMatrix load_density(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return density_from_json(buf.str());
}

std::string family_name(StateFamily family) {
  switch (family) {
    case StateFamily::PairCoherent: return "pair";
    case StateFamily::Perelomov: return "perelomov";
    case StateFamily::SuperpositionPair: return "superposition";
    case StateFamily::Custom: return "custom";
  }
  throw contract_error("family_name: unknown family");
}

StateFamily family_from_name(const std::string& name) {
  if (name == "pair") return StateFamily::PairCoherent;
  if (name == "perelomov") return StateFamily::Perelomov;
  if (name == "superposition") return StateFamily::SuperpositionPair;
  if (name == "custom") return StateFamily::Custom;
  throw contract_error("unknown state family: " + name);
}

}  // namespace su11::states
