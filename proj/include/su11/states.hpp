#pragma once

#include <Eigen/Core>
#include <complex>
#include <optional>
#include <string>

namespace su11::states {

using Complex = std::complex<double>;

// Reduced density matrix of one charge sector in the pair basis |n+q, n>:
// elements(n, m) = rho_{n,m}(q) = <n+q, n| rho |m+q, m>.
struct DensityMatrix {
  int q = 0;
  int n_max = 0;
  Eigen::MatrixXcd elements;
};

enum class StateFamily { PairCoherent, Perelomov, SuperpositionPair, Custom };

struct StateParams {
  StateFamily family = StateFamily::PairCoherent;
  Complex xi{3.0, 0.0};
  Complex eta{0.6, 0.0};
  int charge = 0;
  std::optional<Eigen::VectorXcd> custom_coeffs;
};

// Throws contract_error unless rho is Hermitian (1e-12), has trace <= 1 + 1e-12,
// and is positive semidefinite down to -1e-10 on the smallest eigenvalue.
void check_density(const DensityMatrix& rho);

// Pair coherent state: amplitudes xi^n / sqrt(n! (n+p)!), normalization summed
// from the full series (relative tolerance 1e-16, capped at 500 terms), then
// truncated at n_max. Trace falls short of 1 only by the truncation tail.
DensityMatrix state_pair_coherent(Complex xi, int p, int n_max);

// Group coherent state: rho_{n,m} = (1-|eta|^2)^{q+1}/q! *
// sqrt((n+q)!(m+q)!/(n! m!)) eta^n conj(eta)^m, |eta| < 1 required.
DensityMatrix state_perelomov(Complex eta, int q, int n_max);

// Even superposition of the +xi and -xi pair coherent kets (global phase
// e^{-i pi/4}/sqrt(2), unobservable in rho). The truncated superposed ket is
// renormalized before forming rho, so the trace is exactly 1.
DensityMatrix state_superposition_pair(Complex xi, int p, int n_max);

// Pure state from explicit amplitudes c_n: rho_{n,m} = c_n conj(c_m).
// Coefficients must be unit norm within 1e-12 unless normalize is set.
DensityMatrix state_custom(const Eigen::VectorXcd& coeffs, int q, bool normalize = false);

// Dispatch on StateParams. For Custom, coefficient vectors shorter than
// n_max+1 are zero-padded; longer ones are rejected.
DensityMatrix make_state(const StateParams& params, int n_max);

std::string to_json(const DensityMatrix& rho);
DensityMatrix density_from_json(const std::string& text);
void save_density(const DensityMatrix& rho, const std::string& path);
DensityMatrix load_density(const std::string& path);

std::string family_name(StateFamily family);
StateFamily family_from_name(const std::string& name);

}  // namespace su11::states
