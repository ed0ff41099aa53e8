#pragma once

#include <string>

#include "su11/simulation.hpp"

namespace su11::transforms {

using simulation::MeasurementRecord;
using simulation::NoiseSpec;
using states::Complex;

// Scaled phase moments f_k(q, y_i) on the measurement grid. For a state with
// support inside the cutoff, f_k(q, y) = sum_m B_mk(q) rho_{m+k,m}(q) y^m.
struct MomentTable {
  int q = 0;
  int k = 0;
  Eigen::VectorXd y_values;
  Eigen::VectorXcd f_values;
};

// Discrete Fourier transform over the phase columns:
// g_k(y_i) = (1/n_phi) sum_s e^{2 pi i k s / n_phi} values[i][s].
Eigen::VectorXcd dft_phase(const MeasurementRecord& record, int k);

// f_k(q, y) = g_k(q, y) y^{-k/2} / (1-y)^{q+1}; y must lie strictly in (0,1).
MomentTable scale_to_moments(const Eigen::VectorXcd& g, const Eigen::VectorXd& y_values,
                             int q, int k);

// Algebraic inverse of scale_to_moments (round-trip helper).
Eigen::VectorXcd moments_to_g(const MomentTable& table);

// B_mk(q) = (1/q!) sqrt((m+k+q)! (m+q)! / (m! (m+k)!)), memoized.
double series_coefficient(int m, int k, int q);

// The data perturbation used for moment-placement noise: each table entry
// gains R g sqrt(|f|/tau) with R uniform on [-1,1] and g standard normal,
// drawn from a counter-based stream keyed by (seed, q, k, row).
MomentTable perturb_moments(const MomentTable& table, const NoiseSpec& noise);

void save_moments_csv(const MomentTable& table, const std::string& path);

}  // namespace su11::transforms
