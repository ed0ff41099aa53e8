#pragma once

#include <vector>

#include "su11/states.hpp"

namespace su11::forward_model {

using states::Complex;
using states::DensityMatrix;

// Probe parameterization of the amplifier squeeze parameter z:
// y = tanh^2|z|, and the branch is pinned by e^{-i phi} = z/|z|.
struct ProbeSetting {
  double y = 0.5;
  double phi = 0.0;
};

struct ProbabilitySample {
  ProbeSetting setting;
  int q = 0;
  double value = 0.0;
};

void validate(const ProbeSetting& setting);

ProbeSetting z_to_probe(Complex z);
Complex probe_to_z(const ProbeSetting& setting);

// Precomputed evaluator for the measurement probability Q(q, y, phi) of one
// density matrix: caches the square-root factorial weights and detects rank-1
// inputs, which collapse the double sum to |sum_n w_n c_n e^{-i n phi}|^2.
class ForwardEval {
 public:
  explicit ForwardEval(const DensityMatrix& rho);

  double operator()(double y, double phi) const;
  bool rank_one() const { return rank1_; }

 private:
  int q_ = 0;
  int n_max_ = 0;
  std::vector<double> half_log_;
  Eigen::MatrixXcd rho_;
  Eigen::VectorXcd ket_;
  bool rank1_ = false;
};

// Q(q, y, phi) = (1-y)^{q+1}/q! sum_{m,n} sqrt((m+q)!(n+q)!/(m! n!))
//               e^{i(m-n)phi} y^{(m+n)/2} rho_{n,m}(q).
// The imaginary residue of the sum must stay below 1e-12 and the value inside
// [-1e-10, 1+1e-10]; violations throw contract_error instead of clamping.
double q_function(const DensityMatrix& rho, const ProbeSetting& setting);

// Grid evaluation, rows indexed by ys and columns by phis. The serial variant
// is the reference; eval_grid runs the same per-point arithmetic under OpenMP
// and must return bit-identical results for any thread count.
Eigen::MatrixXd eval_grid_serial(const DensityMatrix& rho, const std::vector<double>& ys,
                                 const std::vector<double>& phis);
Eigen::MatrixXd eval_grid(const DensityMatrix& rho, const std::vector<double>& ys,
                          const std::vector<double>& phis);

}  // namespace su11::forward_model
