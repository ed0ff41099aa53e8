#pragma once

#include <vector>

#include "su11/transforms.hpp"

namespace su11::diagnostics {

using transforms::MomentTable;

enum class DegreePolicy { Auto, PaperFixed, UserFixed };

// Tunable thresholds for the Auto policy. The sign-change gate accepts a
// degree once S_c >= N/2 - sc_slack * sqrt(N/2); the tail gate additionally
// requires the sum of S(m) beyond the degree to fall under tail_fraction of
// the cumulative model sum of squares.
struct AutoSettings {
  double sc_slack = 1.0;
  double tail_fraction = 0.01;
};

struct DiagnosticsReport {
  int k = 0;
  Eigen::VectorXd seq_sum_squares;  // S(m), m = 1..m_cap
  std::vector<int> sign_changes;    // S_c at candidate degrees 0..m_cap
  int selected_degree = 0;
  DegreePolicy policy = DegreePolicy::Auto;
  bool fallback = false;  // Auto criterion never met; degree forced to n_max - k
};

// S(m) = chi^2(degree m-1) - chi^2(degree m) from untruncated least squares,
// clamped at zero against rounding. m runs 1..m_cap.
Eigen::VectorXd sequential_sum_of_squares(const MomentTable& table, int m_cap);

// Residuals of the untruncated least-squares fit at the given degree
// (real part for complex tables), ordered by increasing y.
Eigen::VectorXd residuals_at_degree(const MomentTable& table, int degree);

// Number of adjacent sign alternations; exact zeros preserve the running sign.
int sign_change_count(const Eigen::VectorXd& residuals);

// Degree table used for the noisy pair-coherent demonstration:
// 6 for k=0, 5 for k in {1,2}, 4 for 3<=k<=5, n_max-k above.
int paper_fixed_degree(int k, int n_max);

int select_degree(const MomentTable& table, DegreePolicy policy, int k, int n_max,
                  const AutoSettings& settings = {}, int user_degree = -1);

DiagnosticsReport diagnose(const MomentTable& table, DegreePolicy policy, int k, int n_max,
                           const AutoSettings& settings = {}, int user_degree = -1);

const char* policy_name(DegreePolicy policy);

}  // namespace su11::diagnostics
