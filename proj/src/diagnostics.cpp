#include "su11/diagnostics.hpp"

#include <Eigen/QR>
#include <cmath>

#include "su11/errors.hpp"

namespace su11::diagnostics {

namespace {

Eigen::MatrixXd vandermonde(const Eigen::VectorXd& y, int degree) {
  Eigen::MatrixXd v(y.size(), degree + 1);
  v.col(0).setOnes();
  for (int j = 1; j <= degree; ++j) v.col(j) = v.col(j - 1).cwiseProduct(y);
  return v;
}

// chi^2 of the untruncated least-squares fit for degrees 0..m_cap.
std::vector<double> chi2_by_degree(const MomentTable& table, int m_cap) {
  const Eigen::Index n = table.y_values.size();
  if (m_cap < 0) throw contract_error("diagnostics: negative degree cap");
  if (m_cap + 1 > n) throw contract_error("diagnostics: degree cap exceeds grid size");
  const Eigen::MatrixXd v = vandermonde(table.y_values, m_cap);
  const Eigen::VectorXd re = table.f_values.real();
  const Eigen::VectorXd im = table.f_values.imag();
  std::vector<double> chi2(static_cast<std::size_t>(m_cap) + 1);
  for (int d = 0; d <= m_cap; ++d) {
    const auto vd = v.leftCols(d + 1);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(vd);
    Eigen::VectorXd a_re = qr.solve(re);
    Eigen::VectorXd a_im = qr.solve(im);
    chi2[static_cast<std::size_t>(d)] =
        (vd * a_re - re).squaredNorm() + (vd * a_im - im).squaredNorm();
  }
  return chi2;
}

struct AutoChoice {
  int degree = 0;
  bool fallback = false;
};

AutoChoice auto_select(const MomentTable& table, int k, int n_max,
                       const AutoSettings& settings) {
  const Eigen::Index n = table.y_values.size();
  const int m_cap = std::min<int>(n_max - k, static_cast<int>(n) - 1);
  if (m_cap < 0) throw contract_error("diagnostics: k exceeds n_max");
  if (m_cap == 0) return {n_max - k, false};  // single-coefficient band, nothing to choose
  const Eigen::VectorXd s = sequential_sum_of_squares(table, m_cap);
  const double total = s.sum();
  const double sc_gate =
      static_cast<double>(n) / 2.0 - settings.sc_slack * std::sqrt(static_cast<double>(n) / 2.0);
  for (int d = 0; d <= m_cap; ++d) {
    double tail = 0.0;
    for (int m = d + 1; m <= m_cap; ++m) tail += s(m - 1);
    if (tail >= settings.tail_fraction * total || total == 0.0) continue;
    if (sign_change_count(residuals_at_degree(table, d)) >= sc_gate) return {d, false};
  }
  return {n_max - k, true};
}

}  // namespace

Eigen::VectorXd sequential_sum_of_squares(const MomentTable& table, int m_cap) {
  if (m_cap < 1) throw contract_error("sequential_sum_of_squares: m_cap must be >= 1");
  const std::vector<double> chi2 = chi2_by_degree(table, m_cap);
  Eigen::VectorXd s(m_cap);
  for (int m = 1; m <= m_cap; ++m)
    s(m - 1) = std::max(0.0, chi2[static_cast<std::size_t>(m - 1)] -
                                 chi2[static_cast<std::size_t>(m)]);
  return s;
}

Eigen::VectorXd residuals_at_degree(const MomentTable& table, int degree) {
  const Eigen::Index n = table.y_values.size();
  if (degree < 0 || degree + 1 > n)
    throw contract_error("residuals_at_degree: degree out of range");
  const Eigen::MatrixXd v = vandermonde(table.y_values, degree);
  const Eigen::VectorXd re = table.f_values.real();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v);
  Eigen::VectorXd a = qr.solve(re);
  return re - v * a;
}

int sign_change_count(const Eigen::VectorXd& residuals) {
  int changes = 0;
  int last_sign = 0;
  for (Eigen::Index i = 0; i < residuals.size(); ++i) {
    const double r = residuals(i);
    if (r == 0.0) continue;  // exact zeros preserve the running sign
    const int sign = r > 0.0 ? 1 : -1;
    if (last_sign != 0 && sign != last_sign) ++changes;
    last_sign = sign;
  }
  return changes;
}

int paper_fixed_degree(int k, int n_max) {
  if (k < 0 || k > n_max) throw contract_error("paper_fixed_degree: k out of range");
  int degree;
  if (k == 0)
    degree = 6;
  else if (k <= 2)
    degree = 5;
  else if (k <= 5)
    degree = 4;
  else
    degree = n_max - k;
  return std::min(degree, n_max - k);
}

int select_degree(const MomentTable& table, DegreePolicy policy, int k, int n_max,
                  const AutoSettings& settings, int user_degree) {
  switch (policy) {
    case DegreePolicy::PaperFixed:
      return paper_fixed_degree(k, n_max);
    case DegreePolicy::UserFixed:
      if (user_degree < 0) throw contract_error("select_degree: user degree missing");
      return user_degree;
    case DegreePolicy::Auto:
      return auto_select(table, k, n_max, settings).degree;
  }
  throw contract_error("select_degree: unknown policy");
}

DiagnosticsReport diagnose(const MomentTable& table, DegreePolicy policy, int k, int n_max,
                           const AutoSettings& settings, int user_degree) {
  const Eigen::Index n = table.y_values.size();
  const int m_cap = std::min<int>(n_max - k, static_cast<int>(n) - 1);
  if (m_cap < 0) throw contract_error("diagnose: k exceeds n_max");

  DiagnosticsReport report;
  report.k = k;
  report.policy = policy;
  report.seq_sum_squares =
      m_cap >= 1 ? sequential_sum_of_squares(table, m_cap) : Eigen::VectorXd();
  report.sign_changes.resize(static_cast<std::size_t>(m_cap) + 1);
  for (int d = 0; d <= m_cap; ++d)
    report.sign_changes[static_cast<std::size_t>(d)] =
        sign_change_count(residuals_at_degree(table, d));

  if (policy == DegreePolicy::Auto) {
    AutoChoice choice = auto_select(table, k, n_max, settings);
    report.selected_degree = choice.degree;
    report.fallback = choice.fallback;
  } else {
    report.selected_degree = select_degree(table, policy, k, n_max, settings, user_degree);
  }
  return report;
}

const char* policy_name(DegreePolicy policy) {
  switch (policy) {
    case DegreePolicy::Auto: return "auto";
    case DegreePolicy::PaperFixed: return "paper";
    case DegreePolicy::UserFixed: return "fixed";
  }
  return "unknown";
}

}  // namespace su11::diagnostics
