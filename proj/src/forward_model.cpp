#include "su11/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "su11/errors.hpp"
#include "su11/fock.hpp"

namespace su11::forward_model {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double reduce_phase(double phi) {
  double r = std::fmod(phi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r;
}

}  // namespace

void validate(const ProbeSetting& setting) {
  if (!(setting.y > 0.0 && setting.y < 1.0))
    throw contract_error("probe setting: y must lie strictly inside (0,1)");
  if (!std::isfinite(setting.phi)) throw contract_error("probe setting: phi not finite");
}

ProbeSetting z_to_probe(Complex z) {
  if (z == Complex(0.0, 0.0)) throw contract_error("z_to_probe: z = 0 (y = 0 inaccessible)");
  // tanh rounds to 1.0 for |z| beyond about 19; keep y strictly below 1 so
  // the open-interval contract survives for any finite z.
  double t = std::tanh(std::abs(z));
  ProbeSetting s;
  s.y = std::min(t * t, std::nextafter(1.0, 0.0));
  s.phi = reduce_phase(-std::arg(z));
  return s;
}

Complex probe_to_z(const ProbeSetting& setting) {
  validate(setting);
  double r = std::atanh(std::sqrt(setting.y));
  return std::polar(r, -setting.phi);
}

ForwardEval::ForwardEval(const DensityMatrix& rho)
    : q_(rho.q), n_max_(rho.n_max), rho_(rho.elements) {
  if (rho.elements.rows() != n_max_ + 1 || rho.elements.cols() != n_max_ + 1)
    throw contract_error("forward model: elements shape does not match n_max");
  if (q_ < 0) throw contract_error("forward model: negative charge");
  half_log_ = fock::half_log_weights(n_max_, q_);

  // Rank-1 detection: factor through the largest diagonal and verify the
  // residual, so pure states take the single-sum path.
  int j = 0;
  double best = -1.0;
  for (int n = 0; n <= n_max_; ++n) {
    double d = rho_(n, n).real();
    if (d > best) {
      best = d;
      j = n;
    }
  }
  if (best > 0.0) {
    Eigen::VectorXcd c = rho_.col(j) / std::sqrt(best);
    double scale = std::max(1.0, rho_.cwiseAbs().maxCoeff());
    if ((rho_ - c * c.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * scale) {
      ket_ = std::move(c);
      rank1_ = true;
    }
  }
}

double ForwardEval::operator()(double y, double phi) const {
  if (!(y > 0.0 && y < 1.0))
    throw contract_error("forward model: y must lie strictly inside (0,1)");
  phi = reduce_phase(phi);

  const double log_y = std::log(y);
  const double log_1my = std::log1p(-y);
  std::vector<double> w(static_cast<std::size_t>(n_max_) + 1);
  for (int n = 0; n <= n_max_; ++n)
    w[static_cast<std::size_t>(n)] =
        std::exp(half_log_[static_cast<std::size_t>(n)] + 0.5 * n * log_y +
                 0.5 * (q_ + 1) * log_1my);

  double value;
  if (rank1_) {
    Complex s(0.0, 0.0);
    for (int n = 0; n <= n_max_; ++n)
      s += w[static_cast<std::size_t>(n)] * ket_(n) * std::polar(1.0, -n * phi);
    value = std::norm(s);
  } else {
    Complex acc(0.0, 0.0);
    for (int m = 0; m <= n_max_; ++m)
      for (int n = 0; n <= n_max_; ++n)
        acc += w[static_cast<std::size_t>(m)] * w[static_cast<std::size_t>(n)] *
               std::polar(1.0, (m - n) * phi) * rho_(n, m);
    if (std::abs(acc.imag()) >= 1e-12)
      throw contract_error("q_function: imaginary residue exceeds 1e-12");
    value = acc.real();
  }

  if (value < -1e-10 || value > 1.0 + 1e-10)
    throw contract_error("q_function: value outside [0,1] beyond tolerance");
  return value;
}

double q_function(const DensityMatrix& rho, const ProbeSetting& setting) {
  validate(setting);
  return ForwardEval(rho)(setting.y, setting.phi);
}

Eigen::MatrixXd eval_grid_serial(const DensityMatrix& rho, const std::vector<double>& ys,
                                 const std::vector<double>& phis) {
  ForwardEval eval(rho);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ys.size()),
                      static_cast<Eigen::Index>(phis.size()));
  for (std::size_t i = 0; i < ys.size(); ++i)
    for (std::size_t s = 0; s < phis.size(); ++s)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = eval(ys[i], phis[s]);
  return out;
}

Eigen::MatrixXd eval_grid(const DensityMatrix& rho, const std::vector<double>& ys,
                          const std::vector<double>& phis) {
  ForwardEval eval(rho);
  const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(ys.size());
  const std::ptrdiff_t np = static_cast<std::ptrdiff_t>(phis.size());
  Eigen::MatrixXd out(ny, np);

  // Exceptions cannot cross the parallel region; capture the first failure
  // and rethrow after the loop.
  bool failed = false;
  std::string failure;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t idx = 0; idx < ny * np; ++idx) {
    std::ptrdiff_t i = idx / np;
    std::ptrdiff_t s = idx % np;
    try {
      out(i, s) = eval(ys[static_cast<std::size_t>(i)], phis[static_cast<std::size_t>(s)]);
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        failure = e.what();
      }
    }
  }
  if (failed) throw contract_error(failure);
  return out;
}

}  // namespace su11::forward_model
