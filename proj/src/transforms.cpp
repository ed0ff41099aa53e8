#include "su11/transforms.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <unordered_map>

#include "su11/errors.hpp"
#include "su11/fock.hpp"

namespace su11::transforms {

Eigen::VectorXcd dft_phase(const MeasurementRecord& record, int k) {
  const int n_phi = record.grid.n_phi;
  const int n_y = record.grid.n_y;
  Eigen::VectorXcd g(n_y);
  for (int i = 0; i < n_y; ++i) {
    Complex acc(0.0, 0.0);
    for (int s = 0; s < n_phi; ++s)
      acc += std::polar(1.0, 2.0 * std::numbers::pi * k * s / n_phi) * record.values(i, s);
    g(i) = acc / static_cast<double>(n_phi);
  }
  return g;
}

MomentTable scale_to_moments(const Eigen::VectorXcd& g, const Eigen::VectorXd& y_values,
                             int q, int k) {
  if (g.size() != y_values.size())
    throw contract_error("scale_to_moments: g and y lengths differ");
  if (q < 0) throw contract_error("scale_to_moments: negative charge");
  MomentTable table;
  table.q = q;
  table.k = k;
  table.y_values = y_values;
  table.f_values.resize(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double y = y_values(i);
    if (!(y > 0.0 && y < 1.0))
      throw contract_error("scale_to_moments: y must lie strictly inside (0,1)");
    table.f_values(i) =
        g(i) * std::exp(-0.5 * k * std::log(y) - (q + 1) * std::log1p(-y));
  }
  return table;
}

Eigen::VectorXcd moments_to_g(const MomentTable& table) {
  Eigen::VectorXcd g(table.f_values.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double y = table.y_values(i);
    g(i) = table.f_values(i) *
           std::exp(0.5 * table.k * std::log(y) + (table.q + 1) * std::log1p(-y));
  }
  return g;
}

double series_coefficient(int m, int k, int q) {
  if (m < 0 || k < 0 || q < 0)
    throw contract_error("series_coefficient: indices must be nonnegative");
  thread_local std::unordered_map<std::uint64_t, double> cache;
  const std::uint64_t key = (static_cast<std::uint64_t>(q) << 42) |
                            (static_cast<std::uint64_t>(k) << 21) |
                            static_cast<std::uint64_t>(m);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  double value = std::exp(
      -fock::log_factorial(q) +
      0.5 * (fock::log_factorial(m + k + q) + fock::log_factorial(m + q) -
             fock::log_factorial(m) - fock::log_factorial(m + k)));
  cache.emplace(key, value);
  return value;
}

MomentTable perturb_moments(const MomentTable& table, const NoiseSpec& noise) {
  if (noise.tau < 1) throw contract_error("perturb_moments: tau must be positive");
  MomentTable out = table;
  if (noise.mode == simulation::NoiseMode::Exact) return out;
  const double tau = static_cast<double>(noise.tau);
  for (Eigen::Index i = 0; i < out.f_values.size(); ++i) {
    simulation::SplitMix64 rng = simulation::stream_for(
        noise.seed,
        {simulation::kMomentNoiseTag, static_cast<std::uint64_t>(table.q),
         static_cast<std::uint64_t>(table.k), static_cast<std::uint64_t>(i)});
    double r = rng.uniform_pm1();
    double g = rng.normal();
    out.f_values(i) += r * g * std::sqrt(std::abs(out.f_values(i)) / tau);
  }
  return out;
}

void save_moments_csv(const MomentTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << "# q=" << table.q << " k=" << table.k << "\n";
  out << "y,re_f,im_f\n";
  char line[128];
  for (Eigen::Index i = 0; i < table.y_values.size(); ++i) {
    std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n", table.y_values(i),
                  table.f_values(i).real(), table.f_values(i).imag());
    out << line;
  }
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace su11::transforms
