#include "su11/fock.hpp"

#include <cmath>

#include "su11/errors.hpp"

namespace su11::fock {

double log_factorial(int n) {
  if (n < 0) throw contract_error("log_factorial: negative argument");
  return std::lgamma(static_cast<double>(n) + 1.0);
}

double half_log_weight(int n, int q) {
  return 0.5 * (log_factorial(n + q) - log_factorial(n) - log_factorial(q));
}

std::vector<double> half_log_weights(int n_max, int q) {
  std::vector<double> w(static_cast<std::size_t>(n_max) + 1);
  for (int n = 0; n <= n_max; ++n) w[static_cast<std::size_t>(n)] = half_log_weight(n, q);
  return w;
}

}  // namespace su11::fock
