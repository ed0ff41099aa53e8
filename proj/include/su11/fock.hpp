#pragma once

#include <vector>

namespace su11::fock {

// log(n!) via lgamma; exact for the small arguments used in tests.
double log_factorial(int n);

// 0.5 * (log((n+q)!) - log(n!) - log(q!)), the y-independent half of the
// vacuum-amplitude weight attached to |n+q, n>.
double half_log_weight(int n, int q);

// half_log_weight for n = 0..n_max as a reusable vector.
std::vector<double> half_log_weights(int n_max, int q);

}  // namespace su11::fock
