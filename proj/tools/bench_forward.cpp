// Timing comparison of the serial reference grid evaluator against the
// OpenMP kernel, on both code paths (rank-1 fast path and full double sum).
#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include "su11/forward_model.hpp"
#include "su11/simulation.hpp"
#include "su11/states.hpp"

using namespace su11;

namespace {

double best_of(int repeats, const std::function<void()>& body) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const double t0 = omp_get_wtime();
    body();
    const double t1 = omp_get_wtime();
    best = std::min(best, t1 - t0);
  }
  return best;
}

void bench_case(const char* label, const states::DensityMatrix& rho, int n_y, int n_phi,
                int repeats) {
  simulation::GridSpec grid;
  grid.n_y = n_y;
  grid.n_phi = n_phi;
  const std::vector<double> ys = simulation::y_nodes(grid);
  const std::vector<double> phis = simulation::phi_nodes(grid);

  forward_model::ForwardEval eval(rho);
  Eigen::MatrixXd serial, parallel;
  const double t_serial =
      best_of(repeats, [&] { serial = forward_model::eval_grid_serial(rho, ys, phis); });
  const double t_parallel =
      best_of(repeats, [&] { parallel = forward_model::eval_grid(rho, ys, phis); });
  const double diff = (serial - parallel).cwiseAbs().maxCoeff();

  std::printf("%-28s n_max=%3d grid=%dx%d path=%s\n", label, rho.n_max, n_y, n_phi,
              eval.rank_one() ? "rank-1" : "double-sum");
  std::printf("  serial   %8.2f ms\n", t_serial * 1e3);
  std::printf("  parallel %8.2f ms  (%d threads, speedup %.2fx)\n", t_parallel * 1e3,
              omp_get_max_threads(), t_serial / t_parallel);
  std::printf("  max |serial - parallel| = %.3g (must be 0: bit-identical contract)\n\n",
              diff);
}

}  // namespace

int main(int argc, char** argv) {
  int n_y = 201;
  int n_phi = 64;
  int repeats = 3;
  if (argc > 1) n_y = std::atoi(argv[1]);
  if (argc > 2) n_phi = std::atoi(argv[2]);
  if (argc > 3) repeats = std::atoi(argv[3]);
  if (n_y < 2 || n_phi < 1 || repeats < 1) {
    std::fprintf(stderr, "usage: %s [n_y] [n_phi] [repeats]\n", argv[0]);
    return 1;
  }

  // Convex mixture of two families: rank > 1, so the evaluator has to run
  // the full double sum over the density matrix.
  const int n_mix = 24;
  states::DensityMatrix mixed = states::state_pair_coherent({3.0, 0.0}, 0, n_mix);
  const states::DensityMatrix pere = states::state_perelomov({0.6, 0.1}, 0, n_mix);
  mixed.elements = 0.6 * mixed.elements + 0.4 * pere.elements;
  bench_case("mixed pair + group coherent", mixed, n_y, n_phi, repeats);

  // Pure state: collapses to the rank-1 path, one coherent sum per point.
  const states::DensityMatrix pure = states::state_pair_coherent({3.0, 0.0}, 0, 60);
  bench_case("pure pair coherent", pure, n_y, n_phi, repeats);

  return 0;
}
