#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "su11/forward_model.hpp"

namespace su11::simulation {

using states::DensityMatrix;

// Measurement grid: y_i equi-spaced on [y_min, y_max], phi_s = 2 pi s / n_phi.
struct GridSpec {
  double y_min = 0.1;
  double y_max = 0.9;
  int n_y = 101;
  int n_phi = 20;
};

void validate(const GridSpec& grid);
std::vector<double> y_nodes(const GridSpec& grid);
std::vector<double> phi_nodes(const GridSpec& grid);

enum class NoiseMode { Exact, PaperLiteral, PhysicalShot };

struct NoiseSpec {
  NoiseMode mode = NoiseMode::Exact;
  long tau = 20000;  // trials per setting
  std::uint64_t seed = 0;
};

std::string mode_name(NoiseMode mode);
NoiseMode mode_from_name(const std::string& name);

struct MeasurementRecord {
  int q = 0;
  GridSpec grid;
  NoiseSpec noise;
  Eigen::MatrixXd values;  // n_y rows, n_phi columns
};

// Exact probabilities on the grid (noise mode Exact). q must equal rho.q.
MeasurementRecord sample_exact(const DensityMatrix& rho, int q, const GridSpec& grid);

// Seeded perturbation of an Exact record. PhysicalShot (the default noisy
// mode): v' = clamp(v + g sqrt(v(1-v)/tau), 0, 1), the Gaussian limit of tau
// Bernoulli trials. PaperLiteral: v' = v + R g sqrt(|v|/tau) with R uniform on
// [-1,1], not clamped. Same seed gives bit-identical output for any thread
// count; draws are derived per grid point from counter-based streams.
MeasurementRecord add_noise(const MeasurementRecord& record, const NoiseSpec& noise);

// Counter-based deterministic generator (SplitMix64 stream plus Box-Muller),
// platform-independent by construction. stream_for derives an independent
// stream from a seed and a context path such as {tag, q, i, s}.
struct SplitMix64 {
  std::uint64_t state = 0;

  std::uint64_t next();
  double uniform01();    // [0, 1)
  double uniform_pm1();  // [-1, 1)
  double normal();       // standard normal via Box-Muller
};

SplitMix64 stream_for(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

// Context tags for the per-point streams (documented so files regenerate).
inline constexpr std::uint64_t kRecordNoiseTag = 0x5245434Full;
inline constexpr std::uint64_t kMomentNoiseTag = 0x4D4F4D46ull;

std::string to_json(const MeasurementRecord& record);
MeasurementRecord record_from_json(const std::string& text);
void save_record(const MeasurementRecord& record, const std::string& path);
MeasurementRecord load_record(const std::string& path);
void save_record_csv(const MeasurementRecord& record, const std::string& path);

}  // namespace su11::simulation
