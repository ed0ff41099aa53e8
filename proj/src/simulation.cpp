#include "su11/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "su11/errors.hpp"

namespace su11::simulation {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

void validate(const GridSpec& grid) {
  if (!(grid.y_min > 0.0 && grid.y_min < grid.y_max && grid.y_max < 1.0))
    throw contract_error("grid: require 0 < y_min < y_max < 1");
  if (grid.n_y < 2) throw contract_error("grid: n_y must be at least 2");
  if (grid.n_phi < 1) throw contract_error("grid: n_phi must be at least 1");
}

std::vector<double> y_nodes(const GridSpec& grid) {
  validate(grid);
  std::vector<double> ys(static_cast<std::size_t>(grid.n_y));
  for (int i = 0; i < grid.n_y; ++i)
    ys[static_cast<std::size_t>(i)] =
        grid.y_min + (grid.y_max - grid.y_min) * i / (grid.n_y - 1);
  return ys;
}

std::vector<double> phi_nodes(const GridSpec& grid) {
  validate(grid);
  std::vector<double> phis(static_cast<std::size_t>(grid.n_phi));
  for (int s = 0; s < grid.n_phi; ++s)
    phis[static_cast<std::size_t>(s)] = 2.0 * std::numbers::pi * s / grid.n_phi;
  return phis;
}

std::string mode_name(NoiseMode mode) {
  switch (mode) {
    case NoiseMode::Exact: return "exact";
    case NoiseMode::PaperLiteral: return "paper";
    case NoiseMode::PhysicalShot: return "shot";
  }
  throw contract_error("mode_name: unknown noise mode");
}

NoiseMode mode_from_name(const std::string& name) {
  if (name == "exact") return NoiseMode::Exact;
  if (name == "paper") return NoiseMode::PaperLiteral;
  if (name == "shot") return NoiseMode::PhysicalShot;
  throw contract_error("unknown noise mode: " + name);
}

MeasurementRecord sample_exact(const DensityMatrix& rho, int q, const GridSpec& grid) {
  if (q != rho.q) throw contract_error("sample_exact: charge does not match the state");
  validate(grid);
  MeasurementRecord rec;
  rec.q = q;
  rec.grid = grid;
  rec.noise = NoiseSpec{NoiseMode::Exact, 20000, 0};
  rec.values = forward_model::eval_grid(rho, y_nodes(grid), phi_nodes(grid));
  return rec;
}

std::uint64_t SplitMix64::next() {
  state += kGamma;
  return mix64(state);
}

double SplitMix64::uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SplitMix64::uniform_pm1() { return 2.0 * uniform01() - 1.0; }

double SplitMix64::normal() {
  double u1 = uniform01();
  double u2 = uniform01();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SplitMix64 stream_for(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(seed + kGamma);
  for (std::uint64_t c : path) s = mix64(s ^ (c + kGamma));
  return SplitMix64{s};
}

MeasurementRecord add_noise(const MeasurementRecord& record, const NoiseSpec& noise) {
  if (record.noise.mode != NoiseMode::Exact)
    throw contract_error("add_noise: record must be in exact mode");
  if (noise.tau < 1) throw contract_error("add_noise: tau must be positive");

  MeasurementRecord out = record;
  out.noise = noise;
  if (noise.mode == NoiseMode::Exact) return out;

  const double tau = static_cast<double>(noise.tau);
  const std::ptrdiff_t ny = record.values.rows();
  const std::ptrdiff_t np = record.values.cols();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t idx = 0; idx < ny * np; ++idx) {
    const std::ptrdiff_t i = idx / np;
    const std::ptrdiff_t s = idx % np;
    SplitMix64 rng = stream_for(
        noise.seed, {kRecordNoiseTag, static_cast<std::uint64_t>(record.q),
                     static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(s)});
    const double v = record.values(i, s);
    double vp;
    if (noise.mode == NoiseMode::PhysicalShot) {
      double g = rng.normal();
      vp = v + g * std::sqrt(std::max(v * (1.0 - v), 0.0) / tau);
      vp = std::clamp(vp, 0.0, 1.0);
    } else {  // PaperLiteral, intentionally unclamped
      double r = rng.uniform_pm1();
      double g = rng.normal();
      vp = v + r * g * std::sqrt(std::abs(v) / tau);
    }
    out.values(i, s) = vp;
  }
  return out;
}

std::string to_json(const MeasurementRecord& record) {
  json doc;
  doc["q"] = record.q;
  doc["grid"] = {{"y_min", record.grid.y_min},
                 {"y_max", record.grid.y_max},
                 {"n_y", record.grid.n_y},
                 {"n_phi", record.grid.n_phi}};
  doc["noise"] = {{"mode", mode_name(record.noise.mode)},
                  {"tau", record.noise.tau},
                  {"seed", record.noise.seed}};
  json rows = json::array();
  for (Eigen::Index i = 0; i < record.values.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index s = 0; s < record.values.cols(); ++s) row.push_back(record.values(i, s));
    rows.push_back(std::move(row));
  }
  doc["values"] = std::move(rows);
  return doc.dump(2) + "\n";
}

MeasurementRecord record_from_json(const std::string& text) {
  json doc = json::parse(text);
  MeasurementRecord rec;
  rec.q = doc.at("q").get<int>();
  const auto& g = doc.at("grid");
  rec.grid.y_min = g.at("y_min").get<double>();
  rec.grid.y_max = g.at("y_max").get<double>();
  rec.grid.n_y = g.at("n_y").get<int>();
  rec.grid.n_phi = g.at("n_phi").get<int>();
  validate(rec.grid);
  const auto& n = doc.at("noise");
  rec.noise.mode = mode_from_name(n.at("mode").get<std::string>());
  rec.noise.tau = n.at("tau").get<long>();
  rec.noise.seed = n.at("seed").get<std::uint64_t>();
  const auto& rows = doc.at("values");
  if (static_cast<int>(rows.size()) != rec.grid.n_y)
    throw io_error("record json: wrong number of value rows");
  rec.values.resize(rec.grid.n_y, rec.grid.n_phi);
  for (int i = 0; i < rec.grid.n_y; ++i) {
    if (static_cast<int>(rows[i].size()) != rec.grid.n_phi)
      throw io_error("record json: wrong number of value columns");
    for (int s = 0; s < rec.grid.n_phi; ++s) rec.values(i, s) = rows[i][s].get<double>();
  }
  if (!rec.values.allFinite()) throw contract_error("record: non-finite values");
  if (rec.noise.mode == NoiseMode::Exact &&
      (rec.values.minCoeff() < 0.0 || rec.values.maxCoeff() > 1.0))
    throw contract_error("record: exact-mode values must lie in [0,1]");
  if (rec.q < 0) throw contract_error("record: negative charge");
  return rec;
}

void save_record(const MeasurementRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << to_json(record);
  if (!out) throw io_error("write failed: " + path);
}

MeasurementRecord load_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return record_from_json(buf.str());
}

void save_record_csv(const MeasurementRecord& record, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot open for writing: " + path);
  const std::vector<double> ys = y_nodes(record.grid);
  const std::vector<double> phis = phi_nodes(record.grid);
  out << "y,phi,value\n";
  char line[128];
  for (int i = 0; i < record.grid.n_y; ++i)
    for (int s = 0; s < record.grid.n_phi; ++s) {
      std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g\n", ys[static_cast<std::size_t>(i)],
                    phis[static_cast<std::size_t>(s)], record.values(i, s));
      out << line;
    }
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace su11::simulation
