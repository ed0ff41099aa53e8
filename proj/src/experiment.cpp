#include "su11/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <utility>

#include "su11/errors.hpp"

namespace su11::experiment {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string placement_name(NoisePlacement placement) {
  return placement == NoisePlacement::Moment ? "moment" : "surface";
}

namespace {

states::Complex parse_complex(const json& node, const std::string& name) {
  if (node.is_number()) return {node.get<double>(), 0.0};
  if (node.is_object())
    return {node.value("re", 0.0), node.value("im", 0.0)};
  throw io_error("config: " + name + " must be a number or {re, im}");
}

json complex_to_json(const states::Complex& z) {
  if (z.imag() == 0.0) return json(z.real());
  return json{{"re", z.real()}, {"im", z.imag()}};
}

// noise.mode in configs adds a fourth token, "moment", on top of the record
// modes. It selects the placement rather than a new perturbation law.
void parse_noise(const json& node, ExperimentConfig& config) {
  if (node.contains("mode")) {
    const std::string mode = node["mode"].get<std::string>();
    if (mode == "moment") {
      config.placement = NoisePlacement::Moment;
      config.noise.mode = simulation::NoiseMode::PaperLiteral;
    } else {
      config.placement = NoisePlacement::Surface;
      config.noise.mode = simulation::mode_from_name(mode);
    }
  }
  if (node.contains("tau")) config.noise.tau = node["tau"].get<long>();
  if (node.contains("seed")) config.noise.seed = node["seed"].get<std::uint64_t>();
}

void write_lines(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << body;
  if (!out) throw io_error("write failed: " + path);
}

std::string matrix_triples_csv(const Eigen::MatrixXd& values) {
  std::string body = "m,n,value\n";
  char line[96];
  for (Eigen::Index m = 0; m < values.rows(); ++m)
    for (Eigen::Index n = 0; n < values.cols(); ++n) {
      std::snprintf(line, sizeof(line), "%lld,%lld,%.17g\n",
                    static_cast<long long>(m), static_cast<long long>(n), values(m, n));
      body += line;
    }
  return body;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw io_error(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw io_error("config: top level must be an object");

  ExperimentConfig config;
  try {
    if (doc.contains("state")) {
      const json& st = doc["state"];
      if (st.contains("family"))
        config.state.family = states::family_from_name(st["family"].get<std::string>());
      if (st.contains("xi")) config.state.xi = parse_complex(st["xi"], "state.xi");
      if (st.contains("eta")) config.state.eta = parse_complex(st["eta"], "state.eta");
      if (st.contains("q")) config.state.charge = st["q"].get<int>();
      if (st.contains("coeffs_re")) {
        const auto re = st["coeffs_re"].get<std::vector<double>>();
        std::vector<double> im(re.size(), 0.0);
        if (st.contains("coeffs_im")) {
          im = st["coeffs_im"].get<std::vector<double>>();
          if (im.size() != re.size())
            throw io_error("config: coeffs_re and coeffs_im lengths differ");
        }
        Eigen::VectorXcd c(static_cast<Eigen::Index>(re.size()));
        for (std::size_t i = 0; i < re.size(); ++i)
          c(static_cast<Eigen::Index>(i)) = states::Complex(re[i], im[i]);
        config.state.custom_coeffs = std::move(c);
      }
    }
    if (doc.contains("n_max")) config.n_max = doc["n_max"].get<int>();
    if (doc.contains("grid")) {
      const json& gr = doc["grid"];
      if (gr.contains("y_min")) config.grid.y_min = gr["y_min"].get<double>();
      if (gr.contains("y_max")) config.grid.y_max = gr["y_max"].get<double>();
      if (gr.contains("n_y")) config.grid.n_y = gr["n_y"].get<int>();
      if (gr.contains("n_phi")) config.grid.n_phi = gr["n_phi"].get<int>();
    }
    if (doc.contains("noise")) parse_noise(doc["noise"], config);
    if (doc.contains("threshold")) config.threshold = doc["threshold"].get<double>();
    if (doc.contains("relative_threshold"))
      config.relative_threshold = doc["relative_threshold"].get<bool>();
    if (doc.contains("degree_policy")) {
      const std::string policy = doc["degree_policy"].get<std::string>();
      if (policy == "auto")
        config.policy = diagnostics::DegreePolicy::Auto;
      else if (policy == "paper")
        config.policy = diagnostics::DegreePolicy::PaperFixed;
      else if (policy == "fixed")
        config.policy = diagnostics::DegreePolicy::UserFixed;
      else
        throw io_error("config: unknown degree_policy '" + policy + "'");
    }
    if (doc.contains("degrees")) {
      const auto list = doc["degrees"].get<std::vector<int>>();
      if (list.empty()) throw io_error("config: degrees array is empty");
      for (int k = 0; k <= config.n_max; ++k) {
        const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(k),
                                                      list.size() - 1);
        config.degree_overrides[k] = list[idx];
      }
    }
    if (doc.contains("degree_overrides")) {
      for (const auto& [key, value] : doc["degree_overrides"].items())
        config.degree_overrides[std::stoi(key)] = value.get<int>();
    }
    if (doc.contains("assume_symmetry"))
      config.assume_symmetry = doc["assume_symmetry"].get<bool>();
    if (doc.contains("auto_settings")) {
      const json& au = doc["auto_settings"];
      if (au.contains("sc_slack"))
        config.auto_settings.sc_slack = au["sc_slack"].get<double>();
      if (au.contains("tail_fraction"))
        config.auto_settings.tail_fraction = au["tail_fraction"].get<double>();
    }
    if (doc.contains("output_dir")) config.output_dir = doc["output_dir"].get<std::string>();
  } catch (const json::exception& e) {
    throw io_error(std::string("config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw io_error("config: degree_overrides keys must be integers");
  }
  return config;
}

std::string config_to_json(const ExperimentConfig& config) {
  ordered_json doc;
  ordered_json st;
  st["family"] = states::family_name(config.state.family);
  st["xi"] = complex_to_json(config.state.xi);
  st["eta"] = complex_to_json(config.state.eta);
  st["q"] = config.state.charge;
  if (config.state.custom_coeffs) {
    std::vector<double> re, im;
    for (Eigen::Index i = 0; i < config.state.custom_coeffs->size(); ++i) {
      re.push_back((*config.state.custom_coeffs)(i).real());
      im.push_back((*config.state.custom_coeffs)(i).imag());
    }
    st["coeffs_re"] = re;
    st["coeffs_im"] = im;
  }
  doc["state"] = std::move(st);
  doc["n_max"] = config.n_max;
  doc["grid"] = {{"y_min", config.grid.y_min},
                 {"y_max", config.grid.y_max},
                 {"n_y", config.grid.n_y},
                 {"n_phi", config.grid.n_phi}};
  doc["noise"] = {{"mode", config.placement == NoisePlacement::Moment
                               ? std::string("moment")
                               : simulation::mode_name(config.noise.mode)},
                  {"tau", config.noise.tau},
                  {"seed", config.noise.seed}};
  doc["threshold"] = config.threshold;
  doc["relative_threshold"] = config.relative_threshold;
  doc["degree_policy"] = diagnostics::policy_name(config.policy);
  ordered_json overrides = ordered_json::object();
  for (const auto& [k, d] : config.degree_overrides) overrides[std::to_string(k)] = d;
  doc["degree_overrides"] = std::move(overrides);
  doc["assume_symmetry"] = config.assume_symmetry;
  doc["auto_settings"] = {{"sc_slack", config.auto_settings.sc_slack},
                          {"tail_fraction", config.auto_settings.tail_fraction}};
  doc["output_dir"] = config.output_dir;
  return doc.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

std::vector<std::string> config_warnings(const ExperimentConfig& config) {
  std::vector<std::string> warnings;
  const int alias_free = 2 * config.n_max + 1;
  if (config.grid.n_phi < alias_free) {
    std::ostringstream msg;
    msg << "n_phi=" << config.grid.n_phi << " is below the alias-free bound "
        << alias_free << " for n_max=" << config.n_max
        << "; bands beyond the cutoff fold onto measured ones";
    warnings.push_back(msg.str());
  }
  return warnings;
}

inversion::ReconstructionConfig reconstruction_config(const ExperimentConfig& config) {
  inversion::ReconstructionConfig rc;
  rc.n_max = config.n_max;
  rc.threshold = config.threshold;
  rc.relative_threshold = config.relative_threshold;
  rc.policy = config.policy;
  rc.degree_overrides = config.degree_overrides;
  rc.assume_symmetry = config.assume_symmetry;
  rc.auto_settings = config.auto_settings;
  if (config.placement == NoisePlacement::Moment &&
      config.noise.mode != simulation::NoiseMode::Exact)
    rc.moment_noise = config.noise;
  return rc;
}

PipelineResult run_pipeline(const ExperimentConfig& config) {
  PipelineResult out;
  out.rho_exact = states::make_state(config.state, config.n_max);
  MeasurementRecord exact =
      simulation::sample_exact(out.rho_exact, config.state.charge, config.grid);
  if (config.placement == NoisePlacement::Surface &&
      config.noise.mode != simulation::NoiseMode::Exact)
    out.record = simulation::add_noise(exact, config.noise);
  else
    out.record = std::move(exact);
  out.report = inversion::reconstruct(out.record, reconstruction_config(config));
  return out;
}

ReconstructionReport run_experiment(const ExperimentConfig& config) {
  PipelineResult result = run_pipeline(config);

  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw io_error("cannot create output directory: " + config.output_dir);
  const fs::path dir(config.output_dir);

  simulation::save_record(result.record, (dir / "record.json").string());
  simulation::save_record_csv(result.record, (dir / "record.csv").string());

  const inversion::ReconstructionConfig rc = reconstruction_config(config);
  const std::vector<double> y_vec = simulation::y_nodes(result.record.grid);
  const Eigen::VectorXd y =
      Eigen::Map<const Eigen::VectorXd>(y_vec.data(), static_cast<Eigen::Index>(y_vec.size()));
  const int k_measured = config.assume_symmetry ? std::min(1, config.n_max) : config.n_max;
  for (int k = 0; k <= k_measured; ++k) {
    Eigen::VectorXcd g = transforms::dft_phase(result.record, k);
    transforms::MomentTable table =
        transforms::scale_to_moments(g, y, result.record.q, k);
    if (rc.moment_noise) table = transforms::perturb_moments(table, *rc.moment_noise);
    std::ostringstream name;
    name << "moments_q" << result.record.q << "_k" << k << ".csv";
    transforms::save_moments_csv(table, (dir / name.str()).string());
  }

  inversion::save_report(result.report, (dir / "report.json").string());

  write_lines((dir / "fig_exact.csv").string(),
              matrix_triples_csv(result.rho_exact.elements.real()));
  write_lines((dir / "fig_reconstructed.csv").string(),
              matrix_triples_csv(result.report.rho_hat.elements.real()));
  write_lines((dir / "fig_difference.csv").string(),
              matrix_triples_csv(
                  (result.report.rho_hat.elements - result.rho_exact.elements).real()));
  return std::move(result.report);
}

EnsembleSummary run_ensemble(const ExperimentConfig& config, int n_seeds) {
  if (n_seeds < 1) throw contract_error("run_ensemble: n_seeds must be >= 1");

  EnsembleSummary summary;
  summary.n_seeds = n_seeds;
  summary.first_seed = config.noise.seed;
  const Eigen::Index dim = config.n_max + 1;
  summary.mean_error = Eigen::MatrixXd::Zero(dim, dim);
  summary.rms_error = Eigen::MatrixXd::Zero(dim, dim);

  // Per k: running coefficient sums for a streaming mean/variance and the
  // residual-variance accumulator for the predicted level.
  struct Accum {
    int degree = 0;
    int retained = 0;
    int n_runs = 0;
    Eigen::VectorXcd sum;
    Eigen::VectorXd sum_sq;  // |a_j|^2 accumulates var(Re) + var(Im)
    Eigen::VectorXd variances;
    double residual_var_sum = 0.0;
  };
  std::map<int, Accum> accums;

  const DensityMatrix rho_exact = states::make_state(config.state, config.n_max);

  for (int run = 0; run < n_seeds; ++run) {
    ExperimentConfig seeded = config;
    seeded.noise.seed = config.noise.seed + static_cast<std::uint64_t>(run);
    PipelineResult result = run_pipeline(seeded);

    const Eigen::MatrixXd err =
        (result.report.rho_hat.elements - rho_exact.elements).cwiseAbs();
    summary.mean_error += err;
    summary.rms_error += err.cwiseProduct(err);

    const Eigen::Index n_rows = result.record.grid.n_y;
    for (const auto& [k, br] : result.report.per_k) {
      if (!br.error.empty() || br.derived_from_symmetry) continue;
      auto& acc = accums[k];
      const Eigen::Index m = br.solution.coefficients.size();
      if (acc.n_runs == 0) {
        acc.degree = br.degree;
        acc.retained = br.solution.retained_count;
        acc.sum = Eigen::VectorXcd::Zero(m);
        acc.sum_sq = Eigen::VectorXd::Zero(m);
        acc.variances = br.solution.variances;
      } else if (acc.sum.size() != m) {
        continue;  // degree changed across seeds (Auto policy); skip this run
      }
      acc.sum += br.solution.coefficients;
      acc.sum_sq += br.solution.coefficients.cwiseAbs2();
      const double dof = std::max<double>(1.0, static_cast<double>(n_rows) -
                                                   br.solution.retained_count);
      acc.residual_var_sum += br.solution.chi_squared / dof;
      acc.n_runs += 1;
    }
  }

  const double inv_n = 1.0 / static_cast<double>(n_seeds);
  summary.mean_error *= inv_n;
  summary.rms_error = (summary.rms_error * inv_n).cwiseSqrt();

  for (auto& [k, acc] : accums) {
    EnsembleBandStats stats;
    stats.k = k;
    stats.degree = acc.degree;
    stats.retained = acc.retained;
    stats.n_runs = acc.n_runs;
    const double inv_runs = 1.0 / static_cast<double>(acc.n_runs);
    stats.mean_residual_variance = acc.residual_var_sum * inv_runs;
    // Population variance; var(Re) + var(Im) = mean|a|^2 - |mean a|^2.
    stats.empirical =
        (acc.sum_sq * inv_runs - (acc.sum * inv_runs).cwiseAbs2()).cwiseMax(0.0);
    stats.predicted = acc.variances * stats.mean_residual_variance;
    summary.per_k.emplace(k, std::move(stats));
  }

  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw io_error("cannot create output directory: " + config.output_dir);
  const fs::path dir(config.output_dir);

  write_lines((dir / "ensemble_mean_error.csv").string(),
              matrix_triples_csv(summary.mean_error));
  write_lines((dir / "ensemble_rms_error.csv").string(),
              matrix_triples_csv(summary.rms_error));

  ordered_json doc;
  doc["n_seeds"] = summary.n_seeds;
  doc["first_seed"] = summary.first_seed;
  doc["max_mean_error"] = summary.mean_error.maxCoeff();
  doc["max_rms_error"] = summary.rms_error.maxCoeff();
  ordered_json per_k = ordered_json::array();
  for (const auto& [k, stats] : summary.per_k) {
    std::string body = "j,empirical,predicted,ratio\n";
    char line[128];
    ordered_json entry;
    entry["k"] = k;
    entry["degree"] = stats.degree;
    entry["retained"] = stats.retained;
    entry["n_runs"] = stats.n_runs;
    entry["mean_residual_variance"] = stats.mean_residual_variance;
    std::vector<double> emp, pred;
    for (Eigen::Index j = 0; j < stats.empirical.size(); ++j) {
      const double ratio = stats.predicted(j) > 0.0
                               ? stats.empirical(j) / stats.predicted(j)
                               : 0.0;
      std::snprintf(line, sizeof(line), "%lld,%.17g,%.17g,%.17g\n",
                    static_cast<long long>(j), stats.empirical(j), stats.predicted(j),
                    ratio);
      body += line;
      emp.push_back(stats.empirical(j));
      pred.push_back(stats.predicted(j));
    }
    entry["empirical"] = emp;
    entry["predicted"] = pred;
    per_k.push_back(std::move(entry));
    std::ostringstream name;
    name << "ensemble_variance_k" << k << ".csv";
    write_lines((dir / name.str()).string(), body);
  }
  doc["per_k"] = std::move(per_k);
  write_lines((dir / "ensemble_summary.json").string(), doc.dump(2) + "\n");

  return summary;
}

}  // namespace su11::experiment
