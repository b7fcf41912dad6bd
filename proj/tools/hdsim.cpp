// Command-line front end for the hdsim library.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hdsim/hdsim.hpp"

namespace {

using namespace hdsim;
using nlohmann::json;

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kData = 3, kNumeric = 4 };

// Writes to `path`, or to standard output when it is empty or "-".
template <class Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
  } else {
    auto out = io::open_out(path);
    fn(out);
  }
}

void emit_json(const std::string& path, const json& j) {
  emit(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

json to_json(const ReplacementErrors& e) {
  return {{"min", e.min}, {"q1", e.q1}, {"median", e.median}, {"mean", e.mean}, {"q3", e.q3}, {"max", e.max}};
}

json to_json(const NearestCorResult& r) {
  return {{"iterations", r.iterations},
          {"residual", r.residual},
          {"frobenius_distance", r.frobenius_distance},
          {"converged", r.converged},
          {"alternating_projections_fallback", r.used_fallback},
          {"replacement_errors", to_json(r.replacement_errors)}};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto f : io::split(s)) out.emplace_back(f);
  return out;
}

io::DataTable load_data(const std::string& path, const std::string& columns) {
  // Missing values are judged on the selected columns only.
  auto in = io::open_in(path);
  std::string header;
  std::getline(in, header);
  std::stringstream rest;
  rest << in.rdbuf();
  if (columns.empty()) {
    std::stringstream all(header + "\n" + rest.str());
    auto t = io::read_data_csv(all);
    if (t.dropped_rows) std::cerr << "dropped " << t.dropped_rows << " rows with missing values\n";
    return t;
  }
  const auto wanted = split_list(columns);
  const auto names = io::split(header);
  std::vector<std::size_t> idx;
  for (const auto& w : wanted) {
    std::size_t k = 0;
    while (k < names.size() && names[k] != w) ++k;
    if (k == names.size()) throw DataError("no column named '" + w + "'");
    idx.push_back(k);
  }
  std::stringstream filtered;
  for (std::size_t j = 0; j < wanted.size(); ++j) filtered << (j ? "," : "") << wanted[j];
  filtered << '\n';
  std::string line;
  while (std::getline(rest, line)) {
    if (io::trim(line).empty()) continue;
    const auto fields = io::split(line);
    if (fields.size() != names.size()) throw DataError("data CSV row has the wrong number of fields");
    for (std::size_t j = 0; j < idx.size(); ++j) filtered << (j ? "," : "") << fields[idx[j]];
    filtered << '\n';
  }
  auto t = io::read_data_csv(filtered);
  if (t.dropped_rows) std::cerr << "dropped " << t.dropped_rows << " rows with missing values\n";
  return t;
}

MarginFit fit_column(const std::string& family, std::span<const double> xs, LogScaleEstimator scale) {
  if (family == "normal") return fit_normal(xs);
  if (family == "lognormal") return fit_lognormal(xs, scale);
  if (family == "nbinom" || family == "negative_binomial") return fit_nbinom_mom(xs);
  throw ParameterError("fit-margins: no estimator for family '" + family + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-dimensional random vectors with given margins and correlation"};
  app.require_subcommand(1);
  int threads = 0;
  std::uint64_t seed = 0;
  app.add_option("--threads", threads, "Worker threads (default: HDSIM_THREADS or all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "Random seed");

  // fit-margins
  auto* fit = app.add_subcommand("fit-margins", "Fit marginal distributions to data columns");
  std::string fit_in, fit_out, fit_columns, fit_default = "normal", fit_scale = "mle";
  std::vector<std::string> fit_families;
  fit->add_option("--in", fit_in, "Data CSV with a header row")->required();
  fit->add_option("--out", fit_out, "Margins JSON (default: stdout)");
  fit->add_option("--columns", fit_columns, "Comma-separated column subset");
  fit->add_option("--family", fit_families, "COLUMN=FAMILY, repeatable (normal, lognormal, nbinom)");
  fit->add_option("--default-family", fit_default, "Family for columns without --family")
      ->check(CLI::IsMember({"normal", "lognormal", "nbinom"}));
  fit->add_option("--lognormal-scale", fit_scale, "Log-scale estimator")->check(CLI::IsMember({"mle", "mad"}));

  // estimate-cor
  auto* est = app.add_subcommand("estimate-cor", "Estimate a correlation matrix from data");
  std::string est_in, est_out, est_type = "pearson", est_columns;
  est->add_option("--in", est_in, "Data CSV with a header row")->required();
  est->add_option("--type", est_type)->check(CLI::IsMember({"pearson", "spearman", "kendall"}));
  est->add_option("--columns", est_columns, "Comma-separated column subset");
  est->add_option("--out", est_out, "Matrix CSV (default: stdout)");

  // convert-cor
  auto* conv = app.add_subcommand("convert-cor", "Convert between dependence measures under normality");
  std::string conv_in, conv_out, conv_from, conv_to;
  conv->add_option("--in", conv_in, "Matrix CSV")->required();
  conv->add_option("--from", conv_from)->required()->check(CLI::IsMember({"pearson", "spearman", "kendall"}));
  conv->add_option("--to", conv_to)->required()->check(CLI::IsMember({"pearson", "spearman", "kendall"}));
  conv->add_option("--out", conv_out, "Matrix CSV (default: stdout)");

  // bounds
  auto* bnd = app.add_subcommand("bounds", "Estimate attainable correlation bounds for a margin pair");
  std::string bnd_margins, bnd_type = "pearson", bnd_out;
  std::size_t bnd_i = 0, bnd_j = 1, bnd_n = 1'000'000;
  bnd->add_option("--margins", bnd_margins, "Margins JSON")->required();
  bnd->add_option("--i", bnd_i, "First margin index");
  bnd->add_option("--j", bnd_j, "Second margin index");
  bnd->add_option("--type", bnd_type)->check(CLI::IsMember({"pearson", "spearman", "kendall"}));
  bnd->add_option("--samples", bnd_n, "Samples per margin")->check(CLI::Range(std::size_t{1000}, std::size_t{1} << 40));
  bnd->add_option("--out", bnd_out, "JSON (default: stdout)");

  // check-admissible
  auto* chk = app.add_subcommand("check-admissible", "Test whether a matrix is a positive definite correlation matrix");
  std::string chk_in;
  bool chk_strict = false;
  chk->add_option("--in", chk_in, "Matrix CSV")->required();
  chk->add_flag("--strict", chk_strict, "Exit 4 when the matrix is not admissible");

  // nearest-cor
  auto* near = app.add_subcommand("nearest-cor", "Nearest correlation matrix in the Frobenius norm");
  std::string near_in, near_out, near_report, near_method = "newton";
  NearestCorOptions near_opt;
  near->add_option("--in", near_in, "Matrix CSV")->required();
  near->add_option("--out", near_out, "Repaired matrix CSV (default: stdout)");
  near->add_option("--report", near_report, "Diagnostics JSON");
  near->add_option("--method", near_method)->check(CLI::IsMember({"newton", "fast"}));
  near->add_option("--tol", near_opt.tol)->check(CLI::PositiveNumber);
  near->add_option("--max-iter", near_opt.max_iter)->check(CLI::PositiveNumber);

  // match-pearson
  auto* match = app.add_subcommand("match-pearson", "Normal-scale matrix matching a Pearson target");
  std::string match_margins, match_in, match_out;
  PearsonMatchOptions match_opt;
  match->add_option("--margins", match_margins, "Margins JSON")->required();
  match->add_option("--in", match_in, "Pearson target matrix CSV")->required();
  match->add_option("--out", match_out, "Matrix CSV (default: stdout)");
  match->add_option("--degree", match_opt.degree, "Hermite degree")->check(CLI::Range(3, 200));

  // simulate
  auto* sim = app.add_subcommand("simulate", "Draw random vectors");
  std::string sim_margins, sim_cor, sim_type = "pearson", sim_repair = "newton", sim_out, sim_report;
  std::size_t sim_n = 0;
  bool sim_no_adjust = false;
  sim->add_option("--margins", sim_margins, "Margins JSON")->required();
  sim->add_option("--cor", sim_cor, "Target matrix CSV")->required();
  sim->add_option("--type", sim_type)->check(CLI::IsMember({"pearson", "spearman", "kendall"}));
  sim->add_option("--n", sim_n, "Number of vectors")->required()->check(CLI::PositiveNumber);
  sim->add_option("--repair", sim_repair)->check(CLI::IsMember({"newton", "fast", "fail"}));
  sim->add_option("--out", sim_out, "Data CSV (default: stdout)");
  sim->add_option("--report", sim_report, "Report JSON");
  sim->add_flag("--no-adjust", sim_no_adjust, "Treat --cor as the normal-scale matrix; skip mapping");

  // bench
  auto* bench = app.add_subcommand("bench", "Monte Carlo evaluations");
  bench->require_subcommand(1);
  auto* acc = bench->add_subcommand("accuracy", "Bivariate accuracy over the attainable range");
  std::string acc_dist = "norm", acc_type = "pearson", acc_out;
  AccuracyExperiment acc_exp;
  acc->add_option("--dist", acc_dist)->check(CLI::IsMember({"norm", "gamma", "nbinom"}));
  acc->add_option("--type", acc_type)->check(CLI::IsMember({"pearson", "spearman", "kendall"}));
  acc->add_option("--B", acc_exp.B, "Vectors per grid point")->check(CLI::PositiveNumber);
  acc->add_option("--grid-size", acc_exp.grid_size)->check(CLI::Range(2, 100000));
  acc->add_option("--epsilon", acc_exp.epsilon)->check(CLI::PositiveNumber);
  acc->add_option("--out", acc_out, "Per-point CSV (default: stdout)");
  auto* scale = bench->add_subcommand("scale", "Timing of the four workflow steps by dimension");
  std::string scale_dims = "100,250,500,1000,2500,5000,10000", scale_type = "spearman", scale_repair = "newton",
              scale_out, scale_meta;
  ScalingExperiment scale_exp;
  scale->add_option("--dims", scale_dims, "Comma-separated ascending dimensions");
  scale->add_option("--type", scale_type)->check(CLI::IsMember({"pearson", "spearman", "kendall"}));
  scale->add_option("--B", scale_exp.B)->check(CLI::PositiveNumber);
  scale->add_option("--repair", scale_repair)->check(CLI::IsMember({"newton", "fast", "fail"}));
  scale->add_option("--out", scale_out, "Timing CSV (default: stdout)");
  scale->add_option("--meta", scale_meta, "Machine metadata JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    set_threads(resolve_threads(threads));

    if (*fit) {
      const auto table = load_data(fit_in, fit_columns);
      std::map<std::string, std::string> family;
      for (const auto& spec : fit_families) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ParameterError("--family expects COLUMN=FAMILY, got '" + spec + "'");
        family[spec.substr(0, eq)] = spec.substr(eq + 1);
      }
      const auto scale_est = fit_scale == "mad" ? LogScaleEstimator::MeanAbsoluteDeviation : LogScaleEstimator::MaximumLikelihood;
      std::vector<MarginSpec> margins;
      for (std::size_t j = 0; j < table.names.size(); ++j) {
        const auto it = family.find(table.names[j]);
        const auto col = table.values.col(static_cast<Index>(j));
        margins.push_back(fit_column(it == family.end() ? fit_default : it->second,
                                     std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), scale_est)
                              .spec);
      }
      emit_json(fit_out, io::margins_to_json(margins));
    } else if (*est) {
      const auto table = load_data(est_in, est_columns);
      const auto r = cor(table.values, parse_dependency(est_type));
      emit(est_out, [&](std::ostream& out) { io::write_matrix_csv(out, r.matrix()); });
    } else if (*conv) {
      const CorrelationMatrix m(io::read_matrix_csv(conv_in), parse_dependency(conv_from));
      const auto r = cor_convert(m, parse_dependency(conv_from), parse_dependency(conv_to));
      emit(conv_out, [&](std::ostream& out) { io::write_matrix_csv(out, r.matrix()); });
    } else if (*bnd) {
      const auto margins = io::margins_from_json(io::read_json(bnd_margins));
      if (bnd_i >= margins.size() || bnd_j >= margins.size()) throw ParameterError("bounds: margin index out of range");
      const auto b = cor_bounds(margins[bnd_i], margins[bnd_j], parse_dependency(bnd_type), bnd_n, seed);
      emit_json(bnd_out, {{"lower", b.lower}, {"upper", b.upper}, {"n_samples", b.n_samples}, {"type", dependency_name(b.type)}});
    } else if (*chk) {
      const Matrix m = io::read_matrix_csv(chk_in);
      const bool ok = iscorrelation(m);
      json j{{"admissible", ok}};
      if (m.rows() == m.cols()) j["min_eigenvalue"] = eigvalsh(0.5 * (m + m.transpose()))(0);
      std::cout << j.dump(2) << '\n';
      if (!ok && chk_strict) return kNumeric;
    } else if (*near) {
      const Matrix m = io::read_matrix_csv(near_in);
      Matrix repaired;
      json diag;
      if (near_method == "fast") {
        repaired = cor_fastPD(m).matrix();
        diag = {{"method", "fast"}, {"frobenius_distance", (m - repaired).norm()},
                {"replacement_errors", to_json(replacement_errors(m, repaired))}};
      } else {
        const auto r = cor_nearPD(m, near_opt);
        repaired = r.matrix.matrix();
        diag = to_json(r);
        diag["method"] = "newton";
        if (!r.converged) std::cerr << "warning: nearest-cor did not reach the tolerance\n";
      }
      emit(near_out, [&](std::ostream& out) { io::write_matrix_csv(out, repaired); });
      if (!near_report.empty()) io::write_json(near_report, diag);
    } else if (*match) {
      const auto margins = io::margins_from_json(io::read_json(match_margins));
      const CorrelationMatrix target(io::read_matrix_csv(match_in), DependencyType::Pearson);
      const auto r = pearson_match_matrix(target, margins, match_opt);
      emit(match_out, [&](std::ostream& out) { io::write_matrix_csv(out, r.matrix()); });
    } else if (*sim) {
      auto margins = io::margins_from_json(io::read_json(sim_margins));
      const auto type = sim_no_adjust ? DependencyType::Pearson : parse_dependency(sim_type);
      CorrelationMatrix target(io::read_matrix_csv(sim_cor), type);
      SimulationConfig cfg(sim_n, std::move(target), std::move(margins), seed, parse_repair(sim_repair));
      cfg.adjust = !sim_no_adjust;
      const auto report = simulate(cfg);
      std::vector<std::string> names;
      for (Index j = 0; j < report.data.cols(); ++j) names.push_back("V" + std::to_string(j + 1));
      emit(sim_out, [&](std::ostream& out) { io::write_data_csv(out, report.data, names); });
      if (!sim_report.empty()) {
        json j{{"n", cfg.n},
               {"d", cfg.margins.size()},
               {"seed", report.seed},
               {"type", sim_no_adjust ? "normal-scale" : sim_type},
               {"repair_policy", sim_repair},
               {"repaired", report.repaired},
               {"timings",
                {{"adjust_cor", report.timings.adjust_cor},
                 {"check_admissibility", report.timings.check_admissibility},
                 {"simulate_data", report.timings.simulate_data}}}};
        if (report.repair) j["nearest_cor"] = to_json(*report.repair);
        if (report.input_matrix.dim() <= 50) {
          json rows = json::array();
          for (Index i = 0; i < report.input_matrix.dim(); ++i) {
            json row = json::array();
            for (Index k = 0; k < report.input_matrix.dim(); ++k) row.push_back(report.input_matrix(i, k));
            rows.push_back(row);
          }
          j["input_matrix"] = rows;
        }
        io::write_json(sim_report, j);
      }
    } else if (*acc) {
      acc_exp.dist = parse_dist(acc_dist);
      acc_exp.type = parse_dependency(acc_type);
      acc_exp.seed = seed;
      const auto r = run_accuracy(acc_exp);
      emit(acc_out, [&](std::ostream& out) { write_accuracy_csv(out, r); });
      std::cerr << dist_name(acc_exp.dist) << ' ' << acc_type << " B=" << acc_exp.B << " MAE=" << io::format_double(r.mae)
                << " bounds=[" << r.bounds.lower << ", " << r.bounds.upper << "] failed_points=" << r.failures << '\n';
    } else if (*scale) {
      scale_exp.dims.clear();
      for (const auto& s : split_list(scale_dims)) scale_exp.dims.push_back(static_cast<Index>(std::stol(s)));
      scale_exp.type = parse_dependency(scale_type);
      scale_exp.repair = parse_repair(scale_repair);
      scale_exp.seed = seed;
      std::vector<ScalingRow> rows;
      emit(scale_out, [&](std::ostream& out) {
        out << "d,type,B,compute_cor,adjust_cor,check_admissibility,simulate_data,total,repaired,status\n";
        for (Index d : scale_exp.dims) {
          rows.push_back(run_scaling_point(d, scale_exp));
          std::ostringstream line;
          write_scaling_csv(line, scale_exp, {rows.back()});
          const auto text = line.str();
          out << text.substr(text.find('\n') + 1) << std::flush;
        }
      });
      if (!scale_meta.empty()) io::write_json(scale_meta, scaling_metadata(scale_exp));
    }
    return kOk;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
