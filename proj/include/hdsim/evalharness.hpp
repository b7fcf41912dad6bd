#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <new>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hdsim/correlation.hpp"
#include "hdsim/generator.hpp"
#include "hdsim/io.hpp"
#include "hdsim/margins.hpp"
#include "hdsim/parallel.hpp"
#include "hdsim/pearsonmatch.hpp"
#include "hdsim/random.hpp"

namespace hdsim {

// ---------------------------------------------------------------------------
// Bivariate accuracy over the attainable correlation range

enum class AccuracyDist { Normal01, Gamma10_1, NB_4_3em4 };

inline const char* dist_name(AccuracyDist d) {
  switch (d) {
    case AccuracyDist::Normal01: return "norm";
    case AccuracyDist::Gamma10_1: return "gamma";
    case AccuracyDist::NB_4_3em4: return "nbinom";
  }
  return "unknown";
}

inline AccuracyDist parse_dist(std::string_view s) {
  if (s == "norm" || s == "normal") return AccuracyDist::Normal01;
  if (s == "gamma") return AccuracyDist::Gamma10_1;
  if (s == "nbinom") return AccuracyDist::NB_4_3em4;
  throw ParameterError("unknown accuracy distribution '" + std::string(s) + "'");
}

inline MarginSpec accuracy_margin(AccuracyDist d) {
  switch (d) {
    case AccuracyDist::Normal01: return MarginSpec::normal(0.0, 1.0);
    case AccuracyDist::Gamma10_1: return MarginSpec::gamma(10.0, 1.0);
    case AccuracyDist::NB_4_3em4: return MarginSpec::negative_binomial(4.0, 3e-4);
  }
  throw ParameterError("unknown accuracy distribution");
}

struct AccuracyExperiment {
  AccuracyDist dist = AccuracyDist::Normal01;
  DependencyType type = DependencyType::Pearson;
  std::size_t B = 10'000;
  int grid_size = 100;
  double epsilon = 0.01;
  std::uint64_t seed = 0;
  std::size_t bound_samples = 1'000'000;
};

struct AccuracyPoint {
  double target = 0;
  double estimate = std::nan("");
  double input = std::nan("");  // normal-scale correlation used
  bool ok = false;
  std::string error;
};

struct AccuracyResult {
  AccuracyExperiment experiment;
  CorrelationBounds bounds;
  std::vector<AccuracyPoint> points;
  double mae = std::nan("");
  std::size_t failures = 0;
};

/// Target grid from lower + epsilon to upper - epsilon in equal steps.
inline std::vector<double> accuracy_grid(double lower, double upper, int size, double epsilon) {
  if (size < 2) throw ParameterError("grid size must be >= 2");
  if (!(epsilon > 0)) throw ParameterError("grid epsilon must be > 0");
  const double a = lower + epsilon, b = upper - epsilon;
  std::vector<double> g(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) g[static_cast<std::size_t>(i)] = a + (b - a) * i / (size - 1);
  return g;
}

inline AccuracyResult run_accuracy(const AccuracyExperiment& exp) {
  const MarginSpec margin = accuracy_margin(exp.dist);
  AccuracyResult out{exp, cor_bounds(margin, margin, exp.type, exp.bound_samples, mix_seed(exp.seed, 0xB0))};
  const auto grid = accuracy_grid(out.bounds.lower, out.bounds.upper, exp.grid_size, exp.epsilon);
  std::optional<HermiteCoeffs> coeffs;
  if (exp.type == DependencyType::Pearson) coeffs = hermite_coeffs(margin);
  const std::vector<MarginSpec> margins{margin, margin};

  out.points.resize(grid.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < grid.size(); ++i) {
    AccuracyPoint& p = out.points[i];
    p.target = grid[i];
    try {
      const double rz = coeffs ? pearson_match_pair(p.target, *coeffs, *coeffs)
                               : convert_value(p.target, exp.type, DependencyType::Pearson);
      p.input = rz;
      Matrix r(2, 2);
      r << 1.0, rz, rz, 1.0;
      const Matrix data = rvec(exp.B, CorrelationMatrix(r, DependencyType::Pearson), margins, mix_seed(exp.seed, i + 1));
      p.estimate = cor(data, exp.type)(0, 1);
      p.ok = true;
    } catch (const Error& e) {
      p.error = e.what();
    }
  }
  double sum = 0;
  std::size_t good = 0;
  for (const auto& p : out.points) {
    if (!p.ok) {
      ++out.failures;
      continue;
    }
    sum += std::abs(p.estimate - p.target);
    ++good;
  }
  if (good) out.mae = sum / static_cast<double>(good);
  return out;
}

inline void write_accuracy_csv(std::ostream& out, const AccuracyResult& r) {
  out << "dist,type,B,index,target,estimate,input,ok\n";
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const auto& p = r.points[i];
    out << dist_name(r.experiment.dist) << ',' << dependency_name(r.experiment.type) << ',' << r.experiment.B << ','
        << i << ',' << io::format_double(p.target) << ',' << io::format_double(p.estimate) << ','
        << io::format_double(p.input) << ',' << (p.ok ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------
// High-dimensional scaling of the four workflow steps

struct ScalingExperiment {
  std::vector<Index> dims{100, 250, 500, 1000, 2500, 5000, 10000};
  DependencyType type = DependencyType::Spearman;
  std::size_t B = 1000;
  std::uint64_t seed = 0;
  RepairPolicy repair = RepairPolicy::NearestNewton;
};

struct ScalingRow {
  Index d = 0;
  StepTimings timings;
  bool repaired = false;
  bool ok = false;
  std::string error;
};

/// Gamma margins with shape ~ Uniform(1, 10) and rate ~ Exponential(mean 5).
inline std::vector<MarginSpec> scaling_margins(Index d, std::uint64_t seed) {
  CounterRng rng(seed, static_cast<std::uint32_t>(d), StreamTag::Synthetic);
  std::vector<MarginSpec> out;
  out.reserve(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j) {
    const double shape = rng.uniform(1.0, 10.0);
    const double rate = rng.exponential(5.0);
    out.push_back(MarginSpec::gamma(shape, rate));
  }
  return out;
}

/// One dimension of the scaling study: synthesize data, then time the steps.
inline ScalingRow run_scaling_point(Index d, const ScalingExperiment& exp) {
  ScalingRow row;
  row.d = d;
  try {
    const auto margins = scaling_margins(d, exp.seed);
    const auto truth = cor_randPD(d, mix_seed(exp.seed, static_cast<std::uint64_t>(d)));
    const Matrix data = rvec(exp.B, truth, margins, mix_seed(exp.seed, static_cast<std::uint64_t>(d) + 1));

    Stopwatch sw;
    const CorrelationMatrix estimate = cor(data, exp.type);
    const double compute = sw.seconds();

    SimulationConfig cfg(exp.B, estimate, margins, mix_seed(exp.seed, static_cast<std::uint64_t>(d) + 2), exp.repair);
    const auto report = simulate(cfg);
    row.timings = report.timings;
    row.timings.compute_cor = compute;
    row.repaired = report.repaired;
    row.ok = true;
  } catch (const std::bad_alloc&) {
    row.error = "out of memory";
  } catch (const Error& e) {
    row.error = e.what();
  }
  return row;
}

inline std::vector<ScalingRow> run_scaling(const ScalingExperiment& exp) {
  for (std::size_t i = 1; i < exp.dims.size(); ++i)
    if (exp.dims[i] <= exp.dims[i - 1]) throw ParameterError("scaling dims must be strictly ascending");
  std::vector<ScalingRow> rows;
  for (Index d : exp.dims) rows.push_back(run_scaling_point(d, exp));
  return rows;
}

inline void write_scaling_csv(std::ostream& out, const ScalingExperiment& exp, const std::vector<ScalingRow>& rows) {
  out << "d,type,B,compute_cor,adjust_cor,check_admissibility,simulate_data,total,repaired,status\n";
  for (const auto& r : rows) {
    out << r.d << ',' << dependency_name(exp.type) << ',' << exp.B << ',';
    if (r.ok) {
      out << io::format_double(*r.timings.compute_cor) << ',' << io::format_double(r.timings.adjust_cor) << ','
          << io::format_double(r.timings.check_admissibility) << ',' << io::format_double(r.timings.simulate_data)
          << ',' << io::format_double(r.timings.total()) << ',' << (r.repaired ? 1 : 0) << ",ok\n";
    } else {
      out << ",,,,,," << "failed: " << r.error << '\n';
    }
  }
}

inline nlohmann::json scaling_metadata(const ScalingExperiment& exp) {
  return {{"cores", hardware_threads()},
          {"threads", threads()},
          {"type", dependency_name(exp.type)},
          {"B", exp.B},
          {"seed", exp.seed},
          {"repair", repair_name(exp.repair)},
          {"dims", exp.dims},
          {"margins", "gamma(shape ~ uniform(1, 10), rate ~ exponential with mean 5)"},
          {"correlation", "cor_randPD, one factor"}};
}

}  // namespace hdsim
