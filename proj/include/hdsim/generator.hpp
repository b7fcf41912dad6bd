#pragma once

#include <Eigen/Cholesky>

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdsim/correlation.hpp"
#include "hdsim/errors.hpp"
#include "hdsim/linalg.hpp"
#include "hdsim/margins.hpp"
#include "hdsim/nearestcor.hpp"
#include "hdsim/pearsonmatch.hpp"
#include "hdsim/random.hpp"

namespace hdsim {

enum class RepairPolicy { NearestNewton, FastPD, FailIfInadmissible };

inline const char* repair_name(RepairPolicy p) {
  switch (p) {
    case RepairPolicy::NearestNewton: return "newton";
    case RepairPolicy::FastPD: return "fast";
    case RepairPolicy::FailIfInadmissible: return "fail";
  }
  return "unknown";
}

inline RepairPolicy parse_repair(std::string_view s) {
  if (s == "newton") return RepairPolicy::NearestNewton;
  if (s == "fast") return RepairPolicy::FastPD;
  if (s == "fail") return RepairPolicy::FailIfInadmissible;
  throw ParameterError("unknown repair policy '" + std::string(s) + "'");
}

struct SimulationConfig {
  SimulationConfig(std::size_t n_, CorrelationMatrix target_, std::vector<MarginSpec> margins_, std::uint64_t seed_ = 0,
                   RepairPolicy repair_ = RepairPolicy::NearestNewton)
      : n(n_), target(std::move(target_)), margins(std::move(margins_)), seed(seed_), repair(repair_) {
    if (n < 1) throw ParameterError("simulation size n must be >= 1");
    if (static_cast<std::size_t>(target.dim()) != margins.size())
      throw ParameterError("target dimension " + std::to_string(target.dim()) + " differs from margin count " +
                           std::to_string(margins.size()));
  }

  std::size_t n;
  CorrelationMatrix target;
  std::vector<MarginSpec> margins;
  std::uint64_t seed;
  RepairPolicy repair;
  /// When false the target is used as the normal-scale matrix without mapping.
  bool adjust = true;
  PearsonMatchOptions pearson;
  NearestCorOptions nearest;
};

/// Wall-clock seconds per workflow step.
struct StepTimings {
  std::optional<double> compute_cor;
  double adjust_cor = 0;
  double check_admissibility = 0;
  double simulate_data = 0;

  double total() const { return compute_cor.value_or(0.0) + adjust_cor + check_admissibility + simulate_data; }
};

struct SimulationReport {
  Matrix data;
  CorrelationMatrix input_matrix;  // normal-scale matrix actually sampled from
  std::optional<NearestCorResult> repair;
  StepTimings timings;
  std::uint64_t seed = 0;
  bool repaired = false;
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_;
};

namespace detail {

inline double min_eigenvalue(const Matrix& m) { return eigvalsh(m)(0); }

// Lower Cholesky factor, with one jittered retry (1e-10 I, rescaled) for
// matrices that are admissible up to rounding.
inline Matrix cholesky_factor(const Matrix& r) {
  const auto attempt = [](const Matrix& m) -> std::optional<Matrix> {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return std::nullopt;
    Matrix l = llt.matrixL();
    if (!(l.diagonal().minCoeff() > 0.0)) return std::nullopt;
    return l;
  };
  if (auto l = attempt(r)) return *l;
  Matrix jittered = r;
  jittered.diagonal().array() += 1e-10;
  if (auto l = attempt(rescale_unit_diagonal(jittered))) return *l;
  const double lam = min_eigenvalue(r);
  throw InadmissibleError("correlation matrix is not positive definite (min eigenvalue " + std::to_string(lam) + ")",
                          lam);
}

// Column c of Z is stream c; rows 2m and 2m+1 come from counter block m.
inline Matrix standard_normals(std::size_t n, Index d, std::uint64_t seed) {
  Matrix z(static_cast<Index>(n), d);
  const std::size_t pairs = (n + 1) / 2;
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < d; ++c) {
    double* col = z.col(c).data();
    for (std::size_t m = 0; m < pairs; ++m) {
      const auto v = normal_pair(seed, static_cast<std::uint32_t>(c), StreamTag::Gaussian, m);
      col[2 * m] = v[0];
      if (2 * m + 1 < n) col[2 * m + 1] = v[1];
    }
  }
  return z;
}

inline constexpr Index kRowBlock = 256;

}  // namespace detail

/// n rows iid N(0, R).
inline Matrix rmvn(std::size_t n, const CorrelationMatrix& r, std::uint64_t seed) {
  const Matrix upper = detail::cholesky_factor(r.matrix()).transpose();
  const Matrix z = detail::standard_normals(n, r.dim(), seed);
  Matrix x(z.rows(), z.cols());
  const Index blocks = (z.rows() + detail::kRowBlock - 1) / detail::kRowBlock;
#pragma omp parallel for schedule(dynamic)
  for (Index b = 0; b < blocks; ++b) {
    const Index r0 = b * detail::kRowBlock;
    const Index h = std::min(detail::kRowBlock, z.rows() - r0);
    x.middleRows(r0, h).noalias() = z.middleRows(r0, h) * upper.triangularView<Eigen::Upper>();
  }
  return x;
}

/// Gaussian copula draw: rmvn, then column i through F_i^{-1}(Phi(.)).
inline Matrix rvec(std::size_t n, const CorrelationMatrix& r, const std::vector<MarginSpec>& margins,
                   std::uint64_t seed) {
  if (static_cast<std::size_t>(r.dim()) != margins.size()) throw ParameterError("rvec: margin count differs from matrix dimension");
  Matrix x = rmvn(n, r, seed);
#pragma omp parallel for schedule(dynamic)
  for (Index c = 0; c < x.cols(); ++c)
    transform_scores(margins[static_cast<std::size_t>(c)], std::span<double>(x.col(c).data(), static_cast<std::size_t>(x.rows())));
  return x;
}

/// Step 1: normal-scale matrix for the target.
inline CorrelationMatrix adjust_correlation(const CorrelationMatrix& target, const std::vector<MarginSpec>& margins,
                                            const PearsonMatchOptions& opt = {}) {
  if (target.type() == DependencyType::Pearson) {
    const bool all_normal = std::all_of(margins.begin(), margins.end(), [](const MarginSpec& m) { return m.family() == Family::Normal; });
    return all_normal ? target : pearson_match_matrix(target, margins, opt);
  }
  return cor_convert(target, target.type(), DependencyType::Pearson);
}

/// Steps 1-3: map the target, repair admissibility, draw from the copula.
inline SimulationReport simulate(const SimulationConfig& cfg) {
  StepTimings t;
  Stopwatch sw;
  CorrelationMatrix rx = cfg.adjust ? adjust_correlation(cfg.target, cfg.margins, cfg.pearson)
                                    : CorrelationMatrix(cfg.target.matrix(), DependencyType::Pearson);
  t.adjust_cor = sw.seconds();

  sw = Stopwatch();
  std::optional<NearestCorResult> repair;
  const bool repaired = !iscorrelation(rx);
  if (repaired) {
    switch (cfg.repair) {
      case RepairPolicy::NearestNewton:
        repair = cor_nearPD(rx.matrix(), cfg.nearest);
        rx = repair->matrix;
        break;
      case RepairPolicy::FastPD:
        rx = cor_fastPD(rx.matrix());
        break;
      case RepairPolicy::FailIfInadmissible: {
        const double lam = detail::min_eigenvalue(rx.matrix());
        throw InadmissibleError("input correlation matrix is not admissible (min eigenvalue " + std::to_string(lam) + ")",
                                lam);
      }
    }
  }
  t.check_admissibility = sw.seconds();

  sw = Stopwatch();
  Matrix data = rvec(cfg.n, rx, cfg.margins, cfg.seed);
  t.simulate_data = sw.seconds();

  return {std::move(data), std::move(rx), std::move(repair), t, cfg.seed, repaired};
}

}  // namespace hdsim
