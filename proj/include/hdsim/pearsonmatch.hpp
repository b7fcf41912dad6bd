#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hdsim/correlation.hpp"
#include "hdsim/errors.hpp"
#include "hdsim/margins.hpp"
#include "hdsim/normal.hpp"

namespace hdsim {

/// Gauss rule for E[f(Z)], Z standard normal.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // sum to 1
};

namespace detail {

// Orthonormal probabilists' Hermite values h_0..h_{n-1} at x.
inline void hermite_orthonormal(double x, int n, double* out) {
  out[0] = 1.0;
  if (n > 1) out[1] = x;
  for (int k = 1; k + 1 < n; ++k)
    out[k + 1] = (x * out[k] - std::sqrt(static_cast<double>(k)) * out[k - 1]) / std::sqrt(static_cast<double>(k + 1));
}

inline GaussHermiteRule compute_gauss_hermite(int n) {
  // Golub-Welsch on the symmetric Jacobi matrix, then Newton polish of each node.
  Vector diag = Vector::Zero(n), off(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Matrix> solver;
  solver.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
  GaussHermiteRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  std::vector<double> h(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i < n; ++i) {
    double x = solver.eigenvalues()(i);
    for (int it = 0; it < 3; ++it) {
      hermite_orthonormal(x, n + 1, h.data());
      // h_n' = sqrt(n) h_{n-1}
      x -= h[static_cast<std::size_t>(n)] / (std::sqrt(static_cast<double>(n)) * h[static_cast<std::size_t>(n) - 1]);
    }
    hermite_orthonormal(x, n, h.data());
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += h[static_cast<std::size_t>(k)] * h[static_cast<std::size_t>(k)];
    rule.nodes[static_cast<std::size_t>(i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = 1.0 / s;
  }
  // Exact symmetry about zero.
  for (int i = 0; i < n / 2; ++i) {
    const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(n - 1 - i);
    const double x = 0.5 * (rule.nodes[b] - rule.nodes[a]);
    const double w = 0.5 * (rule.weights[a] + rule.weights[b]);
    rule.nodes[a] = -x;
    rule.nodes[b] = x;
    rule.weights[a] = rule.weights[b] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

}  // namespace detail

/// n-point rule, computed once per n and cached.
inline const GaussHermiteRule& gauss_hermite(int n) {
  if (n < 1) throw ParameterError("gauss_hermite: need at least one node");
  static std::mutex mutex;
  static std::map<int, GaussHermiteRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::compute_gauss_hermite(n)).first;
  return it->second;
}

/// Hermite expansion of z -> F^{-1}(Phi(z)) for one margin.
struct HermiteCoeffs {
  MarginSpec margin;
  int degree = 0;
  int quad_nodes = 0;
  std::vector<double> coeffs;      // a_k = E[f(Z) He_k(Z)] / k!
  std::vector<double> normalized;  // c_k = E[f(Z) h_k(Z)] = sqrt(k!) a_k, h_k orthonormal
  double mean = 0;
  double sd = 0;
  bool parseval_ok = false;  // sum_{k>=1} c_k^2 within 1e-3 relative of sd^2

  /// Truncated sum_{k=1..K} c_k^2, the variance captured by the expansion.
  double captured_variance() const {
    double s = 0;
    for (std::size_t k = 1; k < normalized.size(); ++k) s += normalized[k] * normalized[k];
    return s;
  }
};

struct PearsonMatchOptions {
  int degree = 20;
  int quad_nodes = 64;
  int max_degree = 40;
  int max_quad_nodes = 256;
  double tol = 1e-10;
  double parseval_tol = 1e-3;
};

namespace detail {

// Support points y_j and normal scores t_j = Phi^{-1}(F(y_j)) of a discrete
// margin, truncated where the upper tail drops below `tail`.
struct DiscreteSteps {
  std::vector<double> values;
  std::vector<double> scores;
};

inline DiscreteSteps discrete_steps(const MarginSpec& m, double tail) {
  DiscreteSteps s;
  const auto push = [&](double y, double cdf_value, double ccdf_value) {
    s.values.push_back(y);
    s.scores.push_back(cdf_value <= 0.5 ? normal::quantile(cdf_value) : normal::upper_quantile(ccdf_value));
  };
  if (m.family() == Family::EmpiricalDiscrete) {
    const auto& t = *m.as<EmpiricalDiscrete>().table;
    for (std::size_t j = 0; j < t.support.size(); ++j) push(t.support[j], t.cumulative[j], t.upper[j]);
    return s;
  }
  const auto& nb = m.as<NegativeBinomial>();
  const double last = nb_upper_quantile(nb, tail);
  for (double k = 0; k <= last; k += 1) push(k, nb_cdf(nb, k), nb_ccdf(nb, k));
  return s;
}

// c_k for a step function f(z) = y_0 + sum_j (y_j - y_{j-1}) 1{z > t_{j-1}}:
// E[1{Z > t} h_k(Z)] = h_{k-1}(t) phi(t) / sqrt(k).
inline std::vector<double> step_coefficients(const DiscreteSteps& s, int degree, double mean) {
  std::vector<double> c(static_cast<std::size_t>(degree) + 1, 0.0);
  c[0] = mean;
  std::vector<double> h(static_cast<std::size_t>(degree));
  for (std::size_t j = 1; j < s.values.size(); ++j) {
    const double t = s.scores[j - 1];
    if (!std::isfinite(t) || std::abs(t) > 38.0) continue;
    const double jump = (s.values[j] - s.values[j - 1]) * normal::pdf(t);
    hermite_orthonormal(t, degree, h.data());
    for (int k = 1; k <= degree; ++k)
      c[static_cast<std::size_t>(k)] += jump * h[static_cast<std::size_t>(k) - 1] / std::sqrt(static_cast<double>(k));
  }
  return c;
}

inline std::vector<double> quadrature_coefficients(const MarginSpec& m, int degree, int nodes) {
  const auto& rule = gauss_hermite(nodes);
  std::vector<double> c(static_cast<std::size_t>(degree) + 1, 0.0);
  std::vector<double> h(static_cast<std::size_t>(degree) + 1);
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double fx = value_at_score(m, rule.nodes[i]) * rule.weights[i];
    hermite_orthonormal(rule.nodes[i], degree + 1, h.data());
    for (int k = 0; k <= degree; ++k) c[static_cast<std::size_t>(k)] += fx * h[static_cast<std::size_t>(k)];
  }
  return c;
}

inline HermiteCoeffs expand(const MarginSpec& m, int degree, int nodes, double parseval_tol) {
  HermiteCoeffs out{m};
  out.degree = degree;
  out.quad_nodes = nodes;
  out.mean = hdsim::mean(m);
  out.sd = hdsim::sd(m);
  if (m.is_discrete()) {
    out.normalized = step_coefficients(discrete_steps(m, 1e-10), degree, out.mean);
  } else {
    out.normalized = quadrature_coefficients(m, degree, nodes);
  }
  out.coeffs.resize(out.normalized.size());
  double log_fact = 0.0;
  for (std::size_t k = 0; k < out.normalized.size(); ++k) {
    if (k > 0) log_fact += std::log(static_cast<double>(k));
    out.coeffs[k] = out.normalized[k] * std::exp(-0.5 * log_fact);
  }
  const double var = out.sd * out.sd;
  out.parseval_ok = std::abs(out.captured_variance() - var) <= parseval_tol * var;
  return out;
}

}  // namespace detail

/// Coefficients of F^{-1}(Phi(z)) at exactly the requested degree and rule size.
/// Discrete margins use the closed form for step functions instead of quadrature.
inline HermiteCoeffs hermite_coeffs(const MarginSpec& m, int degree, int quad_nodes) {
  if (degree < 3) throw ParameterError("hermite_coeffs: degree must be >= 3");
  if (quad_nodes < 2 * degree) throw ParameterError("hermite_coeffs: need quad_nodes >= 2 * degree");
  if (!std::isfinite(variance(m))) throw UnsupportedMarginError("hermite_coeffs: margin has infinite variance");
  return detail::expand(m, degree, quad_nodes, 1e-3);
}

/// Default expansion: starts at opt.degree / opt.quad_nodes and doubles both
/// while the Parseval gate fails, up to the configured maxima.
inline HermiteCoeffs hermite_coeffs(const MarginSpec& m, const PearsonMatchOptions& opt = {}) {
  int degree = opt.degree, nodes = opt.quad_nodes;
  HermiteCoeffs c = hermite_coeffs(m, degree, nodes);
  while (!c.parseval_ok && (degree < opt.max_degree || nodes < opt.max_quad_nodes)) {
    degree = std::min(2 * degree, opt.max_degree);
    nodes = std::min(2 * nodes, opt.max_quad_nodes);
    c = detail::expand(m, degree, nodes, opt.parseval_tol);
  }
  return c;
}

/// Covariance of f_i(Z_i), f_j(Z_j) when corr(Z_i, Z_j) = rho, truncated at
/// the smaller of the two degrees.
inline double hermite_covariance(const HermiteCoeffs& a, const HermiteCoeffs& b, double rho) {
  const int K = std::min(a.degree, b.degree);
  double s = 0.0;
  for (int k = K; k >= 1; --k) s = (s + a.normalized[static_cast<std::size_t>(k)] * b.normalized[static_cast<std::size_t>(k)]) * rho;
  return s;
}

/// Normal-scale correlation rho_z giving Pearson correlation `target` between
/// the two margins.
inline double pearson_match_pair(double target, const HermiteCoeffs& a, const HermiteCoeffs& b,
                                 double tol = 1e-10) {
  if (!(target >= -1.0 && target <= 1.0)) throw DomainError("pearson_match_pair: target must lie in [-1, 1]");
  const double scale = a.sd * b.sd;
  const int K = std::min(a.degree, b.degree);
  const auto g = [&](double r) { return hermite_covariance(a, b, r) - target * scale; };
  const auto dg = [&](double r) {
    double s = 0.0;
    for (int k = K; k >= 1; --k) s = s * r + k * a.normalized[static_cast<std::size_t>(k)] * b.normalized[static_cast<std::size_t>(k)];
    return s;
  };
  double lo = -1.0, hi = 1.0;
  double glo = g(lo), ghi = g(hi);
  if (glo == 0.0) return lo;
  if (ghi == 0.0) return hi;
  if ((glo > 0.0) == (ghi > 0.0)) {
    const double l = hermite_covariance(a, b, -1.0) / scale, u = hermite_covariance(a, b, 1.0) / scale;
    throw TargetOutOfRangeError("Pearson target " + std::to_string(target) + " is outside the attainable range [" +
                                    std::to_string(std::min(l, u)) + ", " + std::to_string(std::max(l, u)) + "]",
                                std::min(l, u), std::max(l, u));
  }
  const bool increasing = ghi > 0.0;
  const auto shrink = [&](double r, double gr) {
    if ((gr > 0.0) == increasing) hi = r;
    else lo = r;
  };
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (gm == 0.0) return mid;
    shrink(mid, gm);
  }
  double r = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const double gr = g(r);
    if (std::abs(gr) <= tol * scale) break;
    shrink(r, gr);
    const double slope = dg(r);
    double next = slope != 0.0 ? r - gr / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - r) <= 1e-16) break;
    r = next;
  }
  return r;
}

inline double pearson_match_pair(double target, const MarginSpec& mi, const MarginSpec& mj,
                                 const PearsonMatchOptions& opt = {}) {
  return pearson_match_pair(target, hermite_coeffs(mi, opt), hermite_coeffs(mj, opt), opt.tol);
}

/// Elementwise matching of a Pearson target matrix; one expansion per margin.
/// The result can be indefinite.
inline CorrelationMatrix pearson_match_matrix(const CorrelationMatrix& target, const std::vector<MarginSpec>& margins,
                                              const PearsonMatchOptions& opt = {}) {
  if (target.type() != DependencyType::Pearson) throw ParameterError("pearson_match_matrix: target must hold Pearson correlations");
  const Index d = target.dim();
  if (static_cast<std::size_t>(d) != margins.size()) throw ParameterError("pearson_match_matrix: margin count differs from matrix dimension");
  std::vector<std::optional<HermiteCoeffs>> coeffs(margins.size());
  std::vector<std::string> errors(margins.size());
#pragma omp parallel for schedule(dynamic)
  for (Index i = 0; i < d; ++i) {
    try {
      coeffs[static_cast<std::size_t>(i)] = hermite_coeffs(margins[static_cast<std::size_t>(i)], opt);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) throw UnsupportedMarginError("margin " + std::to_string(i) + ": " + errors[i]);

  Matrix out = Matrix::Identity(d, d);
  std::vector<std::optional<TargetOutOfRangeError>> failures(static_cast<std::size_t>(d));
#pragma omp parallel for schedule(dynamic)
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) {
      try {
        out(i, j) = out(j, i) = pearson_match_pair(target(i, j), *coeffs[static_cast<std::size_t>(i)],
                                                   *coeffs[static_cast<std::size_t>(j)], opt.tol);
      } catch (const TargetOutOfRangeError& e) {
        auto& slot = failures[static_cast<std::size_t>(i)];
        if (!slot) slot = TargetOutOfRangeError("pair (" + std::to_string(i) + ", " + std::to_string(j) + "): " + e.what(), e.lower(), e.upper());
      }
    }
  }
  for (const auto& f : failures)
    if (f) throw *f;
  return {std::move(out), DependencyType::Pearson};
}

}  // namespace hdsim
