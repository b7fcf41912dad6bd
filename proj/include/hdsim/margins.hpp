#pragma once

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "hdsim/errors.hpp"
#include "hdsim/normal.hpp"
#include "hdsim/random.hpp"

namespace hdsim {

namespace detail {
using boost_policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;
inline constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace detail

/// Probabilities are clamped to [kTailProbability, 1 - kTailProbability]
/// before a quantile function is applied to a normal score.
inline constexpr double kTailProbability = 1e-16;

struct Normal {
  double mean;
  double sd;
};

struct LogNormal {
  double meanlog;
  double sdlog;
};

/// Shape/rate parametrization: density proportional to x^(shape-1) exp(-rate x).
struct Gamma {
  double shape;
  double rate;
};

/// Number of failures before `size` successes with success probability `prob`.
struct NegativeBinomial {
  double size;
  double prob;
};

struct Uniform {
  double lo;
  double hi;
};

/// Finite discrete law on an ascending support.
struct EmpiricalDiscrete {
  struct Table {
    std::vector<double> support;
    std::vector<double> probs;
    std::vector<double> cumulative;  // P(X <= support[j]), last entry exactly 1
    std::vector<double> upper;       // P(X > support[j]), summed from the tail
  };
  std::shared_ptr<const Table> table;

  const std::vector<double>& support() const { return table->support; }
  const std::vector<double>& probs() const { return table->probs; }
};

enum class Family { Normal, LogNormal, Gamma, NegativeBinomial, Uniform, EmpiricalDiscrete };

/// One marginal distribution. Parameters are validated at construction and
/// the value is immutable afterwards, so it can be shared across threads.
class MarginSpec {
 public:
  using Variant = std::variant<Normal, LogNormal, Gamma, NegativeBinomial, Uniform, EmpiricalDiscrete>;

  static MarginSpec normal(double mean, double sd) {
    require(std::isfinite(mean), "normal: mean must be finite");
    require(std::isfinite(sd) && sd > 0.0, "normal: sd must be > 0");
    return MarginSpec(Normal{mean, sd});
  }

  static MarginSpec lognormal(double meanlog, double sdlog) {
    require(std::isfinite(meanlog), "lognormal: meanlog must be finite");
    require(std::isfinite(sdlog) && sdlog > 0.0, "lognormal: sdlog must be > 0");
    return MarginSpec(LogNormal{meanlog, sdlog});
  }

  static MarginSpec gamma(double shape, double rate) {
    require(std::isfinite(shape) && shape > 0.0, "gamma: shape must be > 0");
    require(std::isfinite(rate) && rate > 0.0, "gamma: rate must be > 0");
    return MarginSpec(Gamma{shape, rate});
  }

  static MarginSpec negative_binomial(double size, double prob) {
    require(std::isfinite(size) && size > 0.0, "negative_binomial: size must be > 0");
    require(prob > 0.0 && prob <= 1.0, "negative_binomial: prob must be in (0, 1]");
    return MarginSpec(NegativeBinomial{size, prob});
  }

  static MarginSpec uniform(double lo, double hi) {
    require(std::isfinite(lo) && std::isfinite(hi) && hi > lo, "uniform: need finite lo < hi");
    return MarginSpec(Uniform{lo, hi});
  }

  static MarginSpec empirical_discrete(std::vector<double> support, std::vector<double> probs) {
    require(!support.empty(), "empirical_discrete: empty support");
    require(support.size() == probs.size(), "empirical_discrete: support/probs length mismatch");
    for (std::size_t j = 0; j < support.size(); ++j) {
      require(std::isfinite(support[j]), "empirical_discrete: support must be finite");
      require(j == 0 || support[j] > support[j - 1], "empirical_discrete: support must be strictly ascending");
      require(std::isfinite(probs[j]) && probs[j] >= 0.0, "empirical_discrete: probs must be nonnegative");
    }
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    require(std::abs(total - 1.0) <= 1e-12, "empirical_discrete: probs must sum to 1");

    auto table = std::make_shared<EmpiricalDiscrete::Table>();
    const std::size_t s = support.size();
    table->cumulative.resize(s);
    table->upper.resize(s);
    double acc = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
      acc += probs[j];
      table->cumulative[j] = std::min(acc / total, 1.0);
    }
    table->cumulative.back() = 1.0;
    double tail = 0.0;
    for (std::size_t j = s; j-- > 0;) {
      table->upper[j] = tail / total;
      tail += probs[j];
    }
    table->support = std::move(support);
    table->probs = std::move(probs);
    return MarginSpec(EmpiricalDiscrete{std::move(table)});
  }

  const Variant& params() const noexcept { return v_; }

  Family family() const noexcept { return static_cast<Family>(v_.index()); }

  template <class T>
  const T& as() const {
    return std::get<T>(v_);
  }

  bool is_discrete() const noexcept {
    return family() == Family::NegativeBinomial || family() == Family::EmpiricalDiscrete;
  }

 private:
  explicit MarginSpec(Variant v) : v_(std::move(v)) {}

  static void require(bool ok, const char* what) {
    if (!ok) throw ParameterError(what);
  }

  Variant v_;
};

inline const char* family_name(Family f) {
  switch (f) {
    case Family::Normal: return "normal";
    case Family::LogNormal: return "lognormal";
    case Family::Gamma: return "gamma";
    case Family::NegativeBinomial: return "negative_binomial";
    case Family::Uniform: return "uniform";
    case Family::EmpiricalDiscrete: return "empirical_discrete";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Negative binomial helpers

namespace detail {

inline double nb_pmf(const NegativeBinomial& nb, double k) {
  if (k < 0) return 0.0;
  if (nb.prob == 1.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(std::lgamma(k + nb.size) - std::lgamma(k + 1.0) - std::lgamma(nb.size) +
                  nb.size * std::log(nb.prob) + k * std::log1p(-nb.prob));
}

inline double nb_cdf(const NegativeBinomial& nb, double k) {
  if (k < 0) return 0.0;
  return boost::math::ibeta(nb.size, k + 1.0, nb.prob, boost_policy());
}

inline double nb_ccdf(const NegativeBinomial& nb, double k) {
  if (k < 0) return 1.0;
  return boost::math::ibetac(nb.size, k + 1.0, nb.prob, boost_policy());
}

inline double nb_mean(const NegativeBinomial& nb) { return nb.size * (1.0 - nb.prob) / nb.prob; }
inline double nb_variance(const NegativeBinomial& nb) {
  return nb.size * (1.0 - nb.prob) / (nb.prob * nb.prob);
}

// Smallest integer k >= 0 with pred(k); pred must be monotone false -> true.
template <class Pred>
double integer_search(Pred pred, double guess, double scale) {
  guess = std::max(0.0, std::floor(guess));
  double step = std::max(1.0, std::floor(0.25 * scale));
  double lo, hi;  // pred(lo) false (lo = -1 means "below support"), pred(hi) true
  if (pred(guess)) {
    hi = guess;
    lo = hi - step;
    while (lo >= 0 && pred(lo)) {
      hi = lo;
      step *= 2;
      lo = hi - step;
    }
    lo = std::max(lo, -1.0);
  } else {
    lo = guess;
    hi = lo + step;
    while (!pred(hi)) {
      lo = hi;
      step *= 2;
      hi = lo + step;
      if (!std::isfinite(hi)) return kInf;
    }
  }
  while (hi - lo > 1) {
    const double mid = std::floor(0.5 * (lo + hi));
    (pred(mid) ? hi : lo) = mid;
  }
  return hi;
}

inline double nb_guess(const NegativeBinomial& nb, double z) {
  const double mu = nb_mean(nb);
  const double sigma = std::sqrt(nb_variance(nb));
  const double skew = (2.0 - nb.prob) / std::sqrt(nb.size * (1.0 - nb.prob));
  const double w = z + skew * (z * z - 1.0) / 6.0;
  return std::max(0.0, mu + sigma * w - 0.5);
}

// Smallest k with F(k) >= u.
inline double nb_quantile(const NegativeBinomial& nb, double u) {
  if (nb.prob == 1.0 || u <= 0.0) return 0.0;
  if (u >= 1.0) return kInf;
  const double scale = std::sqrt(nb_variance(nb));
  if (u > 0.5) {
    const double q = 1.0 - u;  // exact for u > 0.5
    return integer_search([&](double k) { return nb_ccdf(nb, k) <= q; },
                          nb_guess(nb, normal::quantile(u)), scale);
  }
  return integer_search([&](double k) { return nb_cdf(nb, k) >= u; },
                        nb_guess(nb, normal::quantile(u)), scale);
}

// Smallest k with P(X > k) <= q.
inline double nb_upper_quantile(const NegativeBinomial& nb, double q) {
  if (nb.prob == 1.0 || q >= 1.0) return 0.0;
  if (q <= 0.0) return kInf;
  const double scale = std::sqrt(nb_variance(nb));
  return integer_search([&](double k) { return nb_ccdf(nb, k) <= q; },
                        nb_guess(nb, normal::upper_quantile(q)), scale);
}

inline std::size_t discrete_index_lower(const EmpiricalDiscrete::Table& t, double u) {
  const auto& cum = t.cumulative;
  if (cum.size() <= 64) {
    std::size_t j = 0;
    while (j + 1 < cum.size() && cum[j] < u) ++j;
    return j;
  }
  const auto it = std::lower_bound(cum.begin(), cum.end(), u);
  return it == cum.end() ? cum.size() - 1 : static_cast<std::size_t>(it - cum.begin());
}

// Smallest j with P(X > support[j]) <= q; `upper` is nonincreasing.
inline std::size_t discrete_index_upper(const EmpiricalDiscrete::Table& t, double q) {
  const auto& up = t.upper;
  const auto it = std::partition_point(up.begin(), up.end(), [q](double v) { return v > q; });
  return it == up.end() ? up.size() - 1 : static_cast<std::size_t>(it - up.begin());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Distribution functions

/// P(X <= x).
inline double cdf(const MarginSpec& m, double x) {
  using detail::boost_policy;
  return std::visit(
      [x](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Normal>) {
          return normal::cdf((x - d.mean) / d.sd);
        } else if constexpr (std::is_same_v<T, LogNormal>) {
          return x <= 0.0 ? 0.0 : normal::cdf((std::log(x) - d.meanlog) / d.sdlog);
        } else if constexpr (std::is_same_v<T, Gamma>) {
          return x <= 0.0 ? 0.0 : boost::math::gamma_p(d.shape, d.rate * x, boost_policy());
        } else if constexpr (std::is_same_v<T, NegativeBinomial>) {
          return detail::nb_cdf(d, std::floor(x));
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return std::clamp((x - d.lo) / (d.hi - d.lo), 0.0, 1.0);
        } else {
          const auto& s = d.support();
          const auto it = std::upper_bound(s.begin(), s.end(), x);
          return it == s.begin() ? 0.0 : d.table->cumulative[static_cast<std::size_t>(it - s.begin()) - 1];
        }
      },
      m.params());
}

/// P(X > x), computed without cancellation in the upper tail.
inline double ccdf(const MarginSpec& m, double x) {
  using detail::boost_policy;
  return std::visit(
      [x](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Normal>) {
          return normal::ccdf((x - d.mean) / d.sd);
        } else if constexpr (std::is_same_v<T, LogNormal>) {
          return x <= 0.0 ? 1.0 : normal::ccdf((std::log(x) - d.meanlog) / d.sdlog);
        } else if constexpr (std::is_same_v<T, Gamma>) {
          return x <= 0.0 ? 1.0 : boost::math::gamma_q(d.shape, d.rate * x, boost_policy());
        } else if constexpr (std::is_same_v<T, NegativeBinomial>) {
          return detail::nb_ccdf(d, std::floor(x));
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return std::clamp((d.hi - x) / (d.hi - d.lo), 0.0, 1.0);
        } else {
          const auto& s = d.support();
          const auto it = std::upper_bound(s.begin(), s.end(), x);
          return it == s.begin() ? 1.0 : d.table->upper[static_cast<std::size_t>(it - s.begin()) - 1];
        }
      },
      m.params());
}

/// Probability mass at x for discrete margins, density for continuous ones.
inline double density(const MarginSpec& m, double x) {
  return std::visit(
      [x](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Normal>) {
          return normal::pdf((x - d.mean) / d.sd) / d.sd;
        } else if constexpr (std::is_same_v<T, LogNormal>) {
          return x <= 0.0 ? 0.0 : normal::pdf((std::log(x) - d.meanlog) / d.sdlog) / (d.sdlog * x);
        } else if constexpr (std::is_same_v<T, Gamma>) {
          return x <= 0.0 ? 0.0
                          : std::exp(d.shape * std::log(d.rate) + (d.shape - 1.0) * std::log(x) -
                                     d.rate * x - std::lgamma(d.shape));
        } else if constexpr (std::is_same_v<T, NegativeBinomial>) {
          return x == std::floor(x) ? detail::nb_pmf(d, x) : 0.0;
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return (x < d.lo || x > d.hi) ? 0.0 : 1.0 / (d.hi - d.lo);
        } else {
          const auto& s = d.support();
          const auto it = std::lower_bound(s.begin(), s.end(), x);
          return (it != s.end() && *it == x) ? d.probs()[static_cast<std::size_t>(it - s.begin())] : 0.0;
        }
      },
      m.params());
}

/// Generalized inverse: the smallest y with cdf(y) >= u.
inline double quantile(const MarginSpec& m, double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw DomainError("quantile: u must lie in [0, 1]");
  using detail::boost_policy;
  using detail::kInf;
  return std::visit(
      [u](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Normal>) {
          return d.mean + d.sd * normal::quantile(u);
        } else if constexpr (std::is_same_v<T, LogNormal>) {
          if (u == 0.0) return 0.0;
          return std::exp(d.meanlog + d.sdlog * normal::quantile(u));
        } else if constexpr (std::is_same_v<T, Gamma>) {
          if (u == 0.0) return 0.0;
          if (u == 1.0) return kInf;
          return boost::math::gamma_p_inv(d.shape, u, boost_policy()) / d.rate;
        } else if constexpr (std::is_same_v<T, NegativeBinomial>) {
          return detail::nb_quantile(d, u);
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return d.lo + u * (d.hi - d.lo);
        } else {
          return d.support()[detail::discrete_index_lower(*d.table, u)];
        }
      },
      m.params());
}

/// Smallest y with ccdf(y) <= q; equals quantile(1 - q) without rounding 1 - q.
inline double upper_quantile(const MarginSpec& m, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("upper_quantile: q must lie in [0, 1]");
  using detail::boost_policy;
  using detail::kInf;
  return std::visit(
      [q](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Normal>) {
          return d.mean + d.sd * normal::upper_quantile(q);
        } else if constexpr (std::is_same_v<T, LogNormal>) {
          if (q == 1.0) return 0.0;
          return std::exp(d.meanlog + d.sdlog * normal::upper_quantile(q));
        } else if constexpr (std::is_same_v<T, Gamma>) {
          if (q == 1.0) return 0.0;
          if (q == 0.0) return kInf;
          return boost::math::gamma_q_inv(d.shape, q, boost_policy()) / d.rate;
        } else if constexpr (std::is_same_v<T, NegativeBinomial>) {
          return detail::nb_upper_quantile(d, q);
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return d.hi - q * (d.hi - d.lo);
        } else {
          return d.support()[detail::discrete_index_upper(*d.table, q)];
        }
      },
      m.params());
}

inline double mean(const MarginSpec& m) {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Normal>) {
          return d.mean;
        } else if constexpr (std::is_same_v<T, LogNormal>) {
          return std::exp(d.meanlog + 0.5 * d.sdlog * d.sdlog);
        } else if constexpr (std::is_same_v<T, Gamma>) {
          return d.shape / d.rate;
        } else if constexpr (std::is_same_v<T, NegativeBinomial>) {
          return detail::nb_mean(d);
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return 0.5 * (d.lo + d.hi);
        } else {
          return std::transform_reduce(d.support().begin(), d.support().end(), d.probs().begin(), 0.0);
        }
      },
      m.params());
}

inline double variance(const MarginSpec& m) {
  return std::visit(
      [&m](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Normal>) {
          return d.sd * d.sd;
        } else if constexpr (std::is_same_v<T, LogNormal>) {
          const double s2 = d.sdlog * d.sdlog;
          return std::expm1(s2) * std::exp(2.0 * d.meanlog + s2);
        } else if constexpr (std::is_same_v<T, Gamma>) {
          return d.shape / (d.rate * d.rate);
        } else if constexpr (std::is_same_v<T, NegativeBinomial>) {
          return detail::nb_variance(d);
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return (d.hi - d.lo) * (d.hi - d.lo) / 12.0;
        } else {
          const double mu = mean(m);
          double v = 0.0;
          for (std::size_t j = 0; j < d.support().size(); ++j)
            v += d.probs()[j] * (d.support()[j] - mu) * (d.support()[j] - mu);
          return v;
        }
      },
      m.params());
}

inline double sd(const MarginSpec& m) { return std::sqrt(variance(m)); }

// ---------------------------------------------------------------------------
// Normal-score transform F^{-1}(Phi(z)), the inner loop of generation

/// Largest |z| that is not clamped: Phi(-kMaxScore) == kTailProbability.
inline const double kMaxScore = normal::upper_quantile(kTailProbability);

/// F^{-1}(Phi(z)) with Phi(z) clamped to [kTailProbability, 1 - kTailProbability].
/// Positive scores go through the upper-tail quantile to keep full precision.
inline double value_at_score(const MarginSpec& m, double z) {
  switch (m.family()) {
    case Family::Normal: {
      const auto& d = m.as<Normal>();
      return d.mean + d.sd * std::clamp(z, -kMaxScore, kMaxScore);
    }
    case Family::LogNormal: {
      const auto& d = m.as<LogNormal>();
      return std::exp(d.meanlog + d.sdlog * std::clamp(z, -kMaxScore, kMaxScore));
    }
    default:
      if (z <= 0.0) return quantile(m, std::max(normal::cdf(z), kTailProbability));
      return upper_quantile(m, std::max(normal::ccdf(z), kTailProbability));
  }
}

namespace detail {

// Re-anchor the running CDF against the special function this often.
inline constexpr int kWalkAnchor = 512;
// Fall back to a fresh search when the walk would be this long.
inline constexpr double kWalkJump = 8192.0;

// Batch transform for the negative binomial: visit scores in sorted order and
// walk the pmf recursion between consecutive answers.
inline void nb_transform_sorted(const NegativeBinomial& nb, std::span<double> values,
                                std::span<const std::size_t> order) {
  const double r = nb.size, fail = 1.0 - nb.prob;
  // Lower half: ascending u, answer moves upward.
  std::size_t pos = 0;
  bool started = false;
  double k = 0, F = 0, pk = 0;
  int since_anchor = 0;
  for (; pos < order.size(); ++pos) {
    const double z = values[order[pos]];
    if (z > 0.0) break;
    const double u = std::max(normal::cdf(z), kTailProbability);
    if (!started || (u - F) > kWalkJump * pk) {
      k = nb_quantile(nb, u);
      F = nb_cdf(nb, k);
      pk = nb_pmf(nb, k);
      since_anchor = 0;
      started = true;
    }
    while (F < u) {
      k += 1;
      pk *= (k - 1 + r) / k * fail;
      F += pk;
      if (++since_anchor == kWalkAnchor) {
        F = nb_cdf(nb, k);
        pk = nb_pmf(nb, k);
        since_anchor = 0;
      }
    }
    values[order[pos]] = k;
  }
  // Upper half: visit from the largest score down, so q = P(X > k) ascends and
  // the answer moves downward.
  started = false;
  double S = 0;
  for (std::size_t back = order.size(); back > pos; --back) {
    const std::size_t idx = order[back - 1];
    const double q = std::max(normal::ccdf(values[idx]), kTailProbability);
    if (!started || (q - S) > kWalkJump * std::max(pk, 1e-300)) {
      k = nb_upper_quantile(nb, q);
      S = nb_ccdf(nb, k);
      pk = nb_pmf(nb, k);
      since_anchor = 0;
      started = true;
    }
    // S = P(X > k); P(X > k - 1) = S + pmf(k).
    while (k > 0 && S + pk <= q) {
      S += pk;
      pk *= k / ((k - 1 + r) * fail);
      k -= 1;
      if (++since_anchor == kWalkAnchor) {
        S = nb_ccdf(nb, k);
        pk = nb_pmf(nb, k);
        since_anchor = 0;
      }
    }
    values[idx] = k;
  }
}

}  // namespace detail

/// In-place batch version of value_at_score. Results equal the scalar path
/// except for rounding at CDF step boundaries of the negative binomial.
inline void transform_scores(const MarginSpec& m, std::span<double> values) {
  if (m.family() == Family::NegativeBinomial) {
    const auto& nb = m.as<NegativeBinomial>();
    if (nb.prob == 1.0) {
      std::fill(values.begin(), values.end(), 0.0);
      return;
    }
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return values[a] < values[b] || (values[a] == values[b] && a < b);
    });
    detail::nb_transform_sorted(nb, values, order);
    return;
  }
  for (double& v : values) v = value_at_score(m, v);
}

/// n iid draws: standard normal scores pushed through value_at_score.
inline std::vector<double> sample(const MarginSpec& m, std::size_t n, std::uint64_t seed,
                                  std::uint32_t stream = 0) {
  std::vector<double> out(n);
  const std::size_t pairs = (n + 1) / 2;
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto z = normal_pair(seed, stream, StreamTag::Sample, i);
    out[2 * i] = z[0];
    if (2 * i + 1 < n) out[2 * i + 1] = z[1];
  }
  transform_scores(m, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parameter estimation

enum class FitMethod { MomentMatch, MLE, Unbiased };

struct MarginFit {
  MarginSpec spec;
  FitMethod method;
  std::size_t sample_size;
};

/// Estimator for the lognormal log-scale parameter.
enum class LogScaleEstimator {
  MaximumLikelihood,      // sqrt(mean((log x - mean log x)^2))
  MeanAbsoluteDeviation,  // mean(|log x - mean log x|)
};

namespace detail {

inline void check_sample(std::span<const double> xs, const char* who) {
  if (xs.size() < 2) throw DataError(std::string(who) + ": need at least 2 observations");
  for (double x : xs)
    if (!std::isfinite(x)) throw DataError(std::string(who) + ": non-finite observation");
}

inline double sample_mean(std::span<const double> xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double sample_variance(std::span<const double> xs, double mu) {
  double ss = 0.0;
  for (double x : xs) ss += (x - mu) * (x - mu);
  return ss / static_cast<double>(xs.size() - 1);
}

}  // namespace detail

/// Sample mean and sample standard deviation (n - 1 denominator).
inline MarginFit fit_normal(std::span<const double> xs) {
  detail::check_sample(xs, "fit_normal");
  const double mu = detail::sample_mean(xs);
  const double s = std::sqrt(detail::sample_variance(xs, mu));
  return {MarginSpec::normal(mu, s), FitMethod::Unbiased, xs.size()};
}

inline MarginFit fit_lognormal(std::span<const double> xs,
                               LogScaleEstimator scale = LogScaleEstimator::MaximumLikelihood) {
  detail::check_sample(xs, "fit_lognormal");
  std::vector<double> logs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] <= 0.0) throw DataError("fit_lognormal: observations must be > 0");
    logs[i] = std::log(xs[i]);
  }
  const double mu = detail::sample_mean(logs);
  double spread = 0.0;
  if (scale == LogScaleEstimator::MaximumLikelihood) {
    for (double l : logs) spread += (l - mu) * (l - mu);
    spread = std::sqrt(spread / static_cast<double>(logs.size()));
  } else {
    for (double l : logs) spread += std::abs(l - mu);
    spread /= static_cast<double>(logs.size());
  }
  return {MarginSpec::lognormal(mu, spread), FitMethod::MLE, xs.size()};
}

/// Method of moments: size = m^2 / (s^2 - m), prob = m / s^2.
inline MarginFit fit_nbinom_mom(std::span<const double> xs) {
  detail::check_sample(xs, "fit_nbinom_mom");
  const double m = detail::sample_mean(xs);
  const double s2 = detail::sample_variance(xs, m);
  if (!(s2 > m)) {
    throw OverDispersionError("fit_nbinom_mom: sample variance " + std::to_string(s2) +
                              " does not exceed the mean " + std::to_string(m));
  }
  return {MarginSpec::negative_binomial(m * m / (s2 - m), m / s2), FitMethod::MomentMatch, xs.size()};
}

// ---------------------------------------------------------------------------
// JSON: {"family": "...", "params": {...}}

inline void to_json(nlohmann::json& j, const MarginSpec& m) {
  j = nlohmann::json{{"family", family_name(m.family())}};
  std::visit(
      [&j](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Normal>) {
          j["params"] = {{"mean", d.mean}, {"sd", d.sd}};
        } else if constexpr (std::is_same_v<T, LogNormal>) {
          j["params"] = {{"meanlog", d.meanlog}, {"sdlog", d.sdlog}};
        } else if constexpr (std::is_same_v<T, Gamma>) {
          j["params"] = {{"shape", d.shape}, {"rate", d.rate}};
        } else if constexpr (std::is_same_v<T, NegativeBinomial>) {
          j["params"] = {{"size", d.size}, {"prob", d.prob}};
        } else if constexpr (std::is_same_v<T, Uniform>) {
          j["params"] = {{"lo", d.lo}, {"hi", d.hi}};
        } else {
          j["params"] = {{"support", d.support()}, {"probs", d.probs()}};
        }
      },
      m.params());
}

inline MarginSpec margin_from_json(const nlohmann::json& j) {
  try {
    const std::string family = j.at("family").get<std::string>();
    const auto& p = j.at("params");
    if (family == "normal") return MarginSpec::normal(p.at("mean"), p.at("sd"));
    if (family == "lognormal") return MarginSpec::lognormal(p.at("meanlog"), p.at("sdlog"));
    if (family == "gamma") return MarginSpec::gamma(p.at("shape"), p.at("rate"));
    if (family == "negative_binomial" || family == "nbinom")
      return MarginSpec::negative_binomial(p.at("size"), p.at("prob"));
    if (family == "uniform") return MarginSpec::uniform(p.at("lo"), p.at("hi"));
    if (family == "empirical_discrete")
      return MarginSpec::empirical_discrete(p.at("support").get<std::vector<double>>(),
                                            p.at("probs").get<std::vector<double>>());
    throw DataError("unknown margin family '" + family + "'");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed margin document: ") + e.what());
  }
}

}  // namespace hdsim
