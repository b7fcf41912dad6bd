#pragma once

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hdsim/errors.hpp"
#include "hdsim/linalg.hpp"
#include "hdsim/margins.hpp"
#include "hdsim/random.hpp"

namespace hdsim {

enum class DependencyType { Pearson, Spearman, Kendall };

inline const char* dependency_name(DependencyType t) {
  switch (t) {
    case DependencyType::Pearson: return "pearson";
    case DependencyType::Spearman: return "spearman";
    case DependencyType::Kendall: return "kendall";
  }
  return "unknown";
}

inline DependencyType parse_dependency(std::string_view s) {
  if (s == "pearson") return DependencyType::Pearson;
  if (s == "spearman") return DependencyType::Spearman;
  if (s == "kendall") return DependencyType::Kendall;
  throw ParameterError("unknown dependency type '" + std::string(s) + "'");
}

/// Square, symmetric, unit-diagonal matrix with entries in [-1, 1], tagged
/// with the dependence measure it holds. Definiteness is not required.
class CorrelationMatrix {
 public:
  CorrelationMatrix(Matrix values, DependencyType type) : values_(std::move(values)), type_(type) {
    constexpr double tol = 1e-12;
    const Index d = values_.rows();
    if (d < 1 || values_.cols() != d) throw DataError("correlation matrix must be square and non-empty");
    if (!values_.allFinite()) throw DataError("correlation matrix has non-finite entries");
    for (Index j = 0; j < d; ++j) {
      if (std::abs(values_(j, j) - 1.0) > tol)
        throw DataError("correlation matrix diagonal entry " + std::to_string(j) + " is not 1");
      values_(j, j) = 1.0;
      for (Index i = j + 1; i < d; ++i) {
        const double a = values_(i, j), b = values_(j, i);
        if (std::abs(a - b) > tol) throw DataError("correlation matrix is not symmetric");
        if (std::abs(a) > 1.0 + tol) throw DataError("correlation entry outside [-1, 1]");
        values_(i, j) = values_(j, i) = std::clamp(0.5 * (a + b), -1.0, 1.0);
      }
    }
  }

  static CorrelationMatrix identity(Index d, DependencyType type = DependencyType::Pearson) {
    return {Matrix::Identity(d, d), type};
  }

  const Matrix& matrix() const noexcept { return values_; }
  DependencyType type() const noexcept { return type_; }
  Index dim() const noexcept { return values_.rows(); }
  double operator()(Index i, Index j) const { return values_(i, j); }

 private:
  Matrix values_;
  DependencyType type_;
};

struct CorrelationBounds {
  double lower;
  double upper;
  std::size_t n_samples;
  DependencyType type;
};

// ---------------------------------------------------------------------------
// Estimation

namespace detail {

inline void check_data(const Matrix& data) {
  if (data.rows() < 3) throw DataError("correlation estimation needs at least 3 observations");
  if (!data.allFinite()) throw DataError("data contains missing or non-finite values");
}

// Columns centred and scaled to unit Euclidean norm.
inline Matrix standardize_columns(const Matrix& data) {
  for (Index j = 0; j < data.cols(); ++j)
    if ((data.col(j).array() == data(0, j)).all()) throw DegenerateColumnError(static_cast<std::size_t>(j));
  Matrix z(data.rows(), data.cols());
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < data.cols(); ++j) {
    z.col(j) = data.col(j).array() - data.col(j).mean();
    z.col(j) /= z.col(j).norm();
  }
  return z;
}

inline void finish_correlation(Matrix& c) {
  c = c.cwiseMax(-1.0).cwiseMin(1.0);
  c.diagonal().setOnes();
}

inline std::vector<std::int32_t> argsort(std::span<const double> x) {
  std::vector<std::int32_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) { return x[a] < x[b]; });
  return order;
}

// Average ranks (1-based), ties sharing the mean of their positions.
inline void average_ranks(std::span<const double> x, std::span<double> ranks) {
  const auto order = argsort(x);
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j - 1) + 1.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
}

// Per-column preprocessing for Kendall's tau.
struct KendallColumn {
  std::vector<std::int32_t> order;       // argsort of the column
  std::vector<std::int32_t> group_start;  // tie groups within `order`, with end sentinel
  std::vector<std::int32_t> dense;        // dense rank of each observation
  double tied_pairs = 0;                  // sum over tie groups of t(t-1)/2
};

inline KendallColumn kendall_column(std::span<const double> x) {
  KendallColumn c;
  c.order = argsort(x);
  c.dense.resize(x.size());
  const std::size_t n = x.size();
  std::int32_t rank = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && x[c.order[j]] == x[c.order[i]]) ++j;
    c.group_start.push_back(static_cast<std::int32_t>(i));
    for (std::size_t k = i; k < j; ++k) c.dense[c.order[k]] = rank;
    const double t = static_cast<double>(j - i);
    c.tied_pairs += 0.5 * t * (t - 1.0);
    ++rank;
    i = j;
  }
  c.group_start.push_back(static_cast<std::int32_t>(n));
  return c;
}

// Number of pairs i < j with seq[i] > seq[j]; sorts seq, uses buf as scratch.
inline std::int64_t count_inversions(std::vector<std::int32_t>& seq, std::vector<std::int32_t>& buf) {
  const std::size_t n = seq.size();
  buf.resize(n);
  std::int64_t inv = 0;
  std::int32_t* src = seq.data();
  std::int32_t* dst = buf.data();
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n), hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (src[j] < src[i]) {
          inv += static_cast<std::int64_t>(mid - i);
          dst[k++] = src[j++];
        } else {
          dst[k++] = src[i++];
        }
      }
      while (i < mid) dst[k++] = src[i++];
      while (j < hi) dst[k++] = src[j++];
    }
    std::swap(src, dst);
  }
  if (src != seq.data()) std::copy(src, src + n, seq.data());
  return inv;
}

// Tau-b via Knight's algorithm: order by (x, y), then count y inversions.
inline double kendall_pair(const KendallColumn& x, const KendallColumn& y, std::vector<std::int32_t>& seq,
                           std::vector<std::int32_t>& buf) {
  const std::size_t n = x.order.size();
  seq.resize(n);
  double joint_ties = 0;
  for (std::size_t g = 0; g + 1 < x.group_start.size(); ++g) {
    const auto b = static_cast<std::size_t>(x.group_start[g]), e = static_cast<std::size_t>(x.group_start[g + 1]);
    for (std::size_t k = b; k < e; ++k) seq[k] = y.dense[x.order[k]];
    if (e - b > 1) {
      std::sort(seq.begin() + static_cast<std::ptrdiff_t>(b), seq.begin() + static_cast<std::ptrdiff_t>(e));
      for (std::size_t k = b; k < e;) {
        std::size_t l = k + 1;
        while (l < e && seq[l] == seq[k]) ++l;
        const double t = static_cast<double>(l - k);
        joint_ties += 0.5 * t * (t - 1.0);
        k = l;
      }
    }
  }
  const double swaps = static_cast<double>(count_inversions(seq, buf));
  const double n0 = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  const double s = n0 - x.tied_pairs - y.tied_pairs + joint_ties - 2.0 * swaps;
  return s / std::sqrt((n0 - x.tied_pairs) * (n0 - y.tied_pairs));
}

inline Matrix pearson_matrix(const Matrix& data) {
  Matrix c = symmetric_gram(standardize_columns(data));
  finish_correlation(c);
  return c;
}

inline Matrix rank_columns(const Matrix& data) {
  Matrix ranks(data.rows(), data.cols());
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < data.cols(); ++j)
    average_ranks(std::span<const double>(data.col(j).data(), static_cast<std::size_t>(data.rows())),
                  std::span<double>(ranks.col(j).data(), static_cast<std::size_t>(data.rows())));
  return ranks;
}

inline Matrix kendall_matrix(const Matrix& data) {
  const Index d = data.cols();
  std::vector<KendallColumn> cols(static_cast<std::size_t>(d));
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < d; ++j)
    cols[static_cast<std::size_t>(j)] =
        kendall_column(std::span<const double>(data.col(j).data(), static_cast<std::size_t>(data.rows())));
  for (Index j = 0; j < d; ++j)
    if (cols[static_cast<std::size_t>(j)].group_start.size() == 2)
      throw DegenerateColumnError(static_cast<std::size_t>(j));

  Matrix c = Matrix::Identity(d, d);
#pragma omp parallel
  {
    std::vector<std::int32_t> seq, buf;
#pragma omp for schedule(dynamic)
    for (Index i = 0; i < d; ++i)
      for (Index j = i + 1; j < d; ++j)
        c(i, j) = c(j, i) = kendall_pair(cols[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)], seq, buf);
  }
  finish_correlation(c);
  return c;
}

}  // namespace detail

/// Pairwise correlation matrix of the columns of an n x d data matrix.
inline CorrelationMatrix cor(const Matrix& data, DependencyType type) {
  detail::check_data(data);
  switch (type) {
    case DependencyType::Pearson: return {detail::pearson_matrix(data), type};
    case DependencyType::Spearman: return {detail::pearson_matrix(detail::rank_columns(data)), type};
    case DependencyType::Kendall: return {detail::kendall_matrix(data), type};
  }
  throw ParameterError("unknown dependency type");
}

/// Correlation of two equally long samples.
inline double cor(std::span<const double> x, std::span<const double> y, DependencyType type) {
  if (x.size() != y.size()) throw DataError("samples differ in length");
  Matrix data(static_cast<Index>(x.size()), 2);
  std::copy(x.begin(), x.end(), data.col(0).data());
  std::copy(y.begin(), y.end(), data.col(1).data());
  return cor(data, type)(0, 1);
}

// ---------------------------------------------------------------------------
// Conversion under the bivariate normal

namespace detail {

inline double to_pearson(double v, DependencyType from) {
  switch (from) {
    case DependencyType::Pearson: return v;
    case DependencyType::Spearman: return 2.0 * std::sin(std::numbers::pi * v / 6.0);
    case DependencyType::Kendall: return std::sin(std::numbers::pi * v / 2.0);
  }
  return v;
}

inline double from_pearson(double r, DependencyType to) {
  switch (to) {
    case DependencyType::Pearson: return r;
    case DependencyType::Spearman: return 6.0 / std::numbers::pi * std::asin(r / 2.0);
    case DependencyType::Kendall: return 2.0 / std::numbers::pi * std::asin(r);
  }
  return r;
}

}  // namespace detail

/// Elementwise conversion of one correlation value; +-1 and 0 are fixed points.
inline double convert_value(double v, DependencyType from, DependencyType to) {
  if (from == to || v == 0.0 || std::abs(v) == 1.0) return v;
  return std::clamp(detail::from_pearson(std::clamp(detail::to_pearson(v, from), -1.0, 1.0), to), -1.0, 1.0);
}

inline CorrelationMatrix cor_convert(const CorrelationMatrix& m, DependencyType from, DependencyType to) {
  if (m.type() != from)
    throw ParameterError(std::string("matrix holds ") + dependency_name(m.type()) + ", not " + dependency_name(from));
  Matrix out = m.matrix().unaryExpr([&](double v) { return convert_value(v, from, to); });
  out.diagonal().setOnes();
  return {std::move(out), to};
}

// ---------------------------------------------------------------------------
// Attainable range by generate, sort, correlate

inline CorrelationBounds cor_bounds(const MarginSpec& mi, const MarginSpec& mj, DependencyType type,
                                    std::size_t n_samples = 1'000'000, std::uint64_t seed = 0) {
  if (n_samples < 1000) throw ParameterError("cor_bounds: need at least 1000 samples");
  auto x = sample(mi, n_samples, seed, 0);
  auto y = sample(mj, n_samples, seed, 1);
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double upper = cor(x, y, type);
  std::reverse(y.begin(), y.end());
  const double lower = cor(x, y, type);
  return {std::clamp(lower, -1.0, 1.0), std::clamp(upper, -1.0, 1.0), n_samples, type};
}

// ---------------------------------------------------------------------------
// Admissibility

/// Symmetric, unit diagonal, entries in [-1, 1] and positive definite
/// (Cholesky succeeds with every pivot above 1e-12).
inline bool iscorrelation(const Matrix& m) {
  const Index d = m.rows();
  if (d == 0 || m.cols() != d || !m.allFinite()) return false;
  constexpr double tol = 1e-8;
  for (Index j = 0; j < d; ++j) {
    if (std::abs(m(j, j) - 1.0) > tol) return false;
    for (Index i = j + 1; i < d; ++i) {
      if (std::abs(m(i, j) - m(j, i)) > tol) return false;
      if (std::abs(m(i, j)) > 1.0) return false;
    }
  }
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) return false;
  const auto diag = llt.matrixLLT().diagonal();
  return diag.array().square().minCoeff() > 1e-12;
}

inline bool iscorrelation(const CorrelationMatrix& m) { return iscorrelation(m.matrix()); }

/// Random positive definite correlation matrix: W W^T + D rescaled to a unit
/// diagonal, W d x k standard normal and D uniform on (0, 1).
inline CorrelationMatrix cor_randPD(Index d, std::uint64_t seed, Index k = 1) {
  if (d < 1) throw ParameterError("cor_randPD: d must be >= 1");
  if (k < 1 || k > d) throw ParameterError("cor_randPD: need 1 <= k <= d");
  CounterRng rng(seed, 0, StreamTag::Matrix);
  Matrix w(d, k);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < d; ++i) w(i, j) = rng.normal();
  Matrix s = w * w.transpose();
  for (Index i = 0; i < d; ++i) s(i, i) += rng.uniform();
  const Vector inv = s.diagonal().cwiseSqrt().cwiseInverse();
  Matrix r = inv.asDiagonal() * s * inv.asDiagonal();
  r = 0.5 * (r + r.transpose()).eval();
  r.diagonal().setOnes();
  return {std::move(r), DependencyType::Pearson};
}

}  // namespace hdsim
