#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hdsim/correlation.hpp"
#include "hdsim/errors.hpp"
#include "hdsim/linalg.hpp"

namespace hdsim {

/// Summary of |target - repaired| over the strict lower triangle.
struct ReplacementErrors {
  double min = 0, q1 = 0, median = 0, mean = 0, q3 = 0, max = 0;
};

struct NearestCorOptions {
  double tol = 1e-7;  // on the Euclidean norm of the dual gradient
  int max_iter = 200;
  double eig_floor = 1e-10;  // smallest eigenvalue kept in the returned matrix
};

struct NearestCorResult {
  CorrelationMatrix matrix;
  int iterations = 0;
  double residual = 0;  // max |diag - 1| plus dual gradient norm, before the final rescale
  double frobenius_distance = 0;
  bool converged = false;
  ReplacementErrors replacement_errors;
  std::vector<double> residual_history;  // dual gradient norm at each Newton iterate
  bool used_fallback = false;             // alternating projections took over
};

/// Frobenius-nearest positive semidefinite matrix: negative eigenvalues zeroed.
inline Matrix project_psd(const Matrix& m) {
  const auto eig = eigh(m);
  return reconstruct(eig.vectors, eig.values.cwiseMax(0.0));
}

inline ReplacementErrors replacement_errors(const Matrix& target, const Matrix& repaired) {
  const Index d = target.rows();
  std::vector<double> err;
  err.reserve(static_cast<std::size_t>(d * (d - 1) / 2));
  for (Index j = 0; j < d; ++j)
    for (Index i = j + 1; i < d; ++i) err.push_back(std::abs(target(i, j) - repaired(i, j)));
  ReplacementErrors out;
  if (err.empty()) return out;
  std::sort(err.begin(), err.end());
  // Linear interpolation between order statistics.
  const auto q = [&](double p) {
    const double h = p * static_cast<double>(err.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, err.size() - 1);
    return err[lo] + (h - static_cast<double>(lo)) * (err[hi] - err[lo]);
  };
  out.min = err.front();
  out.q1 = q(0.25);
  out.median = q(0.5);
  out.q3 = q(0.75);
  out.max = err.back();
  double s = 0;
  for (double e : err) s += e;
  out.mean = s / static_cast<double>(err.size());
  return out;
}

namespace detail {

inline void require_square_symmetric(const Matrix& m, const char* who) {
  if (m.rows() == 0 || m.rows() != m.cols()) throw DataError(std::string(who) + ": matrix must be square");
  if (!m.allFinite()) throw DataError(std::string(who) + ": non-finite entries");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8) throw DataError(std::string(who) + ": matrix is not symmetric");
}

// D^{-1/2} X D^{-1/2}, exact unit diagonal and exact symmetry.
inline Matrix rescale_unit_diagonal(const Matrix& x) {
  const Vector s = x.diagonal().cwiseMax(std::numeric_limits<double>::min()).cwiseSqrt().cwiseInverse();
  Matrix out = s.asDiagonal() * x * s.asDiagonal();
  out = 0.5 * (out + out.transpose()).eval();
  out = out.cwiseMax(-1.0).cwiseMin(1.0);
  out.diagonal().setOnes();
  return out;
}

inline Matrix floor_and_rescale(const SymmetricEigen& eig, double floor) {
  return rescale_unit_diagonal(reconstruct(eig.vectors, eig.values.cwiseMax(floor)));
}

// Row-wise dot products of two equally shaped matrices.
inline Vector row_dots(const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).rowwise().sum(); }

// State of the dual problem at one multiplier vector y.
struct DualPoint {
  Vector y;
  SymmetricEigen eig;
  Vector gradient;  // diag(Pi(G + Diag y)) - 1
  double theta = 0;
  Index positive = 0;  // eigenvalues > 0, stored in the rightmost columns
};

inline DualPoint evaluate_dual(const Matrix& g, Vector y) {
  DualPoint p;
  Matrix shifted = g;
  shifted.diagonal() += y;
  p.eig = eigh(shifted);
  p.y = std::move(y);
  const Index d = g.rows();
  const Vector& lam = p.eig.values;
  Index s = 0;
  while (s < d && lam(s) <= 0.0) ++s;
  p.positive = d - s;
  const Vector pos = lam.tail(p.positive);
  p.theta = 0.5 * pos.squaredNorm() - p.y.sum();
  const auto p1 = p.eig.vectors.rightCols(p.positive);
  p.gradient = p1.cwiseAbs2() * pos - Vector::Ones(d);
  return p;
}

// Generalized Jacobian of the gradient map at a dual point, applied matrix-free.
class DualJacobian {
 public:
  explicit DualJacobian(const DualPoint& p) : d_(p.eig.values.size()), r_(p.positive), s_(d_ - r_) {
    const Vector& lam = p.eig.values;
    p1_ = p.eig.vectors.rightCols(r_);
    p2_ = p.eig.vectors.leftCols(s_);
    omega_.resize(r_, s_);
    for (Index j = 0; j < s_; ++j)
      for (Index i = 0; i < r_; ++i) {
        const double li = lam(s_ + i), lj = lam(j);
        omega_(i, j) = li / (li - lj);
      }
  }

  Vector apply(const Vector& h) const {
    constexpr double reg = 1e-10;
    if (r_ == 0) return reg * h;
    if (s_ == 0) return (1.0 + reg) * h;
    if (r_ <= s_) {
      const Matrix hp1 = h.asDiagonal() * p1_;
      const Matrix m11 = gram_product(p1_, hp1);
      const Matrix m12 = gram_product(hp1, p2_).cwiseProduct(omega_);
      Vector out = row_dots(row_tiled_product(p1_, m11), p1_);
      out += 2.0 * row_dots(row_tiled_product(p1_, m12), p2_);
      return out + reg * h;
    }
    const Matrix hp2 = h.asDiagonal() * p2_;
    const Matrix m22 = gram_product(p2_, hp2);
    const Matrix m12 = gram_product(p1_, hp2).cwiseProduct((1.0 - omega_.array()).matrix());
    Vector out = h - row_dots(row_tiled_product(p2_, m22), p2_);
    out -= 2.0 * row_dots(row_tiled_product(p1_, m12), p2_);
    return out + reg * h;
  }

  /// Exact diagonal of the Jacobian, used as the CG preconditioner.
  Vector diagonal() const {
    if (r_ == 0) return Vector::Constant(d_, 1.0);
    const Matrix q1 = p1_.cwiseAbs2();
    Vector out = q1.rowwise().sum().cwiseAbs2();
    if (s_ > 0) {
      const Matrix q2 = p2_.cwiseAbs2();
      out += 2.0 * row_dots(row_tiled_product(q1, omega_), q2);
    }
    return out.cwiseMax(1e-8);
  }

 private:
  Index d_, r_, s_;
  Matrix p1_, p2_, omega_;
};

// Preconditioned CG for J x = b, stopping at ||r|| <= rel_tol ||b||.
inline Vector pcg(const DualJacobian& jac, const Vector& b, double rel_tol, int max_iter) {
  const Vector precond = jac.diagonal().cwiseInverse();
  Vector x = Vector::Zero(b.size());
  Vector r = b;
  Vector z = precond.cwiseProduct(r);
  Vector p = z;
  double rz = r.dot(z);
  const double stop = rel_tol * b.norm();
  for (int k = 0; k < max_iter && r.norm() > stop; ++k) {
    const Vector w = jac.apply(p);
    const double pw = p.dot(w);
    if (!(pw > 0.0)) break;
    const double alpha = rz / pw;
    x += alpha * p;
    r -= alpha * w;
    z = precond.cwiseProduct(r);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  if (x.isZero()) x = b;  // degenerate curvature: fall back to a gradient step
  return x;
}

// Alternating projections with Dykstra's correction.
inline Matrix alternating_projections(const Matrix& g, double tol, int max_iter) {
  Matrix y = g, correction = Matrix::Zero(g.rows(), g.cols());
  for (int k = 0; k < max_iter; ++k) {
    const Matrix r = y - correction;
    const Matrix x = project_psd(r);
    correction = x - r;
    Matrix y_next = x;
    y_next.diagonal().setOnes();
    const double change = (y_next - y).norm() / std::max(1.0, y.norm());
    y = std::move(y_next);
    if (change < tol) break;
  }
  return y;
}

}  // namespace detail

/// Nearest correlation matrix in the Frobenius norm by semismooth Newton on
/// the dual, with PCG inner solves and an Armijo line search.
inline NearestCorResult cor_nearPD(const Matrix& m, const NearestCorOptions& opt = {}) {
  detail::require_square_symmetric(m, "cor_nearPD");
  const Index d = m.rows();
  if ((m.diagonal().array() - 1.0).abs().maxCoeff() > 1e-8)
    throw DataError("cor_nearPD: matrix must have a unit diagonal");
  const Matrix g = 0.5 * (m + m.transpose());

  if (iscorrelation(g)) {
    NearestCorResult same{CorrelationMatrix(g, DependencyType::Pearson)};
    same.converged = true;
    return same;
  }

  constexpr double sigma = 1e-4;
  detail::DualPoint cur = detail::evaluate_dual(g, Vector::Zero(d));
  double res = cur.gradient.norm();
  std::vector<double> history{res};
  int it = 0;
  int stalled = 0;
  bool fallback = false;
  while (res > opt.tol && it < opt.max_iter) {
    const detail::DualJacobian jac(cur);
    const double eta = std::max(1e-14, std::min(1e-2, res));
    const Vector dir = detail::pcg(jac, -cur.gradient, eta, 200);
    const double slope = cur.gradient.dot(dir);
    double step = 1.0;
    detail::DualPoint trial = detail::evaluate_dual(g, cur.y + dir);
    // Near the solution the predicted decrease of theta drops below its
    // rounding noise, so a full step that shrinks the gradient is taken as is.
    const bool full_step_ok = trial.gradient.norm() <= 0.5 * res;
    for (int back = 0; !full_step_ok && back < 20 && trial.theta > cur.theta + sigma * step * slope; ++back) {
      step *= 0.5;
      trial = detail::evaluate_dual(g, cur.y + step * dir);
    }
    ++it;
    const double next = trial.gradient.norm();
    stalled = next >= res ? stalled + 1 : 0;
    if (next < res || trial.theta < cur.theta) cur = std::move(trial);
    res = cur.gradient.norm();
    history.push_back(next);
    if (stalled >= 5) {
      fallback = true;
      break;
    }
  }

  NearestCorResult out{CorrelationMatrix::identity(d)};
  Matrix x;
  if (fallback) {
    const Matrix ap = detail::alternating_projections(g, opt.tol, 10 * opt.max_iter);
    x = detail::floor_and_rescale(eigh(ap), opt.eig_floor);
    out.converged = true;
  } else {
    x = detail::floor_and_rescale(cur.eig, opt.eig_floor);
    out.converged = res <= opt.tol;
  }
  out.residual = res + cur.gradient.cwiseAbs().maxCoeff();
  out.matrix = CorrelationMatrix(std::move(x), DependencyType::Pearson);
  out.iterations = it;
  out.residual_history = std::move(history);
  out.used_fallback = fallback;
  out.frobenius_distance = (g - out.matrix.matrix()).norm();
  out.replacement_errors = replacement_errors(g, out.matrix.matrix());
  return out;
}

/// Single eigendecomposition: clip eigenvalues at eps_min, rebuild, rescale.
/// Close to, but in general not exactly, the nearest correlation matrix.
inline CorrelationMatrix cor_fastPD(const Matrix& m, double eps_min = 1e-8) {
  detail::require_square_symmetric(m, "cor_fastPD");
  const Matrix g = 0.5 * (m + m.transpose());
  return {detail::floor_and_rescale(eigh(g), eps_min), DependencyType::Pearson};
}

}  // namespace hdsim
