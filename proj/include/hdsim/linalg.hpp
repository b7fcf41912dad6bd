#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "hdsim/errors.hpp"

extern "C" {
void dsyevr_(const char* jobz, const char* range, const char* uplo, const int* n, double* a,
             const int* lda, const double* vl, const double* vu, const int* il, const int* iu,
             const double* abstol, int* m, double* w, double* z, const int* ldz, int* isuppz,
             double* work, const int* lwork, int* iwork, const int* liwork, int* info);
void openblas_set_num_threads(int);
}

namespace hdsim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Eigenvalues ascending, eigenvectors in matching columns.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};

/// Full symmetric eigendecomposition (LAPACK dsyevr, lower triangle read).
/// A threaded OpenBLAS splits the reductions differently per thread count,
/// which changes the last bits; it is pinned to one thread so results are
/// reproducible everywhere.
inline SymmetricEigen eigh(const Matrix& a) {
  openblas_set_num_threads(1);
  const int n = static_cast<int>(a.rows());
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  if (n == 0) return out;
  Matrix work_a = a;
  std::vector<int> isuppz(2 * static_cast<std::size_t>(n));
  const double vl = 0.0, vu = 0.0, abstol = 0.0;
  const int il = 0, iu = 0;
  int m = 0, info = 0, lwork = -1, liwork = -1, iwork_query = 0;
  double work_query = 0.0;
  dsyevr_("V", "A", "L", &n, work_a.data(), &n, &vl, &vu, &il, &iu, &abstol, &m,
          out.values.data(), out.vectors.data(), &n, isuppz.data(), &work_query, &lwork,
          &iwork_query, &liwork, &info);
  lwork = static_cast<int>(work_query);
  liwork = iwork_query;
  std::vector<double> work(static_cast<std::size_t>(lwork));
  std::vector<int> iwork(static_cast<std::size_t>(liwork));
  dsyevr_("V", "A", "L", &n, work_a.data(), &n, &vl, &vu, &il, &iu, &abstol, &m,
          out.values.data(), out.vectors.data(), &n, isuppz.data(), work.data(), &lwork,
          iwork.data(), &liwork, &info);
  if (info != 0) throw NumericError("dsyevr failed with info=" + std::to_string(info));
  return out;
}

inline Vector eigvalsh(const Matrix& a) { return eigh(a).values; }

/// Column tile width for the explicitly parallel products.
inline constexpr Index kTile = 128;

/// C = A^T B, tiled over the columns of B. Each tile is an independent
/// single-threaded product, so the result is identical for any thread count.
inline Matrix gram_product(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols(), b.cols());
  const Index tiles = (b.cols() + kTile - 1) / kTile;
#pragma omp parallel for schedule(dynamic)
  for (Index t = 0; t < tiles; ++t) {
    const Index j0 = t * kTile;
    const Index w = std::min(kTile, b.cols() - j0);
    c.middleCols(j0, w).noalias() = a.transpose() * b.middleCols(j0, w);
  }
  return c;
}

/// C = A B, tiled over the rows of A.
inline Matrix row_tiled_product(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  const Index tiles = (a.rows() + kTile - 1) / kTile;
#pragma omp parallel for schedule(dynamic)
  for (Index t = 0; t < tiles; ++t) {
    const Index i0 = t * kTile;
    const Index h = std::min(kTile, a.rows() - i0);
    c.middleRows(i0, h).noalias() = a.middleRows(i0, h) * b;
  }
  return c;
}

/// A^T A restricted to upper tiles and mirrored; used for correlation Gram matrices.
inline Matrix symmetric_gram(const Matrix& a) {
  const Index d = a.cols();
  Matrix c(d, d);
  const Index tiles = (d + kTile - 1) / kTile;
  std::vector<std::pair<Index, Index>> blocks;
  for (Index bi = 0; bi < tiles; ++bi)
    for (Index bj = bi; bj < tiles; ++bj) blocks.emplace_back(bi, bj);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto [bi, bj] = blocks[k];
    const Index i0 = bi * kTile, j0 = bj * kTile;
    const Index wi = std::min(kTile, d - i0), wj = std::min(kTile, d - j0);
    c.block(i0, j0, wi, wj).noalias() = a.middleCols(i0, wi).transpose() * a.middleCols(j0, wj);
  }
  c.triangularView<Eigen::StrictlyLower>() = c.transpose();
  return c;
}

/// P diag(w) P^T without forming diag(w).
inline Matrix reconstruct(const Matrix& vectors, const Vector& weights) {
  Matrix scaled = vectors * weights.asDiagonal();
  Matrix out(vectors.rows(), vectors.rows());
  const Index n = vectors.rows();
  const Index tiles = (n + kTile - 1) / kTile;
#pragma omp parallel for schedule(dynamic)
  for (Index t = 0; t < tiles; ++t) {
    const Index j0 = t * kTile;
    const Index w = std::min(kTile, n - j0);
    out.middleCols(j0, w).noalias() = scaled * vectors.middleRows(j0, w).transpose();
  }
  return 0.5 * (out + out.transpose());
}

}  // namespace hdsim
