#include "sesim/matrix.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace sesim {
namespace {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EigenRowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;

ConstMap map_of(const Matrix& m) { return ConstMap(m.data.data(), m.rows, m.cols); }
Map map_of(Matrix& m) { return Map(m.data.data(), m.rows, m.cols); }

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows) + "x" + std::to_string(m.cols);
}

}  // namespace

Matrix::Matrix(int rows_, int cols_) : Matrix(rows_, cols_, 0.0) {}

Matrix::Matrix(int rows_, int cols_, double fill) {
  if (rows_ < 0 || cols_ < 0)
    throw ShapeError("matrix dimensions must be non-negative");
  rows = rows_;
  cols = cols_;
  data.assign(std::size_t(rows) * cols, fill);
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows_) {
  const int r = int(rows_.size());
  const int c = r > 0 ? int(rows_.begin()->size()) : 0;
  Matrix out(r, c);
  int i = 0;
  for (const auto& row : rows_) {
    if (int(row.size()) != c) throw ShapeError("from_rows: ragged initializer");
    int j = 0;
    for (double v : row) out(i, j++) = v;
    ++i;
  }
  return out;
}

Matrix Matrix::identity(int n) {
  Matrix out(n, n);
  for (int i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul: " + shape_str(a) + " * " + shape_str(b));
  Matrix c(a.rows, b.cols);
  map_of(c).noalias() = map_of(a) * map_of(b);
  return c;
}

void gemm_acc(Matrix& c, const Matrix& a, bool transpose_a, const Matrix& b,
              bool transpose_b, double alpha) {
  const int ar = transpose_a ? a.cols : a.rows;
  const int ac = transpose_a ? a.rows : a.cols;
  const int br = transpose_b ? b.cols : b.rows;
  const int bc = transpose_b ? b.rows : b.cols;
  if (ac != br || c.rows != ar || c.cols != bc)
    throw ShapeError("gemm_acc: " + shape_str(a) + (transpose_a ? "^T" : "") +
                     " * " + shape_str(b) + (transpose_b ? "^T" : "") +
                     " into " + shape_str(c));
  auto cm = map_of(c);
  auto am = map_of(a);
  auto bm = map_of(b);
  if (!transpose_a && !transpose_b)
    cm.noalias() += alpha * (am * bm);
  else if (transpose_a && !transpose_b)
    cm.noalias() += alpha * (am.transpose() * bm);
  else if (!transpose_a && transpose_b)
    cm.noalias() += alpha * (am * bm.transpose());
  else
    cm.noalias() += alpha * (am.transpose() * bm.transpose());
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

Matrix take_rows(const Matrix& a, std::span<const int> idx) {
  Matrix out(int(idx.size()), a.cols);
  for (int i = 0; i < out.rows; ++i) {
    const int src = idx[std::size_t(i)];
    if (src < 0 || src >= a.rows)
      throw IndexError("take_rows: row " + std::to_string(src) + " out of " +
                       std::to_string(a.rows));
    for (int j = 0; j < a.cols; ++j) out(i, j) = a(src, j);
  }
  return out;
}

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw ShapeError("concat_cols: row count mismatch");
  Matrix out(a.rows, a.cols + b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < a.cols; ++j) out(i, j) = a(i, j);
    for (int j = 0; j < b.cols; ++j) out(i, a.cols + j) = b(i, j);
  }
  return out;
}

bool all_finite(const Matrix& a) {
  for (double v : a.data)
    if (!std::isfinite(v)) return false;
  return true;
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace sesim
