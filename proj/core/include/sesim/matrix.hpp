#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace sesim {

// Error taxonomy. Everything user-facing throws one of these; internal
// invariant violations use ContractError so they are distinguishable from
// bad inputs.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles -- the single tensor type used for
/// data, activations, parameters and gradients. Row vectors are 1xN,
/// column vectors Nx1, scalars 1x1.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // rows * cols entries, row-major

  Matrix() = default;
  Matrix(int rows, int cols);
  Matrix(int rows, int cols, double fill);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(int n);

  double& operator()(int i, int j) { return data[std::size_t(i) * cols + j]; }
  double operator()(int i, int j) const { return data[std::size_t(i) * cols + j]; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

/// c = a * b. Throws ShapeError on inner-dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

/// c += alpha * op(a) * op(b) where op optionally transposes its argument
/// without materialising a copy. c must already have the result shape.
void gemm_acc(Matrix& c, const Matrix& a, bool transpose_a, const Matrix& b,
              bool transpose_b, double alpha = 1.0);

Matrix transpose(const Matrix& a);

/// Copy of the given rows, in the given order (duplicates allowed).
Matrix take_rows(const Matrix& a, std::span<const int> idx);

/// [a | b] side by side; row counts must match.
Matrix concat_cols(const Matrix& a, const Matrix& b);

bool all_finite(const Matrix& a);

/// Largest absolute entry; 0 for an empty matrix.
double max_abs(const Matrix& a);

}  // namespace sesim
