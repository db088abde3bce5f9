#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "oracles.hpp"
#include "sesim/autodiff.hpp"
#include "sesim/matrix.hpp"
#include "sesim/rng.hpp"

using namespace sesim;

namespace {

Matrix random_matrix(int rows, int cols, RngStream& rng, double shift = 0.0) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.gaussian() + shift;
  return m;
}

using GraphFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Evaluates the graph fresh on (possibly perturbed) inputs and compares the
// tape's gradient for every input entry against a central finite difference.
void check_gradients(const GraphFn& build, std::vector<Matrix> inputs,
                     double tol = 1e-6) {
  auto eval = [&]() {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(inputs.size());
    for (const Matrix& m : inputs) leaves.push_back(tape.leaf(m, true));
    return scalar(build(tape, leaves));
  };

  Tape tape;
  std::vector<Var> leaves;
  for (const Matrix& m : inputs) leaves.push_back(tape.leaf(m, true));
  tape.backward(build(tape, leaves));

  const double h = 1e-5;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix& analytic = tape.grad(leaves[k]);
    REQUIRE(analytic.same_shape(inputs[k]));
    for (std::size_t e = 0; e < inputs[k].size(); ++e) {
      const double fd = oracle::fd_entry(eval, &inputs[k].data[e], h);
      INFO("input ", k, " entry ", e);
      CHECK(oracle::rel_err(analytic.data[e], fd) < tol);
    }
  }
}

}  // namespace

TEST_CASE("gradients of every elementwise and reduction op") {
  RngStream rng(3);
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix b = random_matrix(3, 4, rng);

  check_gradients([](Tape&, const std::vector<Var>& v) { return sum(add(v[0], v[1])); },
                  {a, b});
  check_gradients(
      [](Tape&, const std::vector<Var>& v) { return sum(square(sub(v[0], v[1]))); },
      {a, b});
  check_gradients(
      [](Tape&, const std::vector<Var>& v) { return sum(mul(v[0], v[1])); }, {a, b});
  check_gradients(
      [](Tape&, const std::vector<Var>& v) { return mean(scale(v[0], -2.5)); }, {a});
  check_gradients([](Tape&, const std::vector<Var>& v) { return sum(exp(v[0])); }, {a});
  check_gradients(
      [](Tape&, const std::vector<Var>& v) { return sum(square(row_sum(v[0]))); }, {a});
  check_gradients([](Tape&, const std::vector<Var>& v) { return sum(column(v[0], 2)); },
                  {a});

  const Matrix pos = random_matrix(3, 3, rng, 5.0);  // keep ln away from 0
  check_gradients([](Tape&, const std::vector<Var>& v) { return sum(ln(v[0])); }, {pos});
}

TEST_CASE("gradients of structural ops") {
  RngStream rng(4);
  const Matrix a = random_matrix(4, 2, rng);
  const Matrix b = random_matrix(4, 3, rng);
  const Matrix w = random_matrix(2, 3, rng);
  const Matrix v = random_matrix(1, 3, rng);

  check_gradients(
      [](Tape&, const std::vector<Var>& in) { return sum(matmul(in[0], in[1])); },
      {a, w});
  check_gradients(
      [](Tape&, const std::vector<Var>& in) {
        return sum(square(matmul(in[0], in[1])));
      },
      {a, w});
  check_gradients(
      [](Tape&, const std::vector<Var>& in) {
        return sum(square(add_rowvec(in[0], in[1])));
      },
      {b, v});
  check_gradients(
      [](Tape&, const std::vector<Var>& in) {
        return sum(square(concat_cols(in[0], in[1])));
      },
      {a, b});
}

TEST_CASE("gradients through kinked and saturating ops") {
  RngStream rng(5);
  Matrix a = random_matrix(3, 4, rng);
  // keep entries away from the relu/clamp kinks so FD is well defined
  for (double& x : a.data)
    if (std::abs(x) < 0.05) x += 0.2;

  check_gradients(
      [](Tape&, const std::vector<Var>& v) { return sum(leaky_relu(v[0], 0.1)); }, {a});
  check_gradients(
      [](Tape&, const std::vector<Var>& v) {
        return sum(square(clamp(v[0], -0.5, 0.5)));
      },
      {a});
  check_gradients(
      [](Tape&, const std::vector<Var>& v) { return sum(square(softmax_rows(v[0]))); },
      {a});

  // clamp kills the gradient where it clipped
  Tape tape;
  Var x = tape.leaf(Matrix::from_rows({{-2.0, 0.0, 2.0}}), true);
  tape.backward(sum(clamp(x, -1.0, 1.0)));
  const Matrix& g = tape.grad(x);
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == 1.0);
  CHECK(g(0, 2) == 0.0);
}

TEST_CASE("dropout: gradients with a replayable mask, identity when off") {
  RngStream rng(6);
  const Matrix a = random_matrix(4, 5, rng, 1.0);

  // same-seeded stream per evaluation -> identical mask -> valid FD
  check_gradients(
      [](Tape&, const std::vector<Var>& v) {
        RngStream mask_rng(99);
        return sum(square(dropout(v[0], 0.4, true, &mask_rng)));
      },
      {a});

  Tape tape;
  Var x = tape.leaf(a, true);
  RngStream untouched(123);
  Var off = dropout(x, 0.4, false, &untouched);
  Var zero_rate = dropout(x, 0.0, true, &untouched);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(tape.value(off).data[i] == a.data[i]);
    CHECK(tape.value(zero_rate).data[i] == a.data[i]);
  }
  // neither call may consume randomness
  RngStream twin(123);
  CHECK(untouched.uniform() == twin.uniform());

  // training mask: entries are either dropped or scaled by 1/(1-rate)
  RngStream mask_rng(7);
  Var on = dropout(x, 0.25, true, &mask_rng);
  int dropped = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double v = tape.value(on).data[i];
    if (v == 0.0) {
      ++dropped;
    } else {
      CHECK(v == doctest::Approx(a.data[i] / 0.75).epsilon(1e-12));
    }
  }
  CHECK(dropped > 0);
  CHECK(dropped < int(a.size()));

  CHECK_THROWS_AS(dropout(x, 1.0, true, &mask_rng), ParameterError);
  CHECK_THROWS_AS(dropout(x, -0.1, true, &mask_rng), ParameterError);
}

TEST_CASE("softmax rows: stochastic rows, stable under large offsets") {
  Tape tape;
  Var x = tape.leaf(Matrix::from_rows({{1.0, 2.0, 3.0}, {1e4 + 1.0, 1e4 + 2.0, 1e4 + 3.0}}));
  const Matrix& p = tape.value(softmax_rows(x));
  CHECK(all_finite(p));
  for (int i = 0; i < p.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < p.cols; ++j) {
      CHECK(p(i, j) > 0.0);
      s += p(i, j);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  // shifting a whole row by a constant leaves its distribution unchanged
  for (int j = 0; j < 3; ++j)
    CHECK(p(0, j) == doctest::Approx(p(1, j)).epsilon(1e-9));
}

TEST_CASE("leaf gradients accumulate across sweeps; interiors are per-sweep") {
  Tape tape;
  Var x = tape.leaf(Matrix::from_rows({{2.0, 3.0}}), true);
  Var y = square(x);  // interior
  Var loss = sum(y);

  tape.backward(loss);
  CHECK(tape.grad(x)(0, 0) == doctest::Approx(4.0));
  CHECK(tape.grad(y)(0, 0) == doctest::Approx(1.0));

  tape.backward(loss);  // leaves accumulate, interiors reset
  CHECK(tape.grad(x)(0, 0) == doctest::Approx(8.0));
  CHECK(tape.grad(y)(0, 0) == doctest::Approx(1.0));

  tape.zero_grad();
  tape.backward(loss);
  CHECK(tape.grad(x)(0, 0) == doctest::Approx(4.0));
}

TEST_CASE("a reused subexpression receives both contributions") {
  Tape tape;
  Var x = tape.leaf(Matrix::from_rows({{1.5}}), true);
  Var y = square(x);            // x^2
  Var loss = sum(add(y, mul(y, y)));  // x^2 + x^4
  tape.backward(loss);
  // d/dx = 2x + 4x^3
  CHECK(tape.grad(x)(0, 0) == doctest::Approx(2 * 1.5 + 4 * 1.5 * 1.5 * 1.5));
}

TEST_CASE("gradient flows only where requested") {
  Tape tape;
  Var p = tape.leaf(Matrix::from_rows({{1.0, 2.0}}), true);
  Var c = tape.constant(Matrix::from_rows({{3.0, 4.0}}));
  Var loss = sum(mul(p, c));
  CHECK(tape.requires_grad(loss));
  tape.backward(loss);
  CHECK(tape.grad(p)(0, 0) == 3.0);
  const Matrix& gc = tape.grad(c);  // never touched: zeros
  CHECK(gc(0, 0) == 0.0);
}

TEST_CASE("contract violations throw") {
  Tape t1, t2;
  Var a = t1.leaf(Matrix(2, 2, 1.0));
  Var b = t2.leaf(Matrix(2, 2, 1.0));
  CHECK_THROWS_AS(add(a, b), ContractError);
  CHECK_THROWS_AS(add(a, t1.leaf(Matrix(2, 3, 0.0))), ShapeError);
  CHECK_THROWS_AS(matmul(a, t1.leaf(Matrix(3, 2, 0.0))), ShapeError);
  CHECK_THROWS_AS(t1.backward(a), ContractError);  // loss must be 1x1
  CHECK_THROWS_AS(ln(t1.leaf(Matrix(1, 1, -1.0))), DomainError);
  CHECK_THROWS_AS(ln(t1.leaf(Matrix(1, 1, 0.0))), DomainError);
  CHECK_THROWS_AS(column(a, 2), IndexError);
  CHECK_THROWS_AS(scalar(a), ContractError);
}

TEST_CASE("a small end-to-end network gradient") {
  RngStream rng(8);
  const Matrix x = random_matrix(5, 3, rng);
  const Matrix w1 = random_matrix(3, 4, rng);
  const Matrix b1 = random_matrix(1, 4, rng);
  const Matrix w2 = random_matrix(4, 2, rng);
  const Matrix y = random_matrix(5, 2, rng);

  check_gradients(
      [&x, &y](Tape& tape, const std::vector<Var>& v) {
        Var h = leaky_relu(add_rowvec(matmul(tape.constant(x), v[0]), v[1]), 0.1);
        Var p = softmax_rows(matmul(h, v[2]));
        return mean(square(sub(p, tape.constant(y))));
      },
      {w1, b1, w2}, 1e-5);
}
