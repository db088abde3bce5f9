#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "oracles.hpp"
#include "sesim/network.hpp"
#include "sesim/rng.hpp"

using namespace sesim;

namespace {

MlpSpec small_spec() {
  MlpSpec s;
  s.widths = {3, 5, 2};
  s.dropout = {0.0};
  return s;
}

Matrix random_inputs(int rows, int cols, std::uint64_t seed) {
  RngStream rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.gaussian();
  return m;
}

bool same_params(const MlpParams& a, const MlpParams& b) {
  if (a.w.size() != b.w.size()) return false;
  for (std::size_t i = 0; i < a.w.size(); ++i)
    if (a.w[i].data != b.w[i].data || a.b[i].data != b.b[i].data) return false;
  return true;
}

}  // namespace

TEST_CASE("spec validation") {
  CHECK_NOTHROW(small_spec().validate());
  MlpSpec s = small_spec();
  s.widths = {3};
  CHECK_THROWS_AS(s.validate(), ParameterError);
  s = small_spec();
  s.widths[1] = 0;
  CHECK_THROWS_AS(s.validate(), ParameterError);
  s = small_spec();
  s.dropout = {0.2, 0.2};
  CHECK_THROWS_AS(s.validate(), ParameterError);
  s = small_spec();
  s.dropout = {1.0};
  CHECK_THROWS_AS(s.validate(), ParameterError);
}

TEST_CASE("init: shapes, zero biases, he-scaled weights") {
  MlpSpec s;
  s.widths = {100, 80, 2};
  s.dropout = {0.0};
  const MlpParams p = init_mlp(s, 21);
  REQUIRE(p.w.size() == 2);
  CHECK(p.w[0].rows == 100);
  CHECK(p.w[0].cols == 80);
  CHECK(p.w[1].rows == 80);
  CHECK(p.w[1].cols == 2);
  CHECK(p.b[0].rows == 1);
  CHECK(p.b[0].cols == 80);
  for (double v : p.b[0].data) CHECK(v == 0.0);
  for (double v : p.b[1].data) CHECK(v == 0.0);

  double acc = 0.0, mean = 0.0;
  for (double v : p.w[0].data) mean += v;
  mean /= double(p.w[0].size());
  for (double v : p.w[0].data) acc += (v - mean) * (v - mean);
  const double std_hat = std::sqrt(acc / double(p.w[0].size()));
  const double want = std::sqrt(2.0 / 100.0);  // fan_in scaling
  CHECK(std::abs(mean) < 0.02);
  CHECK(std_hat == doctest::Approx(want).epsilon(0.1));

  CHECK(same_params(p, init_mlp(s, 21)));
  CHECK_FALSE(same_params(p, init_mlp(s, 22)));
}

TEST_CASE("forward pass matches the scalar oracle") {
  MlpSpec s;
  s.widths = {4, 6, 5, 3};
  s.dropout = {0.0, 0.0};
  s.leaky_slope = 0.1;
  const MlpParams p = init_mlp(s, 5);
  const Matrix x = random_inputs(7, 4, 6);

  const MlpValueForward got = mlp_forward_values(p, x, false, nullptr);
  REQUIRE(got.output.rows == 7);
  REQUIRE(got.output.cols == 3);
  REQUIRE(got.latent.cols == 5);
  for (int i = 0; i < x.rows; ++i) {
    const oracle::ForwardResult want = oracle::mlp(p, oracle::matrix_row(x, i));
    for (int j = 0; j < 3; ++j)
      CHECK(got.output(i, j) == doctest::Approx(want.output[std::size_t(j)])
                                    .epsilon(1e-12));
    for (int j = 0; j < 5; ++j)
      CHECK(got.latent(i, j) == doctest::Approx(want.latent[std::size_t(j)])
                                    .epsilon(1e-12));
  }

  // rows are probability vectors
  for (int i = 0; i < 7; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 3; ++j) sum += got.output(i, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("tape forward and value forward agree bitwise, including dropout") {
  MlpSpec s;
  s.widths = {3, 8, 4, 2};
  s.dropout = {0.3, 0.2};
  const MlpParams p = init_mlp(s, 17);
  const Matrix x = random_inputs(5, 3, 18);

  for (bool training : {false, true}) {
    RngStream rng_a(33), rng_b(33);
    Tape tape;
    const BoundMlp bound = bind_mlp(tape, p, false);
    const MlpForward on_tape =
        mlp_forward(tape, bound, tape.constant(x), training, &rng_a);
    const MlpValueForward plain = mlp_forward_values(p, x, training, &rng_b);
    CHECK(tape.value(on_tape.output).data == plain.output.data);
    CHECK(tape.value(on_tape.latent).data == plain.latent.data);
  }
}

TEST_CASE("single-layer net: latent is the input itself") {
  MlpSpec s;
  s.widths = {3, 2};
  const MlpParams p = init_mlp(s, 1);
  const Matrix x = random_inputs(4, 3, 2);
  const MlpValueForward f = mlp_forward_values(p, x, false, nullptr);
  CHECK(f.latent.data == x.data);
}

TEST_CASE("wrong input width is rejected") {
  const MlpParams p = init_mlp(small_spec(), 1);
  CHECK_THROWS_AS(mlp_forward_values(p, Matrix(2, 4), false, nullptr), ShapeError);
}

TEST_CASE("model state: substream init, ema shadow, ema update") {
  const MlpSpec f = toy_feature_spec(2, 10, 2);
  const MlpSpec phi = toy_similarity_spec(10, {16, 8}, 0.2);
  ModelState st = init_model(f, phi, 99, 0.9);

  CHECK(same_params(st.similarity, st.similarity_ema));  // shadow starts as a copy
  // per-network substreams: the two nets must not share their draw sequence
  CHECK(st.feature.w[0](0, 0) != st.similarity.w[0](0, 0));

  const double before_live = st.similarity.w[0](0, 0);
  const double before_ema = st.similarity_ema.w[0](0, 0);
  st.similarity.w[0](0, 0) = before_live + 1.0;
  ema_update(st, 0.9);
  CHECK(st.similarity_ema.w[0](0, 0) ==
        doctest::Approx(0.9 * before_ema + 0.1 * (before_live + 1.0)).epsilon(1e-15));

  CHECK_THROWS_AS(init_model(f, toy_similarity_spec(9, {16}, 0.0), 1, 0.9),
                  ParameterError);
  CHECK_THROWS_AS(init_model(f, phi, 1, 1.0), ParameterError);
  CHECK_THROWS_AS(ema_update(st, -0.1), ParameterError);
}

TEST_CASE("feature_eval and similarity_eval") {
  const MlpSpec f = toy_feature_spec(2, 6, 2);
  const MlpSpec phi = toy_similarity_spec(6, {8}, 0.0);
  const ModelState st = init_model(f, phi, 4, 0.99);
  const Matrix x = random_inputs(5, 2, 8);

  const FeatureEval fe = feature_eval(st, x);
  CHECK(fe.z.rows == 5);
  CHECK(fe.z.cols == 6);
  CHECK(fe.f.cols == 2);

  const Matrix p_live = similarity_eval(st, fe.z, fe.z, false);
  const Matrix p_ema = similarity_eval(st, fe.z, fe.z, true);
  CHECK(p_live.rows == 5);
  CHECK(p_live.cols == 2);
  CHECK(p_live.data == p_ema.data);  // shadow starts equal to live
  for (int i = 0; i < 5; ++i)
    CHECK(p_live(i, 0) + p_live(i, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("save/load round-trips bit-exactly") {
  const MlpSpec f = toy_feature_spec(2, 7, 2);
  const MlpSpec phi = toy_similarity_spec(7, {9, 5}, 0.2);
  ModelState st = init_model(f, phi, 123, 0.97);
  st.feature.w[0](0, 0) = 0.1234567890123456789;  // not representable exactly

  const std::string path = "test_model_roundtrip.bin";
  save_model(st, path);
  const ModelState back = load_model(path);
  CHECK(same_params(st.feature, back.feature));
  CHECK(same_params(st.similarity, back.similarity));
  CHECK(same_params(st.similarity_ema, back.similarity_ema));
  CHECK(back.ema_decay == st.ema_decay);
  CHECK(back.feature.spec.widths == st.feature.spec.widths);
  CHECK(back.similarity.spec.dropout == st.similarity.spec.dropout);
  std::remove(path.c_str());
}

TEST_CASE("load rejects missing, corrupt, truncated files") {
  CHECK_THROWS_AS(load_model("no_such_file.bin"), IoError);

  const std::string bad = "test_model_bad.bin";
  {
    std::ofstream os(bad, std::ios::binary);
    os << "PNG8definitely not a model";
  }
  CHECK_THROWS_AS(load_model(bad), IoError);

  const MlpSpec f = toy_feature_spec(2, 4, 2);
  ModelState st = init_model(f, toy_similarity_spec(4, {6}, 0.0), 9, 0.99);
  save_model(st, bad);
  {
    std::ifstream is(bad, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)),
                      std::istreambuf_iterator<char>());
    std::ofstream os(bad, std::ios::binary);
    os.write(bytes.data(), std::streamsize(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_model(bad), IoError);
  std::remove(bad.c_str());
}

TEST_CASE("toy architectures") {
  const MlpSpec f = toy_feature_spec(2, 100, 2);
  CHECK(f.widths == std::vector<int>{2, 100, 2});
  CHECK(f.leaky_slope == 0.1);
  CHECK(f.softmax_head);

  const MlpSpec phi = toy_similarity_spec(100, {512, 128, 64}, 0.2);
  CHECK(phi.widths == std::vector<int>{200, 512, 128, 64, 2});
  REQUIRE(phi.dropout.size() == 3);
  CHECK(phi.dropout[0] == 0.2);
  CHECK(phi.dropout[1] == 0.2);
  CHECK(phi.dropout[2] == 0.0);  // none after the last hidden layer
  CHECK(phi.softmax_head);
}
