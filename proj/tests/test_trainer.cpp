#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "sesim/trainer.hpp"

using namespace sesim;

namespace {

// small everything: fast enough to train repeatedly inside a unit test
TrainConfig tiny_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch.b1 = 8;
  cfg.batch.b2 = 3;
  cfg.feature_hidden = 12;
  cfg.similarity_hidden = {16, 8};
  cfg.ramp = RampConfig{2, 2, 1, 2};
  cfg.seed = seed;
  return cfg;
}

Dataset tiny_data(std::uint64_t seed) {
  return select_labeled(make_two_moons(64, 0.15, seed), 8, seed + 1);
}

}  // namespace

TEST_CASE("warm-up curve: flat zero through the delay, peak exactly at the end") {
  const double target = 0.75;
  CHECK(rampup(1, target, 50, 100) == 0.0);
  CHECK(rampup(57, target, 50, 100) == 0.0);
  CHECK(rampup(100, target, 50, 100) == 0.0);
  CHECK(rampup(101, target, 50, 100) > 0.0);
  CHECK(rampup(150, target, 50, 100) == target);  // exact, not approximate
  CHECK(rampup(400, target, 50, 100) == target);

  // no delay: starts climbing from epoch 1, tops out at ramp_epochs
  CHECK(rampup(1, target, 80, 0) > 0.0);
  CHECK(rampup(1, target, 80, 0) < target);
  CHECK(rampup(80, target, 80, 0) == target);

  // the gaussian warm-up shape, spot-checked at the midpoint
  const double mid = rampup(125, target, 50, 100);
  CHECK(mid == doctest::Approx(target * std::exp(-5.0 * 0.25)).epsilon(1e-12));
  // strictly increasing along the ramp
  double prev = 0.0;
  for (int e = 101; e <= 150; ++e) {
    const double v = rampup(e, target, 50, 100);
    CHECK(v > prev);
    prev = v;
  }

  CHECK_THROWS_AS(rampup(1, target, 0, 0), ParameterError);
  CHECK_THROWS_AS(rampup(1, target, -5, 0), ParameterError);
}

TEST_CASE("per-epoch loss weights follow the published schedule") {
  Dataset ds = tiny_data(5);  // 64 points, 8 labeled
  TrainConfig cfg;
  cfg.k1 = 3.0;
  cfg.k2 = 2.0;
  cfg.lambda3_max = 0.15;
  cfg.ramp = RampConfig{80, 100, 50, 80};
  const double ratio = 8.0 / 64.0;

  const LossWeights early = effective_weights(cfg, ds, 1);
  CHECK(early.lambda1 > 0.0);
  CHECK(early.lambda2 == 0.0);
  CHECK(early.lambda3 > 0.0);
  CHECK(early.beta == cfg.beta);

  const LossWeights at80 = effective_weights(cfg, ds, 80);
  CHECK(at80.lambda1 == 3.0 * ratio);     // peak, exactly
  CHECK(at80.lambda3 == cfg.lambda3_max);  // peak, exactly
  CHECK(at80.lambda2 == 0.0);              // still dormant

  CHECK(effective_weights(cfg, ds, 100).lambda2 == 0.0);
  CHECK(effective_weights(cfg, ds, 101).lambda2 > 0.0);
  const LossWeights at150 = effective_weights(cfg, ds, 150);
  CHECK(at150.lambda2 == 2.0 * ratio);  // peak, exactly

  CHECK(effective_lr(cfg, 80) == cfg.lr_max);
  CHECK(effective_lr(cfg, 1) < cfg.lr_max);
  CHECK(effective_lr(cfg, 1) > 0.0);
}

TEST_CASE("one adam update matches the textbook formula") {
  Matrix p(1, 2, 1.0);
  Matrix g = Matrix::from_rows({{0.5, -0.25}});
  Matrix m(1, 2, 0.0), v(1, 2, 0.0);
  AdamConfig adam;
  const double lr = 0.01;

  adam_step(p, g, m, v, lr, adam, 1);

  // with zero-initialised moments the bias-corrected first step is
  // lr * g / (|g| + eps'), i.e. close to a signed lr step
  for (int j = 0; j < 2; ++j) {
    const double m1 = (1 - adam.beta1) * g(0, j) / (1 - adam.beta1);
    const double v1 = (1 - adam.beta2) * g(0, j) * g(0, j) / (1 - adam.beta2);
    const double want = 1.0 - lr * m1 / (std::sqrt(v1) + adam.eps);
    CHECK(p(0, j) == doctest::Approx(want).epsilon(1e-12));
  }

  // second step with the same gradient keeps moving the same direction
  const Matrix before = p;
  adam_step(p, g, m, v, lr, adam, 2);
  CHECK(p(0, 0) < before(0, 0));
  CHECK(p(0, 1) > before(0, 1));

  CHECK_THROWS_AS(adam_step(p, Matrix(2, 2, 0.0), m, v, lr, adam, 3), ShapeError);
  CHECK_THROWS_AS(adam_step(p, g, m, v, lr, adam, 0), ContractError);
}

TEST_CASE("optimizer: three hand-checked steps on a quadratic") {
  // minimize f(x) = x^2 / 2, gradient x
  Matrix x(1, 1, 1.0);
  AdamOptimizer opt(AdamConfig{});
  Matrix m_ref(1, 1, 0.0), v_ref(1, 1, 0.0), x_ref(1, 1, 1.0);
  for (long t = 1; t <= 3; ++t) {
    Matrix g(1, 1, x(0, 0));
    const Matrix g_ref(1, 1, x_ref(0, 0));
    opt.step({&x}, {&g}, 0.1);
    adam_step(x_ref, g_ref, m_ref, v_ref, 0.1, AdamConfig{}, t);
    CHECK(x(0, 0) == x_ref(0, 0));
  }
  CHECK(opt.updates() == 3);
  CHECK(x(0, 0) < 1.0);
}

TEST_CASE("training: zero epochs returns the untouched initial state") {
  const Dataset ds = tiny_data(11);
  TrainConfig cfg = tiny_config(21);
  cfg.epochs = 0;
  const TrainResult r = train(ds, cfg);
  CHECK(r.log.rows.empty());

  const ModelState fresh = init_model(feature_spec_from(cfg, ds),
                                      similarity_spec_from(cfg), cfg.seed,
                                      cfg.ema_decay);
  CHECK(r.state.feature.w[0].data == fresh.feature.w[0].data);
  CHECK(r.state.similarity.w[0].data == fresh.similarity.w[0].data);
  CHECK(r.state.similarity_ema.w[1].data == fresh.similarity_ema.w[1].data);
}

TEST_CASE("training: loss falls and the teacher tracks the live network") {
  const Dataset ds = tiny_data(13);
  TrainConfig cfg = tiny_config(31);
  cfg.epochs = 12;
  const TrainResult r = train(ds, cfg);

  REQUIRE(int(r.log.rows.size()) == 12 * r.log.steps_per_epoch);
  double first = 0.0, last = 0.0;
  const int spe = r.log.steps_per_epoch;
  for (int s = 0; s < spe; ++s) {
    first += r.log.rows[std::size_t(s)].loss.sup_f;
    last += r.log.rows[r.log.rows.size() - std::size_t(s) - 1].loss.sup_f;
  }
  CHECK(last < first);  // the labeled handful is learnable

  // after updates the shadow must sit strictly between init and live
  const ModelState fresh = init_model(feature_spec_from(cfg, ds),
                                      similarity_spec_from(cfg), cfg.seed,
                                      cfg.ema_decay);
  CHECK(r.state.similarity.w[0].data != fresh.similarity.w[0].data);
  CHECK(r.state.similarity_ema.w[0].data != fresh.similarity_ema.w[0].data);
  CHECK(r.state.similarity_ema.w[0].data != r.state.similarity.w[0].data);

  // every logged row carries the epoch's schedule values
  for (const TrainLogRow& row : r.log.rows) {
    CHECK(row.loss.beta == cfg.beta);
    CHECK(row.lr > 0.0);
    CHECK(std::isfinite(row.loss.total));
    CHECK(row.loss.recompose() == doctest::Approx(row.loss.total).epsilon(1e-12));
  }
}

TEST_CASE("training twice with one seed is bit-identical; new seed differs") {
  const Dataset ds = tiny_data(17);
  const TrainConfig cfg = tiny_config(41);
  const TrainResult a = train(ds, cfg);
  const TrainResult b = train(ds, cfg);

  REQUIRE(a.log.rows.size() == b.log.rows.size());
  for (std::size_t i = 0; i < a.log.rows.size(); ++i)
    CHECK(a.log.rows[i].loss.total == b.log.rows[i].loss.total);
  for (std::size_t l = 0; l < a.state.feature.w.size(); ++l)
    CHECK(a.state.feature.w[l].data == b.state.feature.w[l].data);
  for (std::size_t l = 0; l < a.state.similarity.w.size(); ++l) {
    CHECK(a.state.similarity.w[l].data == b.state.similarity.w[l].data);
    CHECK(a.state.similarity_ema.w[l].data == b.state.similarity_ema.w[l].data);
  }

  TrainConfig other = tiny_config(42);
  const TrainResult c = train(ds, other);
  CHECK(c.log.rows[0].loss.total != a.log.rows[0].loss.total);
}

TEST_CASE("training aborts with a located error when the loss explodes") {
  const Dataset ds = tiny_data(19);
  TrainConfig cfg = tiny_config(51);
  // The stabilised softmax and clamped logs absorb merely huge weights, so the
  // step size has to push parameters past the double range to get a non-finite
  // loss part: the first update lands near +-1e308, the next forward overflows.
  cfg.lr_max = 1e308;
  cfg.epochs = 6;
  CHECK_THROWS_AS(train(ds, cfg), NumericalError);
  try {
    train(ds, cfg);
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch") != std::string::npos);
    CHECK(msg.find("step") != std::string::npos);
  }
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(tiny_config(1).validate());
  TrainConfig bad = tiny_config(1);
  bad.beta = 0.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = tiny_config(1);
  bad.epochs = -1;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = tiny_config(1);
  bad.lr_max = 0.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = tiny_config(1);
  bad.ema_decay = 1.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = tiny_config(1);
  bad.lambda3_max = -0.1;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = tiny_config(1);
  bad.batch.b1 = 9;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("log serialisation: csv layout and per-epoch json") {
  const Dataset ds = tiny_data(23);
  TrainConfig cfg = tiny_config(61);
  cfg.epochs = 3;
  const TrainResult r = train(ds, cfg);

  std::ostringstream csv;
  r.log.write_csv(csv);
  std::istringstream is(csv.str());
  std::string header;
  REQUIRE(std::getline(is, header));
  CHECK(header ==
        "epoch,step,sup_f,sup_w,unsup_pinned,unsup_estimated,consistency,total,"
        "lambda1,lambda2,lambda3,beta,lr");
  int lines = 0;
  std::string line;
  while (std::getline(is, line)) ++lines;
  CHECK(lines == int(r.log.rows.size()));

  std::ostringstream js;
  r.log.write_epoch_json(js);
  const auto doc = nlohmann::json::parse(js.str());
  REQUIRE(doc.is_array());
  CHECK(doc.size() == 3);
  CHECK(doc[0].contains("epoch"));
  CHECK(doc[0].contains("total"));
  // epoch means must average the raw step rows
  double acc = 0.0;
  for (int s = 0; s < r.log.steps_per_epoch; ++s)
    acc += r.log.rows[std::size_t(s)].loss.total;
  CHECK(doc[0]["total"].get<double>() ==
        doctest::Approx(acc / r.log.steps_per_epoch).epsilon(1e-12));
}
