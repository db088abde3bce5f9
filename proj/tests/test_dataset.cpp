#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "sesim/dataset.hpp"
#include "sesim/rng.hpp"

using namespace sesim;

TEST_CASE("two moons: sizes, classes, noise-free geometry") {
  const Dataset ds = make_two_moons(101, 0.0, 42);
  CHECK(ds.n() == 101);
  CHECK(ds.dim() == 2);
  CHECK(ds.classes == 2);
  CHECK(ds.name == "two_moons");

  int count0 = 0;
  for (int i = 0; i < ds.n(); ++i) {
    const double x = ds.x(i, 0), y = ds.x(i, 1);
    if (ds.y[std::size_t(i)] == 0) {
      ++count0;
      // upper arc: unit half-circle around the origin
      CHECK(x * x + y * y == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(y >= -1e-12);
    } else {
      // lower arc: unit half-circle around (1, 0.5), opening upward
      const double dx = x - 1.0, dy = y - 0.5;
      CHECK(dx * dx + dy * dy == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(y <= 0.5 + 1e-12);
    }
  }
  CHECK(count0 == 51);  // odd n: the extra point goes to class 0
}

TEST_CASE("two circles: concentric radii") {
  const Dataset ds = make_two_circles(200, 0.0, 7);
  CHECK(ds.name == "two_circles");
  for (int i = 0; i < ds.n(); ++i) {
    const double r = std::hypot(ds.x(i, 0), ds.x(i, 1));
    const double want = ds.y[std::size_t(i)] == 0 ? 1.0 : 0.5;
    CHECK(r == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("noise has roughly the requested scale") {
  const double sigma = 0.15;
  const Dataset noisy = make_two_moons(4000, sigma, 9);
  // distance from the class-0 arc: |r - 1| is |radial noise component|-ish;
  // crude but catches sigma being ignored or mis-scaled
  double acc = 0.0;
  int count = 0;
  for (int i = 0; i < noisy.n(); ++i) {
    if (noisy.y[std::size_t(i)] != 0) continue;
    const double r = std::hypot(noisy.x(i, 0), noisy.x(i, 1));
    acc += (r - 1.0) * (r - 1.0);
    ++count;
  }
  const double radial_std = std::sqrt(acc / count);
  CHECK(radial_std > 0.5 * sigma);
  CHECK(radial_std < 1.5 * sigma);
}

TEST_CASE("generation is deterministic in the seed") {
  const Dataset a = make_two_moons(50, 0.1, 11);
  const Dataset b = make_two_moons(50, 0.1, 11);
  const Dataset c = make_two_moons(50, 0.1, 12);
  CHECK(a.x.data == b.x.data);
  CHECK(a.y == b.y);
  CHECK(a.x.data != c.x.data);
}

TEST_CASE("make_dataset dispatch and argument validation") {
  CHECK(make_dataset("two_moons", 10, 0.0, 1).name == "two_moons");
  CHECK(make_dataset("two_circles", 10, 0.0, 1).name == "two_circles");
  CHECK_THROWS_AS(make_dataset("swiss_roll", 10, 0.0, 1), ParameterError);
  CHECK_THROWS_AS(make_two_moons(1, 0.0, 1), ParameterError);
  CHECK_THROWS_AS(make_two_moons(10, -0.5, 1), ParameterError);
}

TEST_CASE("select_labeled: balanced, sorted, reproducible") {
  Dataset ds = make_two_moons(200, 0.15, 3);
  ds = select_labeled(std::move(ds), 12, 77);
  REQUIRE(ds.labeled_count() == 12);
  CHECK(std::is_sorted(ds.labeled_idx.begin(), ds.labeled_idx.end()));

  int per_class[2] = {0, 0};
  std::set<int> unique(ds.labeled_idx.begin(), ds.labeled_idx.end());
  CHECK(unique.size() == 12);
  for (int i : ds.labeled_idx) ++per_class[ds.y[std::size_t(i)]];
  CHECK(per_class[0] == 6);
  CHECK(per_class[1] == 6);

  const Dataset again = select_labeled(make_two_moons(200, 0.15, 3), 12, 77);
  CHECK(again.labeled_idx == ds.labeled_idx);
  const Dataset other = select_labeled(make_two_moons(200, 0.15, 3), 12, 78);
  CHECK(other.labeled_idx != ds.labeled_idx);

  CHECK_THROWS_AS(select_labeled(make_two_moons(20, 0.1, 1), 7, 1), ParameterError);
  CHECK_THROWS_AS(select_labeled(make_two_moons(20, 0.1, 1), 0, 1), ParameterError);
  CHECK_THROWS_AS(select_labeled(make_two_moons(6, 0.1, 1), 100, 1), ParameterError);
}

TEST_CASE("augment adds zero-mean noise of the right scale") {
  RngStream rng(5);
  const Matrix x(500, 2, 1.0);
  const Matrix pert = augment(x, 0.05, rng);
  REQUIRE(pert.same_shape(x));
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = pert.data[i] - x.data[i];
    acc += d * d;
  }
  const double std_hat = std::sqrt(acc / double(x.size()));
  CHECK(std_hat > 0.04);
  CHECK(std_hat < 0.06);

  RngStream rng2(5);
  const Matrix same = augment(x, 0.05, rng2);
  CHECK(same.data == pert.data);

  RngStream rng3(5);
  CHECK_THROWS_AS(augment(x, -1.0, rng3), ParameterError);
}

TEST_CASE("one_hot") {
  const Matrix t = one_hot({1, 0, 2}, 3);
  CHECK(t.rows == 3);
  CHECK(t.cols == 3);
  CHECK(t(0, 1) == 1.0);
  CHECK(t(1, 0) == 1.0);
  CHECK(t(2, 2) == 1.0);
  double total = 0.0;
  for (double v : t.data) total += v;
  CHECK(total == 3.0);
  CHECK_THROWS_AS(one_hot({3}, 3), IndexError);
  CHECK_THROWS_AS(one_hot({-1}, 3), IndexError);
}

TEST_CASE("dataset csv: header, row count, labeled flags") {
  Dataset ds = select_labeled(make_two_moons(40, 0.1, 2), 4, 3);
  std::ostringstream os;
  write_dataset_csv(ds, os);
  std::istringstream is(os.str());
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == "x0,x1,label,labeled");
  int rows = 0, flagged = 0;
  while (std::getline(is, line)) {
    ++rows;
    if (line.size() >= 2 && line.back() == '1' && line[line.size() - 2] == ',')
      ++flagged;
  }
  CHECK(rows == 40);
  CHECK(flagged == 4);
}
