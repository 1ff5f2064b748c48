#include <doctest.h>

#include <cmath>

#include "srda/errors.hpp"
#include "srda/metrics.hpp"
#include "srda/rng.hpp"
#include "suites.hpp"

using namespace srda;

TEST_CASE("hausdorff equals the brute-force oracle") {
  const auto r = suites::hausdorff_suite(11, 50);
  CHECK(r.pairs == 50);
  CHECK(r.mismatches == 0);
  const auto big = suites::hausdorff_suite(12, 20, 40);
  CHECK(big.mismatches == 0);
}

TEST_CASE("dice and hausdorff are symmetric and bounded") {
  Rng rng(13);
  for (int t = 0; t < 100; ++t) {
    LabelMask a(12, 9);
    LabelMask b(12, 9);
    for (auto& v : a.values) v = rng.uniform() < 0.3 ? 1 : 0;
    for (auto& v : b.values) v = rng.uniform() < 0.2 ? 1 : 0;
    const double d = dice(a, b, 1);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(d == dice(b, a, 1));
    CHECK(hausdorff(a, b, 1) == hausdorff(b, a, 1));
    CHECK(hausdorff(a, b, 1) >= 0.0);
  }
}

TEST_CASE("metric shape mismatch is rejected") {
  CHECK_THROWS_AS(dice(LabelMask(4, 4), LabelMask(4, 5), 1), ShapeError);
  CHECK_THROWS_AS(hausdorff(LabelMask(4, 4), LabelMask(5, 4), 1), ShapeError);
}

TEST_CASE("distance transform") {
  std::vector<std::uint8_t> f(5 * 7, 0);
  f[2 * 7 + 3] = 1;
  const auto d = squared_distance_transform(f, 5, 7);
  CHECK(d[2 * 7 + 3] == 0);
  CHECK(d[0] == 4 + 9);
  CHECK(d[4 * 7 + 6] == 4 + 9);
  const auto none = squared_distance_transform(std::vector<std::uint8_t>(6, 0), 2, 3);
  for (long long v : none) CHECK(v == -1);
}

TEST_CASE("volume aggregation") {
  std::vector<SliceScore> s = {
      {3, true, 0.8, 2.0, 0.1, 0.05}, {3, false, 1.0, 0.0, 0.3, 0.0}, {3, true, 0.6, 4.0, 0.2, 0.1},
      {5, true, 0.5, 1.0, 0.4, 0.2},
  };
  const auto v = aggregate_volumes(s);
  REQUIRE(v.size() == 2);
  CHECK(v[0].volume == 3);
  CHECK(v[0].dsc == doctest::Approx(0.7));
  CHECK(v[0].hd == doctest::Approx(3.0));
  CHECK(v[0].entropy == doctest::Approx(0.2));
  CHECK(v[0].scored_slices == 2);
  CHECK(v[1].dsc == doctest::Approx(0.5));
  const std::vector<double> xs = {1.0, 3.0};
  const MeanStd ms = mean_std(xs);
  CHECK(ms.mean == 2.0);
  CHECK(ms.std == 1.0);
}
