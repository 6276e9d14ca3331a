#include <cmath>
#include <random>

#include "doctest.h"
#include "support/oracles.hpp"
#include "tripath/error.hpp"
#include "tripath/metrics.hpp"

using namespace tripath;
using tripath::testing::brute_force_auroc;

namespace {

struct Case {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Random sets with both classes; odd cases draw scores from a handful of
// values so ties dominate.
Case random_case(std::mt19937_64& gen, int index) {
  std::uniform_int_distribution<int> size(2, 200);
  const int n = size(gen);
  Case c;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> coarse(0, 4);
  for (int i = 0; i < n; ++i) {
    c.labels.push_back(u(gen) < 0.3 + 0.4 * u(gen) ? 1 : 0);
    c.scores.push_back(index % 2 ? coarse(gen) / 4.0 : u(gen));
  }
  c.labels[0] = 0;
  c.labels[1] = 1;
  return c;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("worked case") {
    const std::vector<double> s{0.9, 0.4, 0.8, 0.3};
    const std::vector<int> y{1, 1, 0, 0};
    CHECK(auroc(s, y) == 0.75);
  }

  TEST_CASE("rank statistic equals the pairwise oracle") {
    std::mt19937_64 gen(2024);
    for (int k = 0; k < 100; ++k) {
      const auto c = random_case(gen, k);
      CAPTURE(k);
      CHECK(std::abs(auroc(c.scores, c.labels) - brute_force_auroc(c.scores, c.labels)) <= 1e-12);
    }
  }

  TEST_CASE("extremes and ties") {
    const std::vector<int> y{0, 0, 1, 1};
    CHECK(auroc(std::vector<double>{0.1, 0.2, 0.3, 0.4}, y) == 1.0);
    CHECK(auroc(std::vector<double>{0.4, 0.3, 0.2, 0.1}, y) == 0.0);
    CHECK(auroc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y) == 0.5);
  }

  TEST_CASE("invariant under strictly increasing transforms") {
    std::mt19937_64 gen(9);
    for (int k = 0; k < 20; ++k) {
      auto c = random_case(gen, k);
      std::vector<double> t;
      for (double s : c.scores) t.push_back(std::exp(3.0 * s) - 7.0);
      CHECK(auroc(t, c.labels) == auroc(c.scores, c.labels));
    }
  }

  TEST_CASE("errors") {
    auto code = [](auto&& fn) {
      try {
        fn();
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::InvalidArgument;
    };
    CHECK(code([] { auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}); }) == ErrorCode::SingleClass);
    CHECK(code([] { auroc(std::vector<double>{0.1}, std::vector<int>{1, 0}); }) == ErrorCode::LengthMismatch);
  }

  TEST_CASE("threshold metrics") {
    // Predictions at 0.5: 1 1 0 1 0 against labels 1 0 0 1 1 -> TP 2, FP 1, FN 1, TN 1.
    const std::vector<double> s{0.9, 0.6, 0.2, 0.5, 0.1};
    const std::vector<int> y{1, 0, 0, 1, 1};
    const auto m = threshold_metrics(s, y);
    CHECK(m.accuracy == doctest::Approx(3.0 / 5));
    CHECK(m.precision == doctest::Approx(2.0 / 3));
    CHECK(m.recall == doctest::Approx(2.0 / 3));
    CHECK(m.f1 == doctest::Approx(2.0 / 3));
    const auto none = threshold_metrics(s, y, 2.0);
    CHECK(none.precision == 0.0);
    CHECK(none.f1 == 0.0);
  }
}
