#include <doctest.h>

#include <cmath>

#include "ssreg/diagnostics.hpp"

using namespace ssreg;

TEST_CASE("ks statistic basics") {
  Rng rng(1);
  SUBCASE("identical samples: statistic 0, p-value 1") {
    VectorXd a(4);
    a << 0.3, -1.0, 2.0, 0.7;
    const KsResult res = ks_two_sample_bootstrap(a, a, 200, rng);
    CHECK(res.statistic == 0.0);
    CHECK(res.p_value == 1.0);
  }
  SUBCASE("fully separated samples: statistic 1") {
    VectorXd a(3), b(3);
    a << 0.0, 0.0, 0.0;
    b << 1.0, 1.0, 1.0;
    const KsResult res = ks_two_sample_bootstrap(a, b, 200, rng);
    CHECK(res.statistic == 1.0);
  }
  SUBCASE("statistic lives in [0,1] and ignores monotone transforms") {
    for (int t = 0; t < 20; ++t) {
      VectorXd a(15), b(11);
      for (int i = 0; i < 15; ++i) a[i] = rng.normal();
      for (int i = 0; i < 11; ++i) b[i] = 0.5 + rng.normal();
      const double d0 = ks_two_sample_bootstrap(a, b, 100, rng).statistic;
      CHECK(d0 >= 0.0);
      CHECK(d0 <= 1.0);
      auto mono = [](double v) { return std::exp(2.0 * v) - 3.0; };
      VectorXd am = a.unaryExpr(mono), bm = b.unaryExpr(mono);
      const double d1 = ks_two_sample_bootstrap(am, bm, 100, rng).statistic;
      CHECK(d0 == doctest::Approx(d1).epsilon(1e-14));
    }
  }
}

TEST_CASE("ks bootstrap p-value matches exhaustive enumeration") {
  // pooled sample {0,0,0,1,1,1}: enumerate all 6^6 resample tuples
  VectorXd a(3), b(3);
  a << 0.0, 0.0, 0.0;
  b << 1.0, 1.0, 1.0;
  const double pooled[6] = {0, 0, 0, 1, 1, 1};

  auto stat_of = [&](int code) {
    int zeros_first = 0, zeros_second = 0;
    for (int k = 0; k < 3; ++k) {
      zeros_first += pooled[code % 6] == 0.0;
      code /= 6;
    }
    for (int k = 0; k < 3; ++k) {
      zeros_second += pooled[code % 6] == 0.0;
      code /= 6;
    }
    // two-point supports: D = max(|F0(0)-F1(0)|)
    return std::abs(zeros_first - zeros_second) / 3.0;
  };
  int count = 0, total = 6 * 6 * 6 * 6 * 6 * 6;
  for (int code = 0; code < total; ++code)
    if (stat_of(code) >= 1.0) ++count;
  const double exact = static_cast<double>(count) / total;

  Rng rng(7);
  const KsResult res = ks_two_sample_bootstrap(a, b, 20000, rng);
  CHECK(res.statistic == 1.0);
  CHECK(std::abs(res.p_value - exact) <
        4.0 * std::sqrt(exact * (1.0 - exact) / 20000));
}

TEST_CASE("ks guards") {
  Rng rng(2);
  VectorXd a(3);
  a << 1, 2, 3;
  CHECK_THROWS_AS(ks_two_sample_bootstrap(a, VectorXd(), 200, rng), DataError);
  CHECK_THROWS_AS(ks_two_sample_bootstrap(a, a, 10, rng), ConfigError);
}

TEST_CASE("mmd basics") {
  Rng rng(3);
  SUBCASE("a sample against itself is zero") {
    MatrixXd x(6, 2);
    for (int i = 0; i < 12; ++i) x(i / 2, i % 2) = rng.normal();
    const MmdResult res = mmd_permutation_test(x, x, 99, rng);
    CHECK(std::abs(res.mmd) <= 1e-12);
  }
  SUBCASE("permutation p-value lower bound is exactly 1/(n_perm+1)") {
    MatrixXd x0(8, 1), x1(8, 1);
    for (int i = 0; i < 8; ++i) {
      x0(i, 0) = 0.01 * i;
      x1(i, 0) = 10.0 + 0.01 * i;  // far separated groups
    }
    const MmdResult res = mmd_permutation_test(x0, x1, 999, rng);
    CHECK(res.p_value == 1.0 / 1000.0);
  }
  SUBCASE("two-point hand-expanded kernel sum") {
    MatrixXd x0(2, 1), x1(2, 1);
    x0 << 0.0, 1.0;
    x1 << 0.5, 2.0;
    auto k = [](double u, double v) { return std::exp(-(u - v) * (u - v)); };
    const double s00 = (2.0 + 2.0 * k(0, 1)) / 4.0;
    const double s11 = (2.0 + 2.0 * k(0.5, 2)) / 4.0;
    const double s01 =
        (k(0, 0.5) + k(0, 2) + k(1, 0.5) + k(1, 2)) / 4.0;
    const MmdResult res = mmd_permutation_test(x0, x1, 99, rng);
    CHECK(res.mmd == doctest::Approx(s00 + s11 - 2.0 * s01).epsilon(1e-12));
  }
  SUBCASE("statistic is symmetric under group exchange") {
    MatrixXd x0(5, 2), x1(7, 2);
    for (int i = 0; i < 10; ++i) x0(i / 2, i % 2) = rng.normal();
    for (int i = 0; i < 14; ++i) x1(i / 2, i % 2) = 0.4 + rng.normal();
    Rng r1(9), r2(9);
    const MmdResult a = mmd_permutation_test(x0, x1, 59, r1);
    const MmdResult b = mmd_permutation_test(x1, x0, 59, r2);
    CHECK(a.mmd == doctest::Approx(b.mmd).epsilon(1e-12));
    CHECK(a.mmd >= 0.0);
    CHECK(a.p_value > 0.0);
    CHECK(a.p_value <= 1.0);
  }
  SUBCASE("column mismatch is a configuration error") {
    CHECK_THROWS_AS(
        mmd_permutation_test(MatrixXd::Ones(3, 2), MatrixXd::Ones(3, 1), 10,
                             rng),
        ConfigError);
  }
}
