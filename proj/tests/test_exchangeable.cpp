#include "wfdual/exchangeable.hpp"

#include "wfdual/chains.hpp"
#include "oracle_helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

using namespace wfdual;
using exchangeable::MergerPattern;
using exchangeable::ReproductionLaw;

TEST_CASE("dirichlet-binomial forward entries") {
  SECTION("theta = 1, n = 2, k = 1 -> uniform row") {
    CHECK(exchangeable::dirichlet_forward_entry<Rational>(2, Rational(1), 1, 1) == Rational(1, 3));
    CHECK(exchangeable::dirichlet_forward_entry<Rational>(2, Rational(1), 1, 0) == Rational(1, 3));
    CHECK(exchangeable::dirichlet_forward_entry<Rational>(2, Rational(1), 1, 2) == Rational(1, 3));
  }
  SECTION("boundary rows are point masses") {
    for (int kp = 0; kp <= 5; ++kp) {
      CHECK(exchangeable::dirichlet_forward_entry<Rational>(5, Rational(2), 0, kp) ==
            Rational(kp == 0 ? 1 : 0));
      CHECK(exchangeable::dirichlet_forward_entry<Rational>(5, Rational(2), 5, kp) ==
            Rational(kp == 5 ? 1 : 0));
    }
  }
  SECTION("rows sum to one exactly (Vandermonde)") {
    for (const Rational& theta : {Rational(1, 2), Rational(1), Rational(2)}) {
      const int n = 8;
      for (int k = 0; k <= n; ++k) {
        Rational sum(0);
        for (int kp = 0; kp <= n; ++kp)
          sum += exchangeable::dirichlet_forward_entry<Rational>(n, theta, k, kp);
        REQUIRE(sum == 1);
      }
    }
  }
  SECTION("large theta approaches the Wright-Fisher binomial row") {
    const int n = 6, k = 2;
    auto wf = ReproductionLaw::wright_fisher();
    for (int kp = 0; kp <= n; ++kp) {
      const Float128 dir =
          exchangeable::dirichlet_forward_entry<Float128>(n, Rational(1000000), k, kp);
      const Float128 bin = exchangeable::law_forward_entry<Float128>(wf, n, k, kp);
      REQUIRE(abs_value<Float128>(dir - bin) < Float128(1e-4));
    }
  }
  SECTION("theta <= 0 rejected") {
    CHECK_THROWS_AS(exchangeable::dirichlet_forward_entry<Rational>(4, Rational(0), 1, 1),
                    ConfigError);
  }
}

TEST_CASE("merger probabilities") {
  SECTION("Wright-Fisher pair merger at n=4: (n)_1/n^2") {
    auto p = exchangeable::merger_probability<Rational>(ReproductionLaw::wright_fisher(), 4,
                                                        MergerPattern::of({2}));
    CHECK(p == Rational(1, 4));
  }
  SECTION("Dirichlet pair merger: n [theta]_2 / [n theta]_2") {
    const Rational theta(2);
    const int n = 5;
    auto p = exchangeable::merger_probability<Rational>(
        ReproductionLaw::dirichlet_multinomial(theta), n, MergerPattern::of({2}));
    CHECK(p == Rational(n) * theta * (theta + 1) / (Rational(n) * theta * (Rational(n) * theta + 1)));
  }
  SECTION("no-merger pattern: all children have distinct parents") {
    const int n = 6, b = 3;
    auto p = exchangeable::merger_probability<Rational>(ReproductionLaw::wright_fisher(), n,
                                                        MergerPattern::of({1, 1, 1}));
    BigInt npow(1);
    for (int e = 0; e < b; ++e) npow *= n;
    CHECK(p == Rational(falling_factorial(n, b), npow));
  }
  SECTION("cluster order never matters") {
    for (const auto& law :
         {ReproductionLaw::wright_fisher(), ReproductionLaw::dirichlet_multinomial(Rational(1, 2)),
          ReproductionLaw::moran()}) {
      std::vector<int> clusters{2, 1, 1};
      std::sort(clusters.begin(), clusters.end());
      const int n = 6;
      Rational first(-1);
      do {
        auto p = exchangeable::merger_probability<Rational>(law, n, MergerPattern::of(clusters));
        if (first < 0)
          first = p;
        else
          REQUIRE(p == first);
      } while (std::next_permutation(clusters.begin(), clusters.end()));
    }
  }
  SECTION("Moran: only one binary merger is possible") {
    const int n = 5;
    auto law = ReproductionLaw::moran();
    CHECK(exchangeable::merger_probability<Rational>(law, n, MergerPattern::of({3})) == 0);
    CHECK(exchangeable::merger_probability<Rational>(law, n, MergerPattern::of({2, 2})) == 0);
    CHECK(exchangeable::merger_probability<Rational>(law, n, MergerPattern::of({2})) > 0);
  }
}

TEST_CASE("ancestral count matrix") {
  SECTION("WF n = 2: P(2,1) = P(2,2) = 1/2") {
    auto P = exchangeable::ancestral_count_matrix<Rational>(ReproductionLaw::wright_fisher(), 2, 2);
    CHECK(P(2, 1) == Rational(1, 2));
    CHECK(P(2, 2) == Rational(1, 2));
    CHECK(P(1, 1) == 1);
    CHECK(P(0, 0) == 1);
  }
  SECTION("WF n = 3 bottom row (1/9, 6/9, 2/9)") {
    auto P = exchangeable::ancestral_count_matrix<Rational>(ReproductionLaw::wright_fisher(), 3, 3);
    CHECK(P(3, 0) == 0);
    CHECK(P(3, 1) == Rational(1, 9));
    CHECK(P(3, 2) == Rational(6, 9));
    CHECK(P(3, 3) == Rational(2, 9));
  }
  SECTION("rows are stochastic for every law") {
    for (const auto& law :
         {ReproductionLaw::wright_fisher(), ReproductionLaw::dirichlet_multinomial(Rational(2)),
          ReproductionLaw::moran()}) {
      auto P = exchangeable::ancestral_count_matrix<Rational>(law, 7, 6);
      for (int b = 0; b <= 6; ++b) {
        Rational sum(0);
        for (int a = 0; a <= 6; ++a) sum += P(b, a);
        REQUIRE(sum == 1);
      }
    }
  }
  SECTION("WF ancestral counts coincide with the neutral dual rows") {
    for (int n : {4, 7, 10}) {
      const int m_max = std::min(n, 8);
      auto P = exchangeable::ancestral_count_matrix<Rational>(ReproductionLaw::wright_fisher(), n,
                                                              m_max);
      auto D = chains::dual_matrix<Rational>(bias::BiasMechanism::neutral(), n);
      for (int b = 0; b <= m_max; ++b)
        for (int a = 0; a <= m_max; ++a) REQUIRE(P(b, a) == D.entries(b, a));
    }
  }
}

TEST_CASE("inclusion-exclusion agrees with the composition sum") {
  std::vector<ReproductionLaw> laws{
      ReproductionLaw::wright_fisher(),
      ReproductionLaw::dirichlet_multinomial(Rational(1)),
      ReproductionLaw::dirichlet_multinomial(Rational(2)),
      ReproductionLaw::dirichlet_multinomial(Rational(1, 2)),
      ReproductionLaw::moran(),
  };
  const int n = 8;
  for (const auto& law : laws) {
    for (int b = 0; b <= 8; ++b)
      for (int a = 0; a <= b; ++a) {
        const Rational lhs = exchangeable::ancestral_count_entry<Rational>(law, n, b, a);
        const Rational rhs = exchangeable::ancestral_count_inclusion_exclusion<Rational>(law, n, b, a);
        REQUIRE(lhs == rhs);
      }
  }
  SECTION("a = 0 is impossible for live samples") {
    CHECK(exchangeable::ancestral_count_inclusion_exclusion<Rational>(
              ReproductionLaw::wright_fisher(), 5, 3, 0) == 0);
  }
  SECTION("frozen Dirichlet value: theta=1, n=3, pair merger 1/2") {
    CHECK(exchangeable::ancestral_count_inclusion_exclusion<Rational>(
              ReproductionLaw::dirichlet_multinomial(Rational(1)), 3, 2, 1) == Rational(1, 2));
  }
}

TEST_CASE("reproduction sampling") {
  SECTION("moran draws are a permutation of (2,0,1,...,1)") {
    mc::PhiloxRng rng(11, 0);
    for (int trial = 0; trial < 200; ++trial) {
      auto nu = exchangeable::sample_reproduction(ReproductionLaw::moran(), 6, rng);
      int twos = 0, zeros = 0, ones = 0, sum = 0;
      for (int x : nu) {
        sum += x;
        twos += (x == 2);
        zeros += (x == 0);
        ones += (x == 1);
      }
      REQUIRE(sum == 6);
      REQUIRE(twos == 1);
      REQUIRE(zeros == 1);
      REQUIRE(ones == 4);
    }
  }
  SECTION("offspring vectors conserve the population for every law") {
    for (const auto& law :
         {ReproductionLaw::wright_fisher(), ReproductionLaw::dirichlet_multinomial(Rational(1))}) {
      mc::PhiloxRng rng(12, 7);
      for (int trial = 0; trial < 200; ++trial) {
        auto nu = exchangeable::sample_reproduction(law, 9, rng);
        int sum = 0;
        for (int x : nu) {
          REQUIRE(x >= 0);
          sum += x;
        }
        REQUIRE(sum == 9);
      }
    }
  }
  SECTION("WF mean offspring is 1 within 3 sigma") {
    const int n = 8;
    const long draws = 100000;
    double sum = 0;
    for (long i = 0; i < draws; ++i) {
      mc::PhiloxRng rng(99, static_cast<std::uint64_t>(i));
      sum += exchangeable::sample_reproduction(ReproductionLaw::wright_fisher(), n, rng)[0];
    }
    const double mean = sum / draws;
    // Var(nu_1) = (n-1)/n for multinomial(n; 1/n)
    const double se = std::sqrt((n - 1.0) / n / draws);
    REQUIRE(std::abs(mean - 1.0) < 3 * se);
  }
  SECTION("Dirichlet empirical pair-merger frequency matches the closed form") {
    const int n = 6;
    const Rational theta(1);
    auto law = ReproductionLaw::dirichlet_multinomial(theta);
    const double target = scalar_traits<Rational>::to_double(
        exchangeable::merger_probability<Rational>(law, n, MergerPattern::of({2})));
    const long draws = 60000;
    double sum = 0, sumsq = 0;
    for (long i = 0; i < draws; ++i) {
      mc::PhiloxRng rng(123, static_cast<std::uint64_t>(i));
      auto nu = exchangeable::sample_reproduction(law, n, rng);
      double same = 0;
      for (int x : nu) same += static_cast<double>(x) * (x - 1);
      same /= static_cast<double>(n) * (n - 1);
      sum += same;
      sumsq += same * same;
    }
    const double mean = sum / draws;
    const double var = sumsq / draws - mean * mean;
    const double se = std::sqrt(var / draws);
    REQUIRE(std::abs(mean - target) < 3 * se);
  }
}
