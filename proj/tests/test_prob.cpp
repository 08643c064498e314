#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "prob.hpp"
#include "rng.hpp"
#include "test_support.hpp"

using namespace binf;
using testsup::oracle_cond_entropy;
using testsup::oracle_entropy;
using testsup::oracle_mi;
using testsup::random_raw_joint;
using testsup::to_joint;

namespace {

const Alphabet kBit{"b", 2};

Pmf uniform(const Alphabet& a) {
  return Pmf(a, std::vector<double>(static_cast<std::size_t>(a.size), 1.0 / a.size));
}

}  // namespace

TEST_CASE("pmf validation") {
  CHECK_NOTHROW(Pmf(kBit, {0.25, 0.75}));
  CHECK_THROWS_AS(Pmf(kBit, {0.3, 0.6}), Error);          // mass 0.9
  CHECK_THROWS_AS(Pmf(kBit, {-0.1, 1.1}), Error);         // negative weight
  CHECK_THROWS_AS(Pmf(kBit, {0.5, 0.25, 0.25}), Error);   // size mismatch
  CHECK_THROWS_AS(Pmf({"e", 0}, {}), Error);              // empty alphabet
  // inputs outside tolerance are rejected, not renormalized
  CHECK_THROWS_AS(Pmf(kBit, {0.5 + 2e-9, 0.5}), Error);
  CHECK_NOTHROW(Pmf(kBit, {0.5 + 2e-10, 0.5 - 2e-10}));
}

TEST_CASE("conditional rows validated individually") {
  CHECK_NOTHROW(ConditionalPmf({kBit}, kBit, {1, 0, 0.5, 0.5}));
  CHECK_THROWS_AS(ConditionalPmf({kBit}, kBit, {1, 0, 0.4, 0.5}), Error);
}

TEST_CASE("compose: product of independent uniforms") {
  Pmf a = uniform(kBit), b = uniform(kBit);
  JointPmf j = compose_joint({{&a, nullptr, {}, 0}, {&b, nullptr, {}, 1}});
  REQUIRE(j.cell_count() == 4);
  for (double w : j.weights()) CHECK(w == doctest::Approx(0.25));
}

TEST_CASE("compose: deterministic row supports 3 cells") {
  Alphabet tern{"s", 3};
  Pmf ps = uniform(tern);
  // x = s mod 2
  ConditionalPmf px({tern}, kBit, {1, 0, 0, 1, 1, 0});
  JointPmf j = compose_joint({{&ps, nullptr, {}, 0}, {nullptr, &px, {0}, 1}});
  int support = 0;
  for (double w : j.weights())
    if (w > 0) {
      ++support;
      CHECK(w == doctest::Approx(1.0 / 3));
    }
  CHECK(support == 3);
}

TEST_CASE("compose: state-relay factorization has product (s, xr) marginal") {
  // p_s * p_xr * p(x | xr, s) * p(y | x, xr, s) on binary alphabets; the
  // (S, Xr) marginal must equal the product of the inputs, checked cell by
  // cell with a direct summation oracle.
  RngStream rng(2024);
  Alphabet s{"s", 2}, xr{"xr", 2}, x{"x", 2}, y{"y", 2};
  auto rand_row = [&rng](int k) {
    std::vector<double> v(static_cast<std::size_t>(k));
    double t = 0;
    for (auto& e : v) {
      e = -std::log(std::max(rng.next_unit(), 1e-300));
      t += e;
    }
    for (auto& e : v) e /= t;
    return v;
  };
  Pmf ps(s, rand_row(2)), pxr(xr, rand_row(2));
  std::vector<double> xrows, yrows;
  for (int r = 0; r < 4; ++r)
    for (double v : rand_row(2)) xrows.push_back(v);
  for (int r = 0; r < 8; ++r)
    for (double v : rand_row(2)) yrows.push_back(v);
  ConditionalPmf px({xr, s}, x, xrows);
  ConditionalPmf py({x, xr, s}, y, yrows);
  JointPmf j = compose_joint({{&ps, nullptr, {}, 0},
                              {&pxr, nullptr, {}, 1},
                              {nullptr, &px, {1, 0}, 2},
                              {nullptr, &py, {2, 1, 0}, 3}});

  // oracle: brute-force marginalization over all cells
  double marg[2][2] = {{0, 0}, {0, 0}};
  auto w = j.weights();
  for (int cs = 0; cs < 2; ++cs)
    for (int cxr = 0; cxr < 2; ++cxr)
      for (int cx = 0; cx < 2; ++cx)
        for (int cy = 0; cy < 2; ++cy)
          marg[cs][cxr] += w[static_cast<std::size_t>(((cs * 2 + cxr) * 2 + cx) * 2 + cy)];
  for (int cs = 0; cs < 2; ++cs)
    for (int cxr = 0; cxr < 2; ++cxr)
      CHECK(marg[cs][cxr] == doctest::Approx(ps[cs] * pxr[cxr]).epsilon(1e-12));

  // and marginalize() recovers p_s within 1e-12
  JointPmf ms = marginalize(j, std::vector<int>{0});
  CHECK(std::abs(ms.weights()[0] - ps[0]) < 1e-12);
  CHECK(std::abs(ms.weights()[1] - ps[1]) < 1e-12);
}

TEST_CASE("compose error paths") {
  Pmf a = uniform(kBit);
  ConditionalPmf cond({kBit}, kBit, {1, 0, 0, 1});
  // axis produced twice
  CHECK_THROWS_AS(compose_joint({{&a, nullptr, {}, 0}, {&a, nullptr, {}, 0}}), Error);
  // cyclic wiring: x depends on y, y depends on x
  CHECK_THROWS_AS(compose_joint({{nullptr, &cond, {1}, 0}, {nullptr, &cond, {0}, 1}}), Error);
  // alphabet size mismatch on a given axis
  Alphabet tern{"t", 3};
  Pmf pt = uniform(tern);
  CHECK_THROWS_AS(compose_joint({{&pt, nullptr, {}, 0}, {nullptr, &cond, {0}, 1}}), Error);
  // uncovered axis
  CHECK_THROWS_AS(compose_joint({{&a, nullptr, {}, 1}}), Error);
}

TEST_CASE("marginalize examples and errors") {
  Pmf a = uniform(kBit), b = uniform(kBit);
  JointPmf j = compose_joint({{&a, nullptr, {}, 0}, {&b, nullptr, {}, 1}});
  JointPmf m = marginalize(j, std::vector<int>{0});
  CHECK(m.weights()[0] == doctest::Approx(0.5));

  JointPmf coupled({kBit, kBit}, {0.5, 0, 0, 0.5});
  for (int axis : {0, 1}) {
    JointPmf mm = marginalize(coupled, std::vector<int>{axis});
    CHECK(mm.weights()[0] == doctest::Approx(0.5));
    CHECK(mm.weights()[1] == doctest::Approx(0.5));
  }
  CHECK_THROWS_AS(marginalize(j, std::vector<int>{}), Error);
  CHECK_THROWS_AS(marginalize(j, std::vector<int>{2}), Error);
  CHECK_THROWS_AS(marginalize(j, std::vector<int>{0, 0}), Error);
}

TEST_CASE("entropy: frozen values") {
  JointPmf u({kBit}, {0.5, 0.5});
  CHECK(entropy(u, std::vector<int>{0}) == doctest::Approx(1.0).epsilon(1e-12));

  JointPmf point({kBit}, {1.0, 0.0});
  CHECK(entropy(point, std::vector<int>{0}) == doctest::Approx(0.0).epsilon(1e-12));

  // -0.2 log2 0.2 - 0.8 log2 0.8, frozen from a high-precision evaluation
  JointPmf skew({kBit}, {0.2, 0.8});
  CHECK(entropy(skew, std::vector<int>{0}) == doctest::Approx(0.7219280948873623).epsilon(1e-12));

  JointPmf pair({kBit, kBit}, {0.25, 0.25, 0.25, 0.25});
  CHECK_THROWS_AS(entropy(pair, std::vector<int>{0}, std::vector<int>{0}), Error);
}

TEST_CASE("mutual information: frozen values") {
  Pmf a = uniform(kBit), b = uniform(kBit);
  JointPmf indep = compose_joint({{&a, nullptr, {}, 0}, {&b, nullptr, {}, 1}});
  CHECK(mutual_information(indep, std::vector<int>{0}, std::vector<int>{1}) ==
        doctest::Approx(0.0).epsilon(1e-12));

  JointPmf ident({kBit, kBit}, {0.5, 0, 0, 0.5});
  CHECK(mutual_information(ident, std::vector<int>{0}, std::vector<int>{1}) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // binary symmetric coupling, crossover 0.1, uniform input: 1 - H2(0.1)
  JointPmf bsc({kBit, kBit}, {0.45, 0.05, 0.05, 0.45});
  CHECK(mutual_information(bsc, std::vector<int>{0}, std::vector<int>{1}) ==
        doctest::Approx(0.5310044064107188).epsilon(1e-10));

  CHECK_THROWS_AS(mutual_information(ident, std::vector<int>{}, std::vector<int>{1}), Error);
  CHECK_THROWS_AS(mutual_information(ident, std::vector<int>{0}, std::vector<int>{0}), Error);
}

TEST_CASE("random joints match the brute-force oracle within 1e-9") {
  RngStream rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    RngStream tr = rng.sub(static_cast<std::uint64_t>(trial));
    std::vector<int> dims;
    int n_axes = 2 + static_cast<int>(tr.next_below(2));
    for (int k = 0; k < n_axes; ++k) dims.push_back(2 + static_cast<int>(tr.next_below(3)));
    testsup::RawJoint raw = random_raw_joint(tr, dims);
    JointPmf j = to_joint(raw);

    // entropy of a random subset, conditioned on another disjoint subset
    std::vector<int> axes{0};
    std::vector<int> given;
    for (int k = 1; k < n_axes; ++k) (tr.next_below(2) ? axes : given).push_back(k);
    if (!given.empty()) {
      double mine = entropy(j, axes, given);
      CHECK(mine == doctest::Approx(oracle_cond_entropy(raw, axes, given)).epsilon(1e-9));
    }
    double h = entropy(j, axes);
    CHECK(h == doctest::Approx(oracle_entropy(raw, axes)).epsilon(1e-9));
    CHECK(h >= 0);

    double mi = mutual_information(j, std::vector<int>{0}, std::vector<int>{1});
    CHECK(mi == doctest::Approx(oracle_mi(raw, {0}, {1})).epsilon(1e-9));
    CHECK(mi >= 0);

    // chain rule: H(A,B) = H(A) + H(B|A)
    double lhs = entropy(j, std::vector<int>{0, 1});
    double rhs = entropy(j, std::vector<int>{0}) + entropy(j, std::vector<int>{1}, std::vector<int>{0});
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    // conditioning reduces entropy
    CHECK(entropy(j, std::vector<int>{0}, std::vector<int>{1}) <=
          entropy(j, std::vector<int>{0}) + 1e-9);
  }
}

TEST_CASE("compose then marginalize recovers factor marginals") {
  RngStream rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    RngStream tr = rng.sub(static_cast<std::uint64_t>(trial));
    Alphabet a{"a", 2 + static_cast<int>(tr.next_below(3))};
    Alphabet b{"b", 2 + static_cast<int>(tr.next_below(3))};
    std::vector<double> pa(static_cast<std::size_t>(a.size)), rows;
    double t = 0;
    for (auto& v : pa) {
      v = -std::log(std::max(tr.next_unit(), 1e-300));
      t += v;
    }
    for (auto& v : pa) v /= t;
    for (int r = 0; r < a.size; ++r) {
      std::vector<double> row(static_cast<std::size_t>(b.size));
      double rt = 0;
      for (auto& v : row) {
        v = -std::log(std::max(tr.next_unit(), 1e-300));
        rt += v;
      }
      for (auto& v : row) rows.push_back(v / rt);
    }
    Pmf fa(a, pa);
    ConditionalPmf fb({a}, b, rows);
    JointPmf j = compose_joint({{&fa, nullptr, {}, 0}, {nullptr, &fb, {0}, 1}});
    JointPmf ma = marginalize(j, std::vector<int>{0});
    for (int v = 0; v < a.size; ++v)
      CHECK(ma.weights()[static_cast<std::size_t>(v)] == doctest::Approx(fa[v]).epsilon(1e-9));
  }
}

TEST_CASE("dense cell cap enforced") {
  std::vector<Alphabet> axes(9, Alphabet{"big", 8});  // 8^9 > 1e7
  CHECK_THROWS_AS(JointPmf(axes, std::vector<double>{}), Error);
}
