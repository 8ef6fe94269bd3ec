#include <random>

#include "doctest.h"
#include "drivelang/assignment.hpp"
#include "support/oracles.hpp"

using namespace drivelang;

TEST_CASE("hungarian on small fixed matrices") {
  SUBCASE("2x2 diagonal") {
    const Assignment a = hungarian({{0.0, 1.0}, {1.0, 0.0}});
    CHECK(a.total_cost == 0.0);
    REQUIRE(a.pairs.size() == 2);
    CHECK(a.pairs[0] == std::pair<std::size_t, std::size_t>{0, 0});
    CHECK(a.pairs[1] == std::pair<std::size_t, std::size_t>{1, 1});
  }
  SUBCASE("3x3 with cost 5") {
    const Assignment a = hungarian({{4.0, 1.0, 3.0}, {2.0, 0.0, 5.0}, {3.0, 2.0, 2.0}});
    CHECK(a.total_cost == 5.0);
    REQUIRE(a.pairs.size() == 3);
    CHECK(a.pairs[0] == std::pair<std::size_t, std::size_t>{0, 1});
    CHECK(a.pairs[1] == std::pair<std::size_t, std::size_t>{1, 0});
    CHECK(a.pairs[2] == std::pair<std::size_t, std::size_t>{2, 2});
  }
  SUBCASE("1x2 rectangular") {
    const Assignment a = hungarian({{3.0, 1.0}});
    CHECK(a.total_cost == 1.0);
    REQUIRE(a.pairs.size() == 1);
    CHECK(a.pairs[0] == std::pair<std::size_t, std::size_t>{0, 1});
  }
  SUBCASE("empty dimensions") {
    CHECK(hungarian(CostMatrix(0, 3)).pairs.empty());
    CHECK(hungarian(CostMatrix(3, 0)).pairs.empty());
  }
}

TEST_CASE("non-finite entries are rejected") {
  CostMatrix m(1, 1);
  m.at(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(hungarian(m), ValidationError);
  m.at(0, 0) = std::nan("");
  CHECK_THROWS_AS(hungarian(m), ValidationError);
}

TEST_CASE("optimality matches brute force on random matrices") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> uval(-10.0, 10.0);
  std::uniform_int_distribution<std::size_t> udim(1, 7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = udim(rng);
    const std::size_t cols = udim(rng);
    std::vector<std::vector<double>> costs(rows, std::vector<double>(cols));
    for (auto& row : costs) {
      for (double& v : row) v = uval(rng);
    }
    const Assignment a = hungarian(costs);
    CHECK(a.pairs.size() == std::min(rows, cols));
    CHECK(a.total_cost == testing::brute_force_min_cost(costs));
  }
}

TEST_CASE("optimality on small integer matrices with many ties") {
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> uval(0, 3);
  std::uniform_int_distribution<std::size_t> udim(1, 6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = udim(rng);
    const std::size_t cols = udim(rng);
    std::vector<std::vector<double>> costs(rows, std::vector<double>(cols));
    for (auto& row : costs) {
      for (double& v : row) v = static_cast<double>(uval(rng));
    }
    const Assignment a = hungarian(costs);
    CHECK(a.total_cost == testing::brute_force_min_cost(costs));
  }
}

namespace {

// Lexicographically smallest optimal pair list by exhaustive search.
std::vector<std::pair<std::size_t, std::size_t>> brute_force_lex_optimum(
    const std::vector<std::vector<double>>& costs) {
  const std::size_t rows = costs.size();
  const std::size_t cols = costs[0].size();
  const std::size_t depth = std::min(rows, cols);
  const double best_cost = drivelang::testing::brute_force_min_cost(costs);
  std::vector<std::pair<std::size_t, std::size_t>> best;
  std::vector<std::pair<std::size_t, std::size_t>> current;
  std::vector<char> used(cols, 0);
  auto recurse = [&](auto&& self, std::size_t row, double acc) -> void {
    if (current.size() == depth) {
      if (std::abs(acc - best_cost) < 1e-9) {
        if (best.empty() || current < best) best = current;
      }
      return;
    }
    if (row >= rows) return;
    if (rows - row > depth - current.size()) self(self, row + 1, acc);
    for (std::size_t c = 0; c < cols; ++c) {
      if (used[c]) continue;
      used[c] = 1;
      current.emplace_back(row, c);
      self(self, row + 1, acc + costs[row][c]);
      current.pop_back();
      used[c] = 0;
    }
  };
  recurse(recurse, 0, 0.0);
  return best;
}

}  // namespace

TEST_CASE("ties resolve to the lexicographically smallest pair list") {
  SUBCASE("all-zero matrix picks the identity") {
    const Assignment a = hungarian({{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}});
    REQUIRE(a.pairs.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(a.pairs[i] == std::pair<std::size_t, std::size_t>{i, i});
    }
  }
  SUBCASE("extra zero-cost rows prefer earlier rows") {
    const std::vector<std::vector<double>> costs = {{0.0}, {0.0}, {0.0}};
    const Assignment a = hungarian(costs);
    REQUIRE(a.pairs.size() == 1);
    CHECK(a.pairs[0] == std::pair<std::size_t, std::size_t>{0, 0});
  }
  SUBCASE("randomized integer matrices match exhaustive lex search") {
    std::mt19937_64 rng(103);
    std::uniform_int_distribution<int> uval(0, 2);
    std::uniform_int_distribution<std::size_t> udim(1, 5);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t rows = udim(rng);
      const std::size_t cols = udim(rng);
      std::vector<std::vector<double>> costs(rows, std::vector<double>(cols));
      for (auto& row : costs) {
        for (double& v : row) v = static_cast<double>(uval(rng));
      }
      const Assignment a = hungarian(costs);
      CHECK(a.pairs == brute_force_lex_optimum(costs));
    }
  }
}

TEST_CASE("row permutation permutes a unique-optimum matching") {
  std::mt19937_64 rng(104);
  std::uniform_real_distribution<double> uval(0.0, 100.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5;
    std::vector<std::vector<double>> costs(n, std::vector<double>(n));
    for (auto& row : costs) {
      for (double& v : row) v = uval(rng);
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<double>> permuted(n);
    for (std::size_t i = 0; i < n; ++i) permuted[i] = costs[perm[i]];

    const Assignment base = hungarian(costs);
    const Assignment shuffled = hungarian(permuted);
    CHECK(base.total_cost == doctest::Approx(shuffled.total_cost).epsilon(1e-12));
    std::vector<std::size_t> base_col(n), shuffled_col(n);
    for (const auto& [r, c] : base.pairs) base_col[r] = c;
    for (const auto& [r, c] : shuffled.pairs) shuffled_col[r] = c;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(shuffled_col[i] == base_col[perm[i]]);
    }
  }
}

TEST_CASE("determinism: repeated runs return the identical matching") {
  std::mt19937_64 rng(105);
  std::uniform_int_distribution<int> uval(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> costs(6, std::vector<double>(6));
    for (auto& row : costs) {
      for (double& v : row) v = static_cast<double>(uval(rng));
    }
    const Assignment a = hungarian(costs);
    const Assignment b = hungarian(costs);
    CHECK(a.pairs == b.pairs);
    CHECK(a.total_cost == b.total_cost);
  }
}
