#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "relicd/metrics.hpp"

using namespace relicd;

namespace {

using Rng = std::mt19937_64;
using Pairs = std::vector<ScoredPair>;

struct Brute {
  double acc, rmse, auc, ece, mce;
};

// explicit loops, bins found by scanning edges
Brute brute_force(const Pairs& p, std::size_t m) {
  Brute b{};
  double correct = 0, se = 0;
  for (const auto& x : p) {
    const int pred = x.prob >= 0.5 ? 1 : 0;
    if (pred == x.label) correct += 1;
    se += (x.prob - x.label) * (x.prob - x.label);
  }
  b.acc = correct / p.size();
  b.rmse = std::sqrt(se / p.size());
  double wins = 0, total = 0;
  for (const auto& a : p) {
    if (a.label != 1) continue;
    for (const auto& c : p) {
      if (c.label != 0) continue;
      total += 1;
      if (a.prob > c.prob) wins += 1;
      if (a.prob == c.prob) wins += 0.5;
    }
  }
  b.auc = wins / total;
  for (std::size_t n = 1; n <= m; ++n) {
    double cnt = 0, hit = 0, sum = 0;
    for (const auto& x : p) {
      const bool in = (x.prob > double(n - 1) / m && x.prob <= double(n) / m) || (n == 1 && x.prob == 0.0);
      if (!in) continue;
      cnt += 1;
      sum += x.prob;
      if ((x.prob >= 0.5 ? 1 : 0) == x.label) hit += 1;
    }
    if (cnt == 0) continue;
    const double gap = std::abs(hit / cnt - sum / cnt);
    b.ece += cnt / p.size() * gap;
    b.mce = std::max(b.mce, gap);
  }
  return b;
}

Pairs random_pairs(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Pairs p(n);
  for (auto& x : p) {
    // coarse grid so ties and exact bin edges occur
    x.prob = rng() % 3 == 0 ? std::round(u(rng) * 20) / 20 : u(rng);
    x.label = u(rng) < x.prob ? 1 : 0;
  }
  p[0].label = 1;
  p[1].label = 0;
  return p;
}


}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("accuracy") {
    CHECK(accuracy(Pairs{{0.9, 1}, {0.1, 0}}) == 1.0);
    CHECK(accuracy(Pairs{{0.5, 1}}) == 1.0);
    CHECK(accuracy(Pairs{{0.6, 0}, {0.6, 1}, {0.4, 0}, {0.9, 1}}) == 0.75);
    CHECK_THROWS_AS(accuracy(Pairs{}), std::invalid_argument);
  }

  TEST_CASE("rmse") {
    CHECK(rmse(Pairs{{1.0, 1}, {0.0, 0}}) == 0.0);
    CHECK(rmse(Pairs{{0.5, 1}, {0.5, 0}, {0.5, 0}}) == 0.5);
    CHECK(rmse(Pairs{{0.9, 1}, {0.7, 0}}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(rmse(Pairs{}), std::invalid_argument);
  }

  TEST_CASE("auc") {
    CHECK(auc(Pairs{{0.9, 1}, {0.1, 0}}) == 1.0);
    CHECK(auc(Pairs{{0.4, 1}, {0.4, 0}, {0.4, 1}}) == 0.5);
    CHECK(auc(Pairs{{0.8, 1}, {0.8, 0}, {0.3, 1}, {0.9, 0}}) == 0.125);
    CHECK_THROWS_AS(auc(Pairs{{0.4, 1}, {0.7, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(auc(Pairs{}), std::invalid_argument);
  }

  TEST_CASE("auc is invariant under increasing transforms") {
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
      auto p = random_pairs(200, rng);
      const double before = auc(p);
      for (auto& x : p) x.prob = std::pow(x.prob, 3.0) * 0.5 + 0.1;
      CHECK(auc(p) == doctest::Approx(before).epsilon(1e-12));
    }
  }

  TEST_CASE("calibration bins") {
    CHECK(calibration_bin(0.0, 10) == 0);
    CHECK(calibration_bin(0.1, 10) == 0);
    CHECK(calibration_bin(0.1000001, 10) == 1);
    CHECK(calibration_bin(1.0, 10) == 9);
    CHECK(calibration_bin(0.37, 1) == 0);
  }

  TEST_CASE("calibration examples") {
    const auto sharp = calibration(Pairs(50, {1.0 - 1e-9, 1}));
    CHECK(sharp.ece < 1e-8);
    CHECK(sharp.mce < 1e-8);

    const auto r = calibration(Pairs{{0.6, 1}, {0.8, 0}, {0.9, 1}, {0.95, 1}}, 10);
    CHECK(r.ece == doctest::Approx(0.3375).epsilon(1e-12));
    CHECK(r.mce == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(r.bins[5].count == 1);
    CHECK(r.bins[7].count == 1);
    CHECK(r.bins[8].count == 1);
    CHECK(r.bins[9].count == 1);
    CHECK(r.total == 4);

    Rng rng(2);
    const auto p = random_pairs(300, rng);
    const auto one = calibration(p, 1);
    double mean = 0;
    for (const auto& x : p) mean += x.prob;
    mean /= p.size();
    CHECK(one.ece == doctest::Approx(std::abs(accuracy(p) - mean)).epsilon(1e-12));
    CHECK(one.mce == one.ece);
  }

  TEST_CASE("reliability rows and csv") {
    const auto r = calibration(Pairs{{0.6, 1}, {0.8, 0}, {0.9, 1}, {0.95, 1}}, 10);
    const auto rows = reliability_rows(r);
    REQUIRE(rows.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(rows[i].bin == i + 1);
      CHECK(rows[i].lo == doctest::Approx(i / 10.0));
      CHECK(rows[i].hi == doctest::Approx((i + 1) / 10.0));
      if (rows[i].count > 0) CHECK(std::abs(rows[i].gap - std::abs(rows[i].accuracy - rows[i].avg_prob)) < 1e-12);
    }
    std::ostringstream out;
    write_reliability_csv(out, rows);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "bin,lo,hi,count,acc,avg_prob,gap");
    std::getline(in, line);
    CHECK(line == "1,0.000000,0.100000,0,,,");
    std::size_t n = 1;
    while (std::getline(in, line)) ++n;
    CHECK(n == 10);
  }

  TEST_CASE("metrics agree with brute force on random instances") {
    Rng rng(3);
    for (int t = 0; t < 500; ++t) {
      const auto p = random_pairs(2 + rng() % 60, rng);
      const std::size_t m = 1 + rng() % 15;
      const auto want = brute_force(p, m);
      const auto cal = calibration(p, m);
      CHECK(std::abs(accuracy(p) - want.acc) < 1e-10);
      CHECK(std::abs(rmse(p) - want.rmse) < 1e-10);
      CHECK(std::abs(auc(p) - want.auc) < 1e-10);
      CHECK(std::abs(cal.ece - want.ece) < 1e-10);
      CHECK(std::abs(cal.mce - want.mce) < 1e-10);
      CHECK(cal.ece <= cal.mce + 1e-15);
      std::size_t total = 0;
      for (const auto& b : cal.bins) total += b.count;
      CHECK(total == p.size());
    }
  }

  TEST_CASE("format_fixed") {
    CHECK(format_fixed(0.5, 6) == "0.500000");
    CHECK(format_fixed(1.0 / 3.0, 3) == "0.333");
  }
}
