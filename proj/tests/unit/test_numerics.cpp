#include <doctest.h>

#include <cmath>
#include <limits>

#include "relicd/errors.hpp"
#include "relicd/numerics.hpp"
#include "relicd/tape.hpp"

using namespace relicd;

TEST_SUITE("numerics") {
  TEST_CASE("xavier bound and range") {
    Rng rng(1);
    const auto w = xavier_init(3, 3, rng);
    CHECK(w.rows == 3);
    CHECK(w.cols == 3);
    for (double v : w.data) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
    CHECK(xavier_bound(100, 50) == doctest::Approx(std::sqrt(6.0 / 150.0)));
    CHECK(xavier_bound(100, 50) == doctest::Approx(0.2).epsilon(1e-9));
    const auto wide = xavier_init(100, 50, rng);
    CHECK(wide.rows == 50);
    CHECK(wide.cols == 100);
    for (double v : wide.data) CHECK(std::abs(v) <= 0.2 + 1e-12);
  }

  TEST_CASE("xavier moments match the uniform distribution") {
    Rng rng(2);
    double sum = 0, sq = 0;
    std::size_t n = 0;
    while (n < 100000) {
      const auto w = xavier_init(3, 3, rng);
      for (double v : w.data) {
        sum += v;
        sq += v * v;
        ++n;
      }
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(var == doctest::Approx(1.0 / 3.0).epsilon(0.1));
  }

  TEST_CASE("xavier is seed-deterministic and rejects zero fans") {
    Rng a(9), b(9);
    CHECK(xavier_init(4, 7, a) == xavier_init(4, 7, b));
    Rng c(9);
    CHECK_THROWS_AS(xavier_init(0, 3, c), std::invalid_argument);
    CHECK_THROWS_AS(xavier_init(3, 0, c), std::invalid_argument);
  }

  TEST_CASE("derive_seed separates streams") {
    CHECK(derive_seed(1, "init") == derive_seed(1, "init"));
    CHECK(derive_seed(1, "init") != derive_seed(1, "dropout"));
    CHECK(derive_seed(1, "init") != derive_seed(2, "init"));
  }

  TEST_CASE("adam: zero gradients leave parameters unchanged") {
    ParameterStore store;
    Matrix init(2, 3);
    for (std::size_t i = 0; i < init.size(); ++i) init.data[i] = 0.1 * i - 0.2;
    const auto id = store.add("w", init);
    adam_step(store, AdamConfig{});
    CHECK(store[id].value == init);
    CHECK(store.step() == 1);
  }

  TEST_CASE("adam: first step moves by the learning rate") {
    ParameterStore store;
    const auto id = store.add("w", Matrix(1, 1, 0.5));
    store[id].grad.data[0] = 1.0;
    AdamConfig cfg;
    adam_step(store, cfg);
    const double delta = 0.5 - store[id].value.data[0];
    CHECK(std::abs(delta - cfg.learning_rate) <= cfg.learning_rate * 1e-7);
    CHECK(store[id].grad.data[0] == 0.0);
  }

  TEST_CASE("adam: moment recursion over two steps") {
    ParameterStore store;
    const auto id = store.add("w", Matrix(1, 1, 0.0));
    AdamConfig cfg;
    const double g = 0.7;
    for (int i = 0; i < 2; ++i) {
      store[id].grad.data[0] = g;
      adam_step(store, cfg);
    }
    CHECK(store.step() == 2);
    const double v2 = cfg.beta2 * (1 - cfg.beta2) * g * g + (1 - cfg.beta2) * g * g;
    const double m2 = cfg.beta1 * (1 - cfg.beta1) * g + (1 - cfg.beta1) * g;
    CHECK(store[id].second_moment.data[0] == doctest::Approx(v2).epsilon(1e-14));
    CHECK(store[id].first_moment.data[0] == doctest::Approx(m2).epsilon(1e-14));
    store.reset_moments();
    CHECK(store.step() == 0);
    CHECK(store[id].first_moment.data[0] == 0.0);
  }

  TEST_CASE("adam: non-finite gradient aborts and names the parameter") {
    ParameterStore store;
    store.add("fine", Matrix(1, 2, 1.0));
    const auto bad = store.add("broken", Matrix(1, 2, 1.0));
    store[bad].grad.data[1] = std::numeric_limits<double>::quiet_NaN();
    try {
      adam_step(store, AdamConfig{});
      FAIL("expected NumericsError");
    } catch (const NumericsError& e) {
      CHECK(std::string(e.what()).find("broken") != std::string::npos);
    }
    CHECK(store.step() == 0);
    CHECK(store[bad].value.data[0] == 1.0);
  }

  TEST_CASE("adam config validation") {
    AdamConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.learning_rate = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.beta2 = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
  }

  TEST_CASE("parameter store naming") {
    ParameterStore store;
    store.add("a", Matrix(1, 1));
    CHECK_THROWS(store.add("a", Matrix(1, 1)));
    CHECK(store.find("a").has_value());
    CHECK_FALSE(store.find("b").has_value());
    CHECK_THROWS(store.id("b"));
  }

  TEST_CASE("stable sigmoid") {
    CHECK(stable_sigmoid(0.0) == 0.5);
    CHECK(stable_sigmoid(0.1) == doctest::Approx(0.52498).epsilon(1e-5));
    CHECK(stable_sigmoid(0.1) == doctest::Approx(1.0 / (1.0 + std::exp(-0.1))).epsilon(1e-15));
    for (double x : {0.3, 2.0, 17.0, 300.0, 1000.0}) {
      CHECK(std::abs(stable_sigmoid(x) + stable_sigmoid(-x) - 1.0) <= 1e-12);
      CHECK(std::isfinite(stable_sigmoid(x)));
      CHECK(std::isfinite(stable_sigmoid(-x)));
    }
    Rng rng(4);
    std::uniform_real_distribution<double> u(-40.0, 40.0);
    for (int i = 0; i < 1000; ++i) {
      double a = u(rng), b = u(rng);
      if (a > b) std::swap(a, b);
      if (a < b) CHECK(stable_sigmoid(a) <= stable_sigmoid(b));
    }
    CHECK(stable_sigmoid(-1.0) < stable_sigmoid(1.0));
  }

  TEST_CASE("grad_check on closed-form functions") {
    ParameterStore store;
    const auto w = store.add("w", Matrix(1, 1, 3.0));
    auto quad = [w](ParameterStore& s) {
      const double x = s[w].value.data[0];
      s[w].grad.data[0] += 2 * x;
      return x * x;
    };
    const auto r = grad_check(quad, store, 1e-5);
    CHECK(r.max_rel_error < 1e-9);
    CHECK(r.analytic == doctest::Approx(6.0));

    auto constant = [](ParameterStore&) { return 4.2; };
    const auto c = grad_check(constant, store, 1e-5);
    CHECK(c.max_rel_error == 0.0);

    auto wrong = [w](ParameterStore& s) {
      const double x = s[w].value.data[0];
      s[w].grad.data[0] += x;  // should be 2x
      return x * x;
    };
    const auto bad = grad_check(wrong, store, 1e-5);
    CHECK(bad.max_rel_error > 0.4);
    CHECK(bad.worst_parameter == "w");
    CHECK_THROWS_AS(grad_check(quad, store, 1e-2), std::invalid_argument);
  }

  TEST_CASE("grad_check reports divergence by parameter name") {
    ParameterStore store;
    const auto w = store.add("exploding", Matrix(1, 1, 0.0));
    auto f = [w](ParameterStore& s) {
      const double x = s[w].value.data[0];
      return x > 0 ? std::numeric_limits<double>::infinity() : x;
    };
    try {
      grad_check(f, store, 1e-5);
      FAIL("expected NumericsError");
    } catch (const NumericsError& e) {
      CHECK(std::string(e.what()).find("exploding") != std::string::npos);
    }
  }
}

TEST_SUITE("numerics") {
  // Each tape op against central differences through grad_check.
  TEST_CASE("tape operations pass grad_check") {
    Rng rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ParameterStore store;
    Matrix wm(3, 4), xm(2, 4), sm(1, 1);
    for (auto& v : wm.data) v = u(rng);
    for (auto& v : xm.data) v = u(rng);
    sm.data[0] = 0.4;
    const auto W = store.add("W", wm);
    const auto X = store.add("X", xm);
    const auto S = store.add("s", sm);
    Tape tape(store);
    auto f = [&](ParameterStore&) {
      tape.clear();
      const auto x0 = tape.row(X, 0);
      const auto x1 = tape.row(X, 1);
      const auto h = tape.sigmoid(tape.matvec(W, x0));
      const auto e = tape.exp(tape.mul(x1, tape.param(S)));
      const auto l = tape.log(tape.add(tape.square(x0), tape.constant(0.5)));
      const auto r = tape.relu(tape.sub(x1, tape.scale(x0, 0.5, 0.1)));
      const auto q = tape.sqrt(tape.add(tape.square(x1), tape.constant(1.0)));
      const auto out = tape.add(tape.add(tape.sum(h), tape.sum(tape.mul(e, l))),
                                tape.add(tape.sum(r), tape.add(tape.sum(q), tape.pick(h, 2))));
      tape.backward(out);
      return tape.scalar(out);
    };
    const auto r = grad_check(f, store, 1e-5);
    CHECK_MESSAGE(r.max_rel_error < 1e-6, r.worst_parameter);
  }

  TEST_CASE("tape log floors and exp clamps") {
    ParameterStore store;
    Tape tape(store);
    const auto l = tape.log(tape.constant(0.0));
    CHECK(tape.scalar(l) == doctest::Approx(std::log(Tape::kLogFloor)));
    const auto e = tape.exp(tape.constant(1000.0));
    CHECK(tape.scalar(e) == doctest::Approx(std::exp(Tape::kExpClamp)));
  }
}
