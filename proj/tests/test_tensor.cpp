#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "timetk/error.hpp"
#include "timetk/ops.hpp"

using namespace timetk;

namespace {

Var param(Tensor t) { return Var(std::move(t), true); }

// Scalar loss sum(y * R) with a fixed random R, so every output coordinate matters.
Var project(const Var& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ops::sum(y * constant(oracle::random_tensor(y.shape(), rng)));
}

}  // namespace

TEST_SUITE("tensor-core") {
  TEST_CASE("tensor shape invariant") {
    Tensor t({2, 3}, 1.5);
    CHECK(t.numel() == 6);
    CHECK(t.at({1, 2}) == 1.5);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor({0, 2}), ShapeError);
    CHECK(Tensor::scalar(3.0).item() == 3.0);
  }

  TEST_CASE("matmul identity cases") {
    Var a = constant(Tensor({2, 2}, {1, 2, 3, 4}));
    Var eye = constant(Tensor({2, 2}, {1, 0, 0, 1}));
    CHECK(ops::matmul(a, eye).value().values() == std::vector<double>{1, 2, 3, 4});
    Var col = constant(Tensor({2, 1}, {5, 7}));
    CHECK(ops::matmul(eye, col).value().values() == std::vector<double>{5, 7});
  }

  TEST_CASE("matmul matches triple loop") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 10; ++trial) {
      Tensor a = oracle::random_tensor({3, 4}, rng);
      Tensor b = oracle::random_tensor({4, 2}, rng);
      auto expected = oracle::matmul(oracle::to_vec(a), oracle::to_vec(b), 3, 4, 2);
      Tensor got = ops::matmul(constant(a), constant(b)).value();
      for (std::size_t i = 0; i < expected.size(); ++i) CHECK(std::abs(got[i] - expected[i]) <= 1e-12);
    }
  }

  TEST_CASE("matmul broadcasts batch dims") {
    std::mt19937_64 rng(8);
    Tensor a = oracle::random_tensor({2, 3, 4}, rng);
    Tensor b = oracle::random_tensor({4, 5}, rng);
    Tensor got = ops::matmul(constant(a), constant(b)).value();
    REQUIRE(got.shape() == Shape{2, 3, 5});
    for (std::size_t bi = 0; bi < 2; ++bi) {
      oracle::Vec slab(a.data().begin() + bi * 12, a.data().begin() + (bi + 1) * 12);
      auto expected = oracle::matmul(slab, oracle::to_vec(b), 3, 4, 5);
      for (std::size_t i = 0; i < 15; ++i) CHECK(std::abs(got[bi * 15 + i] - expected[i]) <= 1e-12);
    }
  }

  TEST_CASE("matmul shape errors name both shapes") {
    Var a = constant(Tensor({2, 3}));
    Var b = constant(Tensor({4, 2}));
    try {
      ops::matmul(a, b);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2,3]") != std::string::npos);
      CHECK(msg.find("[4,2]") != std::string::npos);
    }
  }

  TEST_CASE("softmax examples") {
    auto s = ops::softmax(constant(Tensor({2}, {0, 0})), 0).value();
    CHECK(s[0] == doctest::Approx(0.5));
    CHECK(s[1] == doctest::Approx(0.5));
    auto big = ops::softmax(constant(Tensor({3}, {1000, 1000, 1000})), 0).value();
    for (double v : big.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    auto ln3 = ops::softmax(constant(Tensor({2}, {0, std::log(3.0)})), 0).value();
    CHECK(std::abs(ln3[0] - 0.25) < 1e-12);
    CHECK(std::abs(ln3[1] - 0.75) < 1e-12);
  }

  TEST_CASE("softmax slices are distributions along any axis") {
    std::mt19937_64 rng(11);
    Tensor x = oracle::random_tensor({3, 4, 5}, rng, 5.0);
    for (int axis : {0, 1, 2}) {
      Tensor y = ops::softmax(constant(x), axis).value();
      const Shape& s = y.shape();
      for (std::size_t i = 0; i < s[0]; ++i)
        for (std::size_t j = 0; j < s[1]; ++j)
          for (std::size_t k = 0; k < s[2]; ++k) CHECK(y.at({i, j, k}) >= 0.0);
      Tensor sums = ops::sum_axis(constant(y), axis).value();
      for (double v : sums.data()) CHECK(std::abs(v - 1.0) <= 1e-9);
    }
  }

  TEST_CASE("backward on sum of squares") {
    Var x = param(Tensor({2}, {1, 2}));
    backward(ops::sum(ops::square(x)));
    CHECK(x.grad().values() == std::vector<double>{2, 4});
  }

  TEST_CASE("constant loss leaves grads at zero") {
    Var x = param(Tensor({3}, {1, 2, 3}));
    Var loss = ops::sum(x * 0.0) + 5.0;
    backward(loss);
    for (double g : x.grad().data()) CHECK(g == 0.0);
    Var unrelated = param(Tensor({2}, 1.0));
    backward(constant(Tensor::scalar(3.0)));
    for (double g : unrelated.grad().data()) CHECK(g == 0.0);
  }

  TEST_CASE("backward requires a scalar") {
    Var x = param(Tensor({2}, {1, 2}));
    CHECK_THROWS_AS(backward(ops::square(x)), ShapeError);
  }

  TEST_CASE("backward visits shared subgraphs once") {
    Var x = param(Tensor({1}, {3}));
    Var y = ops::square(x);       // 9, dy/dx = 6
    Var z = y + y + y;            // 3y
    backward(ops::sum(z));
    CHECK(x.grad()[0] == doctest::Approx(18.0));
  }

  TEST_CASE("composite MLP gradients match finite differences") {
    std::mt19937_64 rng(2024);
    for (int seed = 0; seed < 20; ++seed) {
      Tensor xin = oracle::random_tensor({4, 3}, rng);
      ParameterList params = {make_parameter("w1", oracle::random_tensor({3, 5}, rng)),
                              make_parameter("b1", oracle::random_tensor({5}, rng)),
                              make_parameter("w2", oracle::random_tensor({5, 2}, rng)),
                              make_parameter("b2", oracle::random_tensor({2}, rng))};
      Tensor target = oracle::random_tensor({4, 2}, rng);
      auto loss = [&] {
        Var h = ops::gelu(ops::matmul(constant(xin), params[0].var) + params[1].var);
        Var y = ops::matmul(h, params[2].var) + params[3].var;
        return ops::mean(ops::square(y - constant(target)));
      };
      CHECK(oracle::finite_difference_error(params, loss) < 1e-4);
    }
  }

  TEST_CASE("every elementwise and structural op passes a gradient check") {
    std::mt19937_64 rng(99);
    for (int seed = 0; seed < 20; ++seed) {
      ParameterList p = {make_parameter("a", oracle::random_tensor({2, 3, 4}, rng)),
                         make_parameter("b", oracle::random_tensor({3, 4}, rng)),
                         make_parameter("c", oracle::random_tensor({2, 4, 3}, rng))};
      // Keep the divisor away from zero.
      Var c_pos = p[2].var;
      for (auto& v : c_pos.mutable_value().data()) v = 1.5 + std::abs(v);
      const std::uint64_t proj = static_cast<std::uint64_t>(seed);
      std::vector<std::function<Var()>> losses = {
          [&] { return project(p[0].var + p[1].var, proj); },
          [&] { return project(p[0].var - p[1].var, proj); },
          [&] { return project(p[0].var * p[1].var, proj); },
          [&] { return project(p[1].var / ops::transpose(p[2].var, 1, 2), proj); },
          [&] { return project(ops::exp(p[0].var * 0.5), proj); },
          [&] { return project(ops::square(p[0].var), proj); },
          [&] { return project(ops::sqrt(p[2].var), proj); },
          [&] { return project(ops::gelu(p[0].var), proj); },
          [&] { return ops::mean(ops::square(p[0].var)); },
          [&] { return project(ops::sum_axis(p[0].var, 1), proj); },
          [&] { return project(ops::mean_axis(p[0].var, -1, true), proj); },
          [&] { return project(ops::matmul(p[0].var, p[2].var), proj); },
          [&] { return project(ops::permute(p[0].var, {2, 0, 1}), proj); },
          [&] { return project(ops::reshape(p[0].var, {6, 4}), proj); },
          [&] { return project(ops::concat({p[0].var, ops::transpose(p[2].var, 1, 2)}, 1), proj); },
          [&] { return project(ops::slice_strided(p[0].var, 2, 1, 2), proj); },
          [&] { return project(ops::softmax(p[0].var, -1), proj); },
          [&] {
            Var g = ops::slice_strided(p[1].var, 0, 0, 1, 1);
            return project(ops::layer_norm(p[0].var, ops::reshape(g, {4}), ops::reshape(ops::slice_strided(p[1].var, 0, 1, 1, 1), {4})), proj);
          },
      };
      for (std::size_t i = 0; i < losses.size(); ++i) {
        CAPTURE(i);
        CHECK(oracle::finite_difference_error(p, losses[i]) < 1e-4);
      }
    }
  }

  TEST_CASE("elementwise suite examples") {
    CHECK(ops::exp(constant(Tensor::scalar(0.0))).value().item() == 1.0);
    Tensor seq({8}, {0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(ops::slice_strided(constant(seq), 0, 1, 2).value().values() == std::vector<double>{1, 3, 5, 7});
    CHECK(ops::slice_strided(constant(seq), 0, 2, 3, 2).value().values() == std::vector<double>{2, 5});
  }

  TEST_CASE("slice errors") {
    Var x = constant(Tensor({8}));
    CHECK_THROWS_AS(ops::slice_strided(x, 0, 0, 0), ShapeError);
    CHECK_THROWS_AS(ops::slice_strided(x, 0, 8, 1), ShapeError);
    CHECK_THROWS_AS(ops::slice_strided(x, 0, 1, 2, 5), ShapeError);
    CHECK_THROWS_AS(ops::slice_strided(x, 1, 0, 1), ShapeError);
  }

  TEST_CASE("concat then slice recovers every part") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> dim(1, 4);
    for (int trial = 0; trial < 50; ++trial) {
      Shape base{dim(rng), dim(rng), dim(rng)};
      const int axis = static_cast<int>(trial % 3);
      std::vector<Var> parts;
      for (int i = 0; i < 3; ++i) {
        Shape s = base;
        s[axis] = dim(rng);
        parts.push_back(constant(oracle::random_tensor(s, rng)));
      }
      Var joined = ops::concat(parts, axis);
      std::size_t offset = 0;
      for (const auto& part : parts) {
        const std::size_t len = part.shape()[axis];
        CHECK(ops::slice_strided(joined, axis, offset, 1, len).value().values() == part.value().values());
        offset += len;
      }
    }
  }

  TEST_CASE("reshape and transpose round trips are bit exact") {
    std::mt19937_64 rng(3);
    Tensor x = oracle::random_tensor({2, 3, 4}, rng);
    Var v = constant(x);
    CHECK(ops::reshape(ops::reshape(v, {4, 6}), {2, 3, 4}).value().values() == x.values());
    CHECK(ops::transpose(ops::transpose(v, 0, 2), 0, 2).value().values() == x.values());
    CHECK(ops::transpose(v, 1, 2).value().shape() == Shape{2, 4, 3});
  }

  TEST_CASE("broadcasting rules") {
    CHECK(ops::broadcast_shape({2, 1, 4}, {3, 1}) == Shape{2, 3, 4});
    CHECK_THROWS_AS(ops::broadcast_shape({2, 3}, {4}), ShapeError);
    Var a = constant(Tensor({2, 1}, {1, 2}));
    Var b = constant(Tensor({3}, {10, 20, 30}));
    CHECK((a + b).value().values() == std::vector<double>{11, 21, 31, 12, 22, 32});
  }

  TEST_CASE("non-finite results raise immediately") {
    CHECK_THROWS_AS(ops::exp(constant(Tensor::scalar(1000.0))), NumericError);
    CHECK_THROWS_AS(ops::div(constant(Tensor::scalar(1.0)), constant(Tensor::scalar(0.0))), NumericError);
    CHECK_THROWS_AS(ops::sqrt(constant(Tensor::scalar(-1.0))), NumericError);
  }

  TEST_CASE("no-grad mode records no graph") {
    Var x = param(Tensor({2}, 1.0));
    NoGradGuard guard;
    Var y = ops::square(x);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->parents.empty());
  }

  TEST_CASE("parameter names must be unique") {
    ParameterList ps = {make_parameter("a", Tensor({1})), make_parameter("a", Tensor({1}))};
    CHECK_THROWS_AS(check_unique_names(ps), ConfigError);
    CHECK(count_scalars({make_parameter("x", Tensor({2, 3})), make_parameter("y", Tensor({4}), false)}) == 6);
  }
}
