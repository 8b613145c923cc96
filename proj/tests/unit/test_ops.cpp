#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "ami/ops.hpp"
#include "ami/rng.hpp"

using namespace ami;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

// Central-difference check of an adjoint: loss = sum(cotangent * f(x)),
// so dloss/dx should equal the op's backward applied to the cotangent.
void check_adjoint(const Tensor& x, const Tensor& cotangent,
                   const std::function<Tensor(const Tensor&)>& f,
                   const Tensor& analytic, double h = 1e-5, double tol = 1e-7) {
  auto loss = [&](const Tensor& in) {
    const Tensor out = f(in);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += cotangent[i] * out[i];
    return s;
  };
  REQUIRE(analytic.size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor plus = x, minus = x;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (loss(plus) - loss(minus)) / (2.0 * h);
    CHECK(rel_err(fd, analytic[i]) < tol);
  }
}

}  // namespace

TEST_CASE("matmul matches the naive triple loop") {
  Rng rng(1);
  const Tensor a = random_tensor({3, 4}, rng);
  const Tensor b = random_tensor({4, 5}, rng);
  const Tensor c = ops::matmul(a, b);
  REQUIRE(c.shape == std::vector<std::size_t>{3, 5});
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a.at(i, k) * b.at(k, j);
      CHECK(c.at(i, j) == doctest::Approx(s).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(ops::matmul(a, random_tensor({3, 5}, rng)), DimensionError);
}

TEST_CASE("conv2d_forward matches the naive cross-correlation") {
  Rng rng(2);
  const Tensor x = random_tensor({2, 5, 6}, rng);
  const Tensor k = random_tensor({3, 2, 3, 3}, rng);
  const Tensor bias = random_tensor({3}, rng);
  const Tensor y = ops::conv2d_forward(x, k, bias);
  REQUIRE(y.shape == std::vector<std::size_t>{3, 3, 4});
  for (std::size_t f = 0; f < 3; ++f) {
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 4; ++c) {
        double s = bias[f];
        for (std::size_t ch = 0; ch < 2; ++ch)
          for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
              s += x.at(ch, r + i, c + j) * k.at(f, ch, i, j);
        CHECK(y.at(f, r, c) == doctest::Approx(s).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("relu, flatten and dense behave like their definitions") {
  Rng rng(3);
  const Tensor x = random_tensor({2, 3, 4}, rng);
  const Tensor r = ops::relu(x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(r[i] == std::max(0.0, x[i]));

  const Tensor flat = ops::flatten(x);
  CHECK(flat.shape == std::vector<std::size_t>{24});
  CHECK(flat.data == x.data);

  const Tensor v = random_tensor({4}, rng);
  const Tensor w = random_tensor({3, 4}, rng);
  const Tensor b = random_tensor({3}, rng);
  const Tensor out = ops::dense(v, w, b);
  for (std::size_t o = 0; o < 3; ++o) {
    double s = b[o];
    for (std::size_t i = 0; i < 4; ++i) s += w.at(o, i) * v[i];
    CHECK(out[o] == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("maxpool2x2 picks window maxima and rejects odd shapes") {
  Rng rng(4);
  const Tensor x = random_tensor({2, 4, 6}, rng);
  const Tensor y = ops::maxpool2x2(x);
  REQUIRE(y.shape == std::vector<std::size_t>{2, 2, 3});
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t q = 0; q < 3; ++q) {
        const double m = std::max(
            std::max(x.at(c, 2 * r, 2 * q), x.at(c, 2 * r, 2 * q + 1)),
            std::max(x.at(c, 2 * r + 1, 2 * q), x.at(c, 2 * r + 1, 2 * q + 1)));
        CHECK(y.at(c, r, q) == m);
      }
  CHECK_THROWS_AS(ops::maxpool2x2(random_tensor({1, 3, 4}, rng)), DimensionError);
}

TEST_CASE("softmax is normalized, shift-invariant and overflow-safe") {
  const Tensor logits({4}, {0.3, -1.2, 2.0, 0.0});
  const Tensor p = ops::softmax(logits);
  double sum = 0.0;
  for (double v : p.data) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  Tensor shifted = logits;
  for (double& v : shifted.data) v += 123.0;
  const Tensor q = ops::softmax(shifted);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
}

TEST_CASE("softmax with extreme logits stays finite") {
  const Tensor p = ops::softmax(Tensor({3}, {1e4, 1e4, -1e4}));
  CHECK(p.all_finite());
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("cross_entropy is -log p with a floor") {
  const Tensor p({3}, {0.2, 0.5, 0.3});
  CHECK(ops::cross_entropy(p, 1) == doctest::Approx(-std::log(0.5)).epsilon(1e-12));
  const Tensor degenerate({2}, {1.0, 0.0});
  CHECK(std::isfinite(ops::cross_entropy(degenerate, 1)));
}

TEST_CASE("softmax_cross_entropy_grad equals p - onehot and finite differences") {
  Rng rng(5);
  const Tensor logits = random_tensor({5}, rng);
  const std::size_t label = 2;
  const Tensor g = ops::softmax_cross_entropy_grad(logits, label);
  const Tensor p = ops::softmax(logits);
  for (std::size_t i = 0; i < 5; ++i) {
    const double expected = p[i] - (i == label ? 1.0 : 0.0);
    CHECK(g[i] == doctest::Approx(expected).epsilon(1e-12));
  }

  const double h = 1e-6;
  for (std::size_t i = 0; i < 5; ++i) {
    Tensor plus = logits, minus = logits;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (ops::cross_entropy(ops::softmax(plus), label) -
                       ops::cross_entropy(ops::softmax(minus), label)) /
                      (2.0 * h);
    CHECK(rel_err(fd, g[i]) < 1e-7);
  }
}

TEST_CASE("dense_backward matches finite differences") {
  Rng rng(6);
  const Tensor x = random_tensor({4}, rng);
  const Tensor w = random_tensor({3, 4}, rng);
  const Tensor b = random_tensor({3}, rng);
  const Tensor cot = random_tensor({3}, rng);
  const ops::DenseGrads g = ops::dense_backward(x, w, cot);

  check_adjoint(x, cot, [&](const Tensor& in) { return ops::dense(in, w, b); },
                g.input);
  check_adjoint(w, cot, [&](const Tensor& ww) { return ops::dense(x, ww, b); },
                g.weights);
  check_adjoint(b, cot, [&](const Tensor& bb) { return ops::dense(x, w, bb); },
                g.bias);
}

TEST_CASE("conv2d_backward matches finite differences") {
  Rng rng(7);
  const Tensor x = random_tensor({2, 5, 5}, rng);
  const Tensor k = random_tensor({3, 2, 3, 3}, rng);
  const Tensor cot = random_tensor({3, 3, 3}, rng);
  const Tensor bias({3});
  const ops::Conv2dGrads g = ops::conv2d_backward(x, k, cot);

  check_adjoint(
      x, cot, [&](const Tensor& in) { return ops::conv2d_forward(in, k, bias); },
      g.input);
  check_adjoint(
      k, cot, [&](const Tensor& kk) { return ops::conv2d_forward(x, kk, bias); },
      g.kernels);
  Tensor bias_var({3});
  check_adjoint(
      bias_var, cot,
      [&](const Tensor& bb) { return ops::conv2d_forward(x, k, bb); }, g.bias);
}

TEST_CASE("relu, maxpool and flatten backward match finite differences") {
  Rng rng(8);
  // Keep inputs away from the relu kink and pool ties so the finite
  // difference stays on one linear piece.
  Tensor x = random_tensor({2, 4, 4}, rng);
  for (double& v : x.data) {
    if (std::abs(v) < 1e-2) v = v < 0 ? v - 1e-2 : v + 1e-2;
  }
  const Tensor cot_full = random_tensor({2, 4, 4}, rng);
  check_adjoint(x, cot_full, [](const Tensor& in) { return ops::relu(in); },
                ops::relu_backward(x, cot_full));
  check_adjoint(x, cot_full, [](const Tensor& in) { return ops::flatten(in); },
                ops::flatten_backward(x, cot_full));

  const Tensor cot_pool = random_tensor({2, 2, 2}, rng);
  check_adjoint(x, cot_pool, [](const Tensor& in) { return ops::maxpool2x2(in); },
                ops::maxpool2x2_backward(x, cot_pool));
}
