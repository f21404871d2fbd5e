#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "intrasum/adam.hpp"
#include "intrasum/tensor.hpp"

using namespace intrasum;

TEST_CASE("adam: zero gradient leaves parameters unchanged", "[adam]") {
  Tensor p = Tensor::vec({1.0, -2.0, 3.0});
  Tensor g = Tensor::vec(3, 0.0);
  std::vector<Tensor*> params = {&p};
  std::vector<const Tensor*> grads = {&g};
  AdamState st;
  adam_step(params, grads, st, 0.001);
  CHECK(p.v[0] == 1.0);
  CHECK(p.v[1] == -2.0);
  CHECK(p.v[2] == 3.0);
  CHECK(st.step_count == 1);
}

TEST_CASE("adam: first step is -lr * sign(g) as eps -> 0", "[adam]") {
  // With bias correction at t=1, mhat = g and vhat = g^2, so the update is
  // lr * g / (|g| + eps') which tends to lr * sign(g).
  Tensor p = Tensor::scalar(0.0);
  Tensor g = Tensor::scalar(-3.7);
  std::vector<Tensor*> params = {&p};
  std::vector<const Tensor*> grads = {&g};
  AdamState st;
  st.eps = 1e-16;
  adam_step(params, grads, st, 0.01);
  CHECK(p.v[0] == Catch::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("adam: beta1=beta2=0 gives update -lr*g/(|g|+eps) each step",
          "[adam]") {
  Tensor p = Tensor::scalar(1.0);
  Tensor g = Tensor::scalar(2.0);
  std::vector<Tensor*> params = {&p};
  std::vector<const Tensor*> grads = {&g};
  AdamState st;
  st.beta1 = 0.0;
  st.beta2 = 0.0;
  st.eps = 1e-8;
  const double lr = 0.1;
  const double expected_delta = lr * 2.0 / (2.0 + st.eps);
  adam_step(params, grads, st, lr);
  CHECK(p.v[0] == Catch::Approx(1.0 - expected_delta));
  adam_step(params, grads, st, lr);
  CHECK(p.v[0] == Catch::Approx(1.0 - 2.0 * expected_delta));
}

TEST_CASE("adam: NaN gradient aborts the step", "[adam]") {
  Tensor p = Tensor::scalar(1.0);
  Tensor g = Tensor::scalar(std::nan(""));
  std::vector<Tensor*> params = {&p};
  std::vector<const Tensor*> grads = {&g};
  AdamState st;
  REQUIRE_THROWS_AS(adam_step(params, grads, st, 0.001), std::runtime_error);
  CHECK(p.v[0] == 1.0);
  CHECK(st.step_count == 0);
}

TEST_CASE("adam: shape mismatch rejected", "[adam]") {
  Tensor p = Tensor::vec(3, 1.0);
  Tensor g = Tensor::vec(2, 1.0);
  std::vector<Tensor*> params = {&p};
  std::vector<const Tensor*> grads = {&g};
  AdamState st;
  REQUIRE_THROWS_AS(adam_step(params, grads, st, 0.001),
                    std::invalid_argument);
}

TEST_CASE("clip_global_norm scales only above the threshold", "[adam]") {
  Tensor a = Tensor::vec({3.0, 0.0});
  Tensor b = Tensor::vec({0.0, 4.0});
  std::vector<Tensor*> grads = {&a, &b};
  const double norm = clip_global_norm(grads, 2.0);
  CHECK(norm == Catch::Approx(5.0));
  CHECK(a.v[0] == Catch::Approx(3.0 * 2.0 / 5.0));
  CHECK(b.v[1] == Catch::Approx(4.0 * 2.0 / 5.0));

  Tensor c = Tensor::vec({0.3, 0.4});
  std::vector<Tensor*> small = {&c};
  const double norm2 = clip_global_norm(small, 2.0);
  CHECK(norm2 == Catch::Approx(0.5));
  CHECK(c.v[0] == 0.3);
}
