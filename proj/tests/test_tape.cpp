#include "doctest.h"
#include "flowbench/nn.hpp"
#include "flowbench/rng.hpp"
#include "flowbench/tape.hpp"
#include "flowbench/thread_pool.hpp"

#include <cmath>

using namespace flowbench;

namespace {

Tensor random_tensor(Rng& rng, int r, int c) {
  Tensor t(r, c);
  for (auto& x : t.v) x = rng.normal() * 0.5;
  return t;
}

}  // namespace

TEST_CASE("matmul forward") {
  Tape tape;
  Tensor a(2, 3), b(3, 2);
  a.v = {1, 2, 3, 4, 5, 6};
  b.v = {7, 8, 9, 10, 11, 12};
  NodeId c = tape.matmul(tape.constant(a), tape.constant(b));
  const Tensor& out = tape.value(c);
  CHECK(out.at(0, 0) == doctest::Approx(58));
  CHECK(out.at(0, 1) == doctest::Approx(64));
  CHECK(out.at(1, 0) == doctest::Approx(139));
  CHECK(out.at(1, 1) == doctest::Approx(154));
}

TEST_CASE("loss = sum of squares has gradient 2*theta") {
  ParamStore store;
  Rng rng(1);
  store.create("w", 3, 2);
  store.init_kaiming("w", rng);

  Tape tape;
  NodeId w = tape.param(store.get("w"));
  NodeId loss = tape.sum_all(tape.square(w));
  tape.backward(loss);
  for (std::size_t i = 0; i < store.get("w").size(); ++i) {
    CHECK(tape.grad(w).v[i] == doctest::Approx(2.0 * store.get("w").v[i]).epsilon(1e-12));
  }
}

TEST_CASE("constant loss has zero gradients") {
  ParamStore store;
  store.create("w", 2, 2).v = {1, 2, 3, 4};

  Tape tape;
  NodeId w = tape.param(store.get("w"));
  NodeId loss = tape.sum_all(tape.constant(Tensor::scalar(5.0)));
  tape.backward(loss);
  for (double g : tape.grad(w).v) CHECK(g == 0.0);
}

TEST_CASE("finite differences validate a composite of every op") {
  ParamStore store;
  Rng rng(7);
  store.create("w1", 4, 5);
  store.init_kaiming("w1", rng);
  store.create("b1", 1, 5);
  store.init_kaiming("b1", rng);
  store.create("w2", 5, 3);
  store.init_kaiming("w2", rng);
  store.create("v", 6, 1);
  store.init_kaiming("v", rng);

  Tensor x = random_tensor(rng, 6, 4);

  auto loss_fn = [&](GradMap* grads) {
    Tape tape;
    NodeId w1 = tape.param(store.get("w1"));
    NodeId b1 = tape.param(store.get("b1"));
    NodeId w2 = tape.param(store.get("w2"));
    NodeId v = tape.param(store.get("v"));

    NodeId h = tape.leaky_relu(tape.add_rowvec(tape.matmul(tape.constant(x), w1), b1), 0.01);
    NodeId h2 = tape.matmul(h, w2);  // [6 x 3]

    NodeId gathered = tape.gather_rows(h2, {0, 2, 4, 5, 1, 1});
    NodeId segsum = tape.segment_sum_rows(gathered, {0, 0, 1, 1, 2, 2}, 3);  // [3 x 3]
    NodeId cat = tape.concat_cols(segsum, segsum);                           // [3 x 6]

    NodeId flat = tape.gather_flat({cat, v}, {{0, 0}, {0, 5}, {0, 7}, {1, 2}, {1, 0}, {0, 17}});
    NodeId lse = tape.group_logsumexp(flat, {0, 3, 6}, {0, 1, 2, 3, 4, 5}, {0.5, kNegInf});
    NodeId sb = tape.sub_broadcast(flat, lse, {0, 0, 0, 1, 1, 1});
    NodeId cs = tape.cumsum_exclusive(sb);
    NodeId pd = tape.pairdiff_sq_mean(cs);

    NodeId target = tape.gather_flat({v}, {{0, 0}, {0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}});
    NodeId more = tape.sum_all(tape.square(tape.sub(tape.scale(sb, 0.7), target)));
    NodeId loss = tape.sum_all(tape.add(pd, more));

    double value = tape.value(loss).v[0];
    if (grads) {
      tape.backward(loss);
      (*grads)["w1"] = tape.grad(w1);
      (*grads)["b1"] = tape.grad(b1);
      (*grads)["w2"] = tape.grad(w2);
      (*grads)["v"] = tape.grad(v);
    }
    return value;
  };

  auto result = finite_diff_check(store, loss_fn, 1e-5);
  INFO(result.describe());
  CHECK(result.ok(1e-6));
}

TEST_CASE("pairdiff_sq_mean equals the explicit pair sum") {
  Tape tape;
  Tensor a = Tensor::column({0.3, -1.2, 2.0, 0.7});
  NodeId out = tape.pairdiff_sq_mean(tape.constant(a));
  double expect = 0.0;
  int pairs = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      expect += (a.v[i] - a.v[j]) * (a.v[i] - a.v[j]);
      ++pairs;
    }
  }
  CHECK(tape.value(out).v[0] == doctest::Approx(expect / pairs).epsilon(1e-12));
}

TEST_CASE("group_logsumexp handles the extra constant member") {
  Tape tape;
  NodeId x = tape.constant(Tensor::column({std::log(2.0), std::log(3.0)}));
  NodeId lse = tape.group_logsumexp(x, {0, 2}, {0, 1}, {std::log(5.0)});
  CHECK(std::exp(tape.value(lse).v[0]) == doctest::Approx(10.0));
}

TEST_CASE("results are identical across thread counts") {
  Rng rng(42);
  Tensor a = random_tensor(rng, 64, 48);
  Tensor b = random_tensor(rng, 48, 32);

  auto run = [&]() {
    Tape tape;
    NodeId c = tape.matmul(tape.constant(a), tape.constant(b));
    NodeId loss = tape.sum_all(tape.square(c));
    tape.backward(loss);
    return std::make_pair(tape.value(loss).v[0], tape.value(c).v);
  };

  set_thread_count(1);
  auto r1 = run();
  set_thread_count(4);
  auto r4 = run();
  set_thread_count(3);
  auto r3 = run();
  set_thread_count(1);

  CHECK(r1.first == r4.first);
  CHECK(r1.second == r4.second);
  CHECK(r1.first == r3.first);
}

TEST_CASE("adam first step matches the closed form") {
  ParamStore store;
  store.create("w", 1, 1).v = {1.0};
  GradMap grads;
  grads["w"] = Tensor::scalar(1.0);
  ParamStore::Adam cfg;
  store.adam_step(grads, cfg);
  // m-hat = 1, v-hat = 1: delta = -lr / (1 + eps).
  CHECK(store.get("w").v[0] == doctest::Approx(1.0 - 0.001 / (1.0 + 1e-8)).epsilon(1e-15));
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
  ParamStore store;
  store.create("w", 2, 1).v = {0.5, -0.25};
  GradMap grads;
  grads["w"] = Tensor(2, 1);
  store.adam_step(grads, {});
  CHECK(store.get("w").v[0] == 0.5);
  CHECK(store.get("w").v[1] == -0.25);
}

TEST_CASE("checkpoint round trip preserves tensors, moments, and step") {
  ParamStore store;
  Rng rng(5);
  store.create("a", 3, 4);
  store.init_kaiming("a", rng);
  store.create("b", 1, 2);
  store.init_kaiming("b", rng);
  GradMap grads;
  grads["a"] = random_tensor(rng, 3, 4);
  grads["b"] = random_tensor(rng, 1, 2);
  store.adam_step(grads, {});

  auto bytes = store.serialize("{\"echo\":1}");
  std::string echo;
  ParamStore restored = ParamStore::deserialize(bytes, &echo);
  CHECK(echo == "{\"echo\":1}");
  CHECK(restored.step_count() == 1);
  CHECK(restored.get("a").v == store.get("a").v);
  CHECK(restored.get("b").v == store.get("b").v);
  CHECK(restored.serialize("{\"echo\":1}") == bytes);
}
