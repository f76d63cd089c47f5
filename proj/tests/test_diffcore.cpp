#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "gradcheck.hpp"
#include "hybridflow/adam.hpp"
#include "hybridflow/checkpoint.hpp"
#include "hybridflow/ops.hpp"

using namespace hf::ad;
using gradcheck::random_tensor;

namespace {

std::string error_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const std::exception &e) {
    return e.what();
  }
  return {};
}

} // namespace

TEST_CASE("tensor construction checks element count") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), std::invalid_argument);
  CHECK(Tensor::zeros({4, 2}).numel() == 8);
  CHECK(Tensor::scalar(2.5).item() == 2.5);
  CHECK_THROWS_AS(Tensor::zeros({2}).item(), std::invalid_argument);
}

TEST_CASE("forward values of the primitives") {
  Tape tape;
  Var id = tape.constant(Tensor({2, 2}, {1, 0, 0, 1}));
  Var a = tape.constant(Tensor({2, 3}, {1, -2, 3, -4, 5, -6}));
  CHECK(matmul(id, a).value().values == a.value().values);

  CHECK(relu(a).value().values == std::vector<double>{1, 0, 3, 0, 5, 0});
  const auto leaky = leaky_relu(a, 0.1).value().values;
  const std::vector<double> expect_leaky{1, -0.2, 3, -0.4, 5, -0.6};
  for (std::size_t i = 0; i < leaky.size(); ++i) CHECK(leaky[i] == doctest::Approx(expect_leaky[i]).epsilon(1e-15));

  Var m = tape.constant(Tensor({2, 2}, {1, 5, 7, 2}));
  MaxResult r = reduce_max_over_axis(m, 1);
  CHECK(r.values.value().values == std::vector<double>{5, 7});
  CHECK(r.argmax == std::vector<std::size_t>{1, 0});
  MaxResult c = reduce_max_over_axis(m, 0);
  CHECK(c.values.value().values == std::vector<double>{7, 5});
  CHECK(c.argmax == std::vector<std::size_t>{1, 0});

  Var ties = tape.constant(Tensor({1, 3}, {2, 2, 2}));
  CHECK(reduce_max_over_axis(ties, 1).argmax == std::vector<std::size_t>{0});

  Var cat = concat_lastdim(a, tape.constant(Tensor({2, 1}, {9, 8})));
  CHECK(cat.value().shape == Shape{2, 4});
  CHECK(cat.value().values == std::vector<double>{1, -2, 3, 9, -4, 5, -6, 8});

  Var b = add_bias(a, tape.constant(Tensor({3}, {10, 20, 30})));
  CHECK(b.value().values == std::vector<double>{11, 18, 33, 6, 25, 24});

  Var n = l2norm_rows(tape.constant(Tensor({2, 2}, {3, 4, 0, 0})));
  CHECK(n.value().values == std::vector<double>{5, 0});

  CHECK(mse(a, tape.constant(Tensor::zeros({2, 3}))).value().item() == doctest::Approx(91.0 / 6.0));
  CHECK(sum(a).value().item() == -3.0);
  CHECK(gather_rows(a, {1, 1, 0}).value().values ==
        std::vector<double>{-4, 5, -6, -4, 5, -6, 1, -2, 3});
  CHECK(slice_rows(a, 1, 2).value().values == std::vector<double>{-4, 5, -6});
  CHECK(reshape(a, {3, 2}).value().shape == Shape{3, 2});
}

TEST_CASE("shape errors name the primitive and the shapes") {
  Tape tape;
  Var a = tape.constant(Tensor::zeros({2, 3}));
  Var b = tape.constant(Tensor::zeros({2, 3}));
  Var c = tape.constant(Tensor::zeros({4, 2}));
  std::string msg = error_of([&] { matmul(a, b); });
  CHECK(msg.find("matmul") != std::string::npos);
  CHECK(msg.find("[2x3]") != std::string::npos);
  CHECK(error_of([&] { add(a, c); }).find("add") != std::string::npos);
  CHECK_THROWS_AS(add(a, c), std::invalid_argument);
  CHECK_THROWS_AS(sub(a, c), std::invalid_argument);
  CHECK_THROWS_AS(mse(a, c), std::invalid_argument);
  CHECK_THROWS_AS(concat_lastdim(a, c), std::invalid_argument);
  CHECK_THROWS_AS(add_bias(a, tape.constant(Tensor::zeros({2}))), std::invalid_argument);
  CHECK_THROWS_AS(reshape(a, {5}), std::invalid_argument);
  CHECK_THROWS_AS(reduce_max_over_axis(a, 2), std::invalid_argument);
  CHECK_THROWS(gather_rows(a, {2}));
  CHECK_THROWS(slice_rows(a, 1, 3));
  CHECK_THROWS(grouped_max_affine(c, tape.constant(Tensor::zeros({2, 2})),
                                  tape.constant(Tensor::zeros({2})), 3));

  Tape other;
  Var d = other.constant(Tensor::zeros({2, 3}));
  CHECK_THROWS_AS(add(a, d), std::invalid_argument);
}

TEST_CASE("backward of sum gives ones and handles unreachable leaves") {
  Tensor x({2, 2}, {1, 2, 3, 4}, true);
  Tensor unused({3}, {1, 1, 1}, true);
  Tape tape;
  Var xv = tape.leaf(x);
  tape.leaf(unused);
  tape.backward(sum(xv));
  CHECK(*x.grad == std::vector<double>{1, 1, 1, 1});
  CHECK(*unused.grad == std::vector<double>{0, 0, 0});
}

TEST_CASE("leaf gradients accumulate until cleared") {
  Tensor x({2}, {1, 2}, true);
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    tape.backward(sum(scalar_mul(tape.leaf(x), 3.0)));
  }
  CHECK(*x.grad == std::vector<double>{6, 6});
  x.zero_grad();
  CHECK((!x.grad || *x.grad == std::vector<double>{0, 0}));
}

TEST_CASE("backward requires a scalar and a fresh tape") {
  Tensor x({2, 2}, {1, 2, 3, 4}, true);
  Tape tape;
  Var xv = tape.leaf(x);
  CHECK_THROWS_AS(tape.backward(xv), std::invalid_argument);
  Var s = sum(xv);
  tape.backward(s);
  CHECK_THROWS_AS(tape.backward(s), std::logic_error);
}

TEST_CASE("non-finite forward values are reported with the primitive name") {
  Tape tape;
  Var a = tape.constant(Tensor({1, 2}, {1e308, 1e308}));
  std::string msg = error_of([&] { scalar_mul(a, 10.0); });
  CHECK(msg.find("scalar_mul") != std::string::npos);
  CHECK(msg.find("non-finite") != std::string::npos);
}

TEST_CASE("mse of a linear map matches finite differences") {
  hf::Rng rng(11);
  Tensor w = random_tensor({4, 3}, rng);
  Tensor x = random_tensor({5, 4}, rng);
  Tensor y = random_tensor({5, 3}, rng);
  auto build = [&](Tape &t) { return mse(matmul(t.leaf(x), t.leaf(w)), t.constant(y)); };
  auto r = gradcheck::check({&w, &x}, build, rng);
  CHECK(r.skipped == 0);
  CHECK(r.checked == 32);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("concat, max-pool and matmul chain matches finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    hf::Rng rng(seed);
    Tensor a = random_tensor({6, 2}, rng);
    Tensor b = random_tensor({6, 3}, rng);
    Tensor w = random_tensor({5, 4}, rng);
    Tensor bias = random_tensor({4}, rng);
    auto build = [&](Tape &t) {
      Var h = add_bias(matmul(concat_lastdim(t.leaf(a), t.leaf(b)), t.leaf(w)), t.leaf(bias));
      Var pooled = reduce_max_over_axis(reshape(leaky_relu(h, 0.1), {3, 2, 4}), 1).values;
      return sum(l2norm_rows(pooled));
    };
    auto r = gradcheck::check({&a, &b, &w, &bias}, build, rng);
    CHECK(r.skipped <= 2);
    CHECK(r.max_rel_error < 1e-5);
  }
}

TEST_CASE("elementwise primitives match finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    hf::Rng rng(100 + seed);
    Tensor a = random_tensor({4, 3}, rng);
    Tensor b = random_tensor({4, 3}, rng);
    Tensor c = random_tensor({3, 3}, rng);
    auto build = [&](Tape &t) {
      Var av = t.leaf(a);
      Var bv = t.leaf(b);
      Var mixed = relu(av - bv) + 0.5 * leaky_relu(av + bv, 0.1);
      Var stacked = gather_rows(slice_rows(mixed, 1, 4), {0, 2, 2});
      return mse(stacked, t.leaf(c)) + sum(reduce_max_over_axis(av, 0).values) * 0.3;
    };
    auto r = gradcheck::check({&a, &b, &c}, build, rng);
    CHECK(r.skipped <= 2);
    CHECK(r.max_rel_error < 1e-5);
  }
}

TEST_CASE("gather_sum_bias_leaky equals its composite route") {
  hf::Rng rng(5);
  Tensor a = random_tensor({5, 4}, rng);
  Tensor b = random_tensor({7, 4}, rng);
  Tensor bias = random_tensor({4}, rng);
  Tensor weight = random_tensor({9, 4}, rng);
  const std::vector<std::size_t> ra{0, 0, 1, 4, 3, 2, 2, 1, 0};
  const std::vector<std::size_t> rb{6, 5, 4, 3, 2, 1, 0, 0, 6};

  auto fused = [&](Tape &t) {
    Var h = gather_sum_bias_leaky(t.leaf(a), ra, t.leaf(b), rb, t.leaf(bias), 0.1);
    return sum(l2norm_rows(h + t.leaf(weight)));
  };
  auto composite = [&](Tape &t) {
    Var h = leaky_relu(add_bias(add(gather_rows(t.leaf(a), ra), gather_rows(t.leaf(b), rb)),
                                t.leaf(bias)),
                       0.1);
    return sum(l2norm_rows(h + t.leaf(weight)));
  };

  std::vector<Tensor *> params{&a, &b, &bias, &weight};
  auto run = [&](const gradcheck::Builder &build) {
    for (auto *p : params) p->zero_grad();
    Tape t;
    Var loss = build(t);
    t.backward(loss);
    std::vector<std::vector<double>> grads;
    for (auto *p : params) grads.push_back(*p->grad);
    return std::pair{loss.value().item(), grads};
  };
  auto [lf, gf] = run(fused);
  auto [lc, gc] = run(composite);
  CHECK(lf == lc);
  for (std::size_t p = 0; p < gf.size(); ++p) {
    for (std::size_t i = 0; i < gf[p].size(); ++i) CHECK(gf[p][i] == doctest::Approx(gc[p][i]).epsilon(1e-12));
  }
  auto r = gradcheck::check(params, fused, rng);
  CHECK(r.skipped <= 2);
  CHECK(r.max_rel_error < 1e-5);
}

TEST_CASE("grouped_max_affine equals its composite route") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    hf::Rng rng(40 + seed);
    Tensor x = random_tensor({12, 5}, rng);
    Tensor w = random_tensor({5, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    auto fused = [&](Tape &t) {
      return sum(l2norm_rows(grouped_max_affine(t.leaf(x), t.leaf(w), t.leaf(b), 4)));
    };
    auto composite = [&](Tape &t) {
      Var h = add_bias(matmul(t.leaf(x), t.leaf(w)), t.leaf(b));
      return sum(l2norm_rows(reduce_max_over_axis(reshape(h, {3, 4, 3}), 1).values));
    };
    std::vector<Tensor *> params{&x, &w, &b};
    auto run = [&](const gradcheck::Builder &build) {
      for (auto *p : params) p->zero_grad();
      Tape t;
      Var loss = build(t);
      t.backward(loss);
      std::vector<std::vector<double>> grads;
      for (auto *p : params) grads.push_back(*p->grad);
      return std::pair{loss.value().item(), grads};
    };
    auto [lf, gf] = run(fused);
    auto [lc, gc] = run(composite);
    CHECK(lf == doctest::Approx(lc).epsilon(1e-14));
    for (std::size_t p = 0; p < gf.size(); ++p) {
      for (std::size_t i = 0; i < gf[p].size(); ++i) {
        CHECK(gf[p][i] == doctest::Approx(gc[p][i]).epsilon(1e-12));
      }
    }
    auto r = gradcheck::check(params, fused, rng);
    CHECK(r.skipped <= 2);
    CHECK(r.max_rel_error < 1e-5);
  }
}

TEST_CASE("gradients are deterministic across runs") {
  hf::Rng rng(3);
  Tensor a = random_tensor({8, 4}, rng);
  Tensor w = random_tensor({4, 4}, rng);
  auto grads = [&]() {
    a.zero_grad();
    w.zero_grad();
    Tape t;
    Var h = leaky_relu(matmul(t.leaf(a), t.leaf(w)), 0.1);
    t.backward(sum(l2norm_rows(reduce_max_over_axis(reshape(h, {4, 2, 4}), 1).values)));
    return std::pair{*a.grad, *w.grad};
  };
  CHECK(grads() == grads());
}

TEST_CASE("adam leaves parameters with zero gradient unchanged") {
  Tensor w({3}, {1.0, -2.0, 0.5}, true);
  std::vector<Tensor *> params{&w};
  AdamState state(AdamOptions{.learning_rate = 0.1}, params);
  w.grad = std::vector<double>(3, 0.0);
  for (int i = 0; i < 5; ++i) adam_step(params, state);
  CHECK(w.values == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("adam first step matches the closed form") {
  Tensor w({2}, {1.0, 1.0}, true);
  std::vector<Tensor *> params{&w};
  AdamOptions opts{.learning_rate = 0.1};
  AdamState state(opts, params);
  w.grad = std::vector<double>{1.0, -3.0};
  adam_step(params, state);
  // Bias-corrected moments equal g and g^2 after one step.
  CHECK(w.values[0] == doctest::Approx(1.0 - 0.1 * 1.0 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(w.values[1] == doctest::Approx(1.0 + 0.1 * 3.0 / (3.0 + 1e-8)).epsilon(1e-15));
  CHECK(state.step == 1);
}

TEST_CASE("adam converges on a quadratic bowl") {
  for (double w0 : {1.0, -0.7, 0.25, 3.0}) {
    Tensor w({1}, {w0}, true);
    std::vector<Tensor *> params{&w};
    AdamState state(AdamOptions{.learning_rate = 1e-2}, params);
    for (int i = 0; i < 2000; ++i) {
      w.grad = std::vector<double>{2.0 * w.values[0]};
      adam_step(params, state);
    }
    CHECK(std::abs(w.values[0]) < 1e-3);
  }
}

TEST_CASE("adam rejects a mismatched parameter list") {
  Tensor w({2}, {1.0, 1.0}, true);
  Tensor v({3}, {1.0, 1.0, 1.0}, true);
  std::vector<Tensor *> one{&w};
  std::vector<Tensor *> other{&v};
  AdamState state(AdamOptions{}, one);
  CHECK_THROWS_AS(adam_step(other, state), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is exact") {
  const auto dir = std::filesystem::temp_directory_path() / "hybridflow_test_diffcore";
  std::filesystem::create_directories(dir);
  hf::Rng rng(9);
  Checkpoint ck;
  ck.meta["variant"] = "hybrid";
  ck.meta["note"] = "two words";
  ck.tensors["a.weight"] = random_tensor({3, 4}, rng, 1e-3);
  ck.tensors["b.bias"] = Tensor({2}, {0.1, -1.0 / 3.0});
  ck.tensors["c.scalar"] = Tensor::scalar(std::nextafter(1.0, 2.0));
  ck.save(dir / "ck.txt");
  Checkpoint back = Checkpoint::load(dir / "ck.txt");
  CHECK(back.meta == ck.meta);
  REQUIRE(back.tensors.size() == ck.tensors.size());
  for (const auto &[name, t] : ck.tensors) {
    CHECK(back.tensors.at(name).shape == t.shape);
    CHECK(back.tensors.at(name).values == t.values);
  }
}

TEST_CASE("checkpoint loading rejects malformed files") {
  const auto dir = std::filesystem::temp_directory_path() / "hybridflow_test_diffcore";
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string &name, const std::string &text) {
    std::ofstream(dir / name) << text;
    return dir / name;
  };
  CHECK_THROWS_AS(Checkpoint::load(dir / "missing.txt"), std::runtime_error);
  CHECK_THROWS_AS(Checkpoint::load(write("v.txt", "hybridflow-checkpoint 2\nend\n")), std::runtime_error);
  CHECK_THROWS_AS(Checkpoint::load(write("h.txt", "something else\n")), std::runtime_error);
  CHECK_THROWS_AS(Checkpoint::load(write("t.txt", "hybridflow-checkpoint 1\ntensor w 1 3\n1 2\nend\n")),
                  std::runtime_error);
  CHECK_THROWS_AS(Checkpoint::load(write("e.txt", "hybridflow-checkpoint 1\ntensor w 1 2\n1 2\n")),
                  std::runtime_error);
  const std::string msg = error_of([&] { Checkpoint::load(write("v2.txt", "hybridflow-checkpoint 7\nend\n")); });
  CHECK(msg.find("v2.txt") != std::string::npos);
}
