#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>

#include "support.hpp"
#include "uniex/ndiff.hpp"
#include "uniex/params.hpp"

using namespace uniex;
using support::random_array;

namespace {

// Weighted sum of an op's output, so every output cell gets a distinct
// upstream gradient.
nd::Var probe(const nd::Var& out, const nd::Array& weights) {
  return nd::reduce_sum(nd::mul(out, nd::constant(weights)));
}

double check_op(const std::function<nd::Var(std::span<const nd::Var>)>& op,
                std::vector<nd::Shape> shapes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<nd::Var> params;
  for (auto& s : shapes) params.push_back(nd::parameter(random_array(s, rng)));
  const auto out_shape = op(params).shape();
  const auto w = random_array(out_shape, rng);
  auto r = nd::grad_check([&] { return probe(op(params), w); }, params);
  return r.max_rel_error;
}

}  // namespace

TEST_CASE("primitive values") {
  CHECK(nd::sigmoid(nd::constant(nd::Array::scalar(0.0))).value()[0] == 0.5);
  const auto sm = nd::softmax_rows(nd::constant(nd::Array({1, 2}, 0.0)), nd::Array({1, 2}, 0.0));
  CHECK(sm.value()[0] == 0.5);
  CHECK(sm.value()[1] == 0.5);
  const auto mm = nd::matmul(nd::constant(nd::Array({2, 3}, 1.0)), nd::constant(nd::Array({3, 1}, 1.0)));
  CHECK(mm.shape() == nd::Shape{2, 1});
  CHECK(mm.value()[0] == 3.0);
  CHECK(mm.value()[1] == 3.0);
}

TEST_CASE("masked softmax gives exactly zero weight") {
  nd::Array mask({1, 3}, 0.0);
  mask[1] = nd::kMaskedLogit;
  const auto sm = nd::softmax_rows(nd::constant(nd::Array({1, 3}, {0.3, 5.0, -0.2})), mask);
  CHECK(sm.value()[1] == 0.0);
  CHECK(sm.value()[0] + sm.value()[2] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("shape mismatch names both shapes") {
  const auto a = nd::constant(nd::Array({2, 3}));
  const auto b = nd::constant(nd::Array({2, 3}));
  try {
    nd::matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const nd::ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
  CHECK_THROWS_AS(nd::add(a, nd::constant(nd::Array({3, 2}))), nd::ShapeError);
}

TEST_CASE("backward examples") {
  auto x = nd::parameter(nd::Array::scalar(3.0));
  nd::backward(nd::mul(x, x));
  CHECK(x.grad()[0] == 6.0);

  auto z = nd::parameter(nd::Array::scalar(0.0));
  nd::backward(nd::sigmoid(z));
  CHECK(z.grad()[0] == 0.25);

  std::mt19937_64 rng(3);
  auto a = nd::parameter(random_array({2, 2}, rng));
  auto b = nd::parameter(random_array({2, 2}, rng));
  std::vector<nd::Var> ps{a, b};
  auto r = nd::grad_check([&] { return nd::reduce_sum(nd::matmul(a, b)); }, ps, 1e-5);
  CHECK(r.max_rel_error < 1e-8);
}

TEST_CASE("non-scalar loss is rejected") {
  auto x = nd::parameter(nd::Array({2}, 1.0));
  CHECK_THROWS_AS(nd::backward(x), nd::ShapeError);
}

TEST_CASE("grad_check examples") {
  auto x = nd::parameter(nd::Array::scalar(1.0));
  std::vector<nd::Var> ps{x};
  CHECK(nd::grad_check([&] { return nd::mul(x, x); }, ps, 1e-5).max_rel_error < 1e-8);
  auto c = nd::grad_check([&] { return nd::constant(nd::Array::scalar(4.0)); }, ps, 1e-5);
  CHECK(c.max_rel_error == 0.0);
  CHECK_THROWS(nd::grad_check(
      [&] { return nd::scale(nd::mul(x, x), std::numeric_limits<double>::infinity()); }, ps));
}

TEST_CASE("every primitive passes a finite-difference check") {
  using Vs = std::span<const nd::Var>;
  const double tol = 1e-4;
  nd::Array mask({3, 4}, 0.0);
  mask.at(0, 1) = nd::kMaskedLogit;
  mask.at(2, 3) = nd::kMaskedLogit;
  const std::vector<std::size_t> ids{2, 0, 2, 1};
  const std::vector<std::size_t> axes{2, 0, 1};
  std::mt19937_64 rng(11);
  const auto target = random_array({2, 3}, rng, 0.0, 1.0);
  nd::Array binary({2, 3}, {1, 0, 1, 0, 0, 1});
  nd::Array valid({2, 3}, {1, 1, 0, 1, 1, 1});

  struct Case {
    const char* name;
    std::function<nd::Var(Vs)> op;
    std::vector<nd::Shape> shapes;
  };
  const std::vector<Case> cases = {
      {"matmul", [](Vs v) { return nd::matmul(v[0], v[1]); }, {{3, 4}, {4, 2}}},
      {"add", [](Vs v) { return nd::add(v[0], v[1]); }, {{2, 3}, {2, 3}}},
      {"sub", [](Vs v) { return nd::sub(v[0], v[1]); }, {{2, 3}, {2, 3}}},
      {"mul", [](Vs v) { return nd::mul(v[0], v[1]); }, {{2, 3}, {2, 3}}},
      {"scale", [](Vs v) { return nd::scale(v[0], -1.7); }, {{2, 3}}},
      {"add_row", [](Vs v) { return nd::add_row(v[0], v[1]); }, {{3, 4}, {4}}},
      {"sigmoid", [](Vs v) { return nd::sigmoid(v[0]); }, {{2, 3}}},
      {"tanh", [](Vs v) { return nd::tanh(v[0]); }, {{2, 3}}},
      {"gelu", [](Vs v) { return nd::gelu(v[0]); }, {{2, 3}}},
      {"softmax_rows", [&](Vs v) { return nd::softmax_rows(v[0], mask); }, {{3, 4}}},
      {"layer_norm", [](Vs v) { return nd::layer_norm(v[0], v[1], v[2]); }, {{3, 4}, {4}, {4}}},
      {"gather_rows", [&](Vs v) { return nd::gather_rows(v[0], ids); }, {{3, 2}}},
      {"reshape", [](Vs v) { return nd::reshape(v[0], {3, 2}); }, {{2, 3}}},
      {"transpose", [](Vs v) { return nd::transpose(v[0]); }, {{2, 3}}},
      {"permute", [&](Vs v) { return nd::permute(v[0], axes); }, {{2, 3, 4}}},
      {"reduce_sum", [](Vs v) { return nd::reduce_sum(v[0]); }, {{2, 3}}},
      {"slice_cols", [](Vs v) { return nd::slice_cols(v[0], 1, 2); }, {{3, 4}}},
      {"concat_cols", [](Vs v) { return nd::concat_cols(v); }, {{3, 2}, {3, 1}}},
      {"outer_add", [](Vs v) { return nd::outer_add(v[0], v[1]); }, {{2, 3}, {2, 4}}},
      {"masked_bce", [&](Vs v) { return nd::masked_bce(nd::sigmoid(v[0]), target, valid); }, {{2, 3}}},
      {"masked_bce_logits", [&](Vs v) { return nd::masked_bce_logits(v[0], binary, valid); },
       {{2, 3}}},
  };
  std::uint64_t seed = 100;
  for (const auto& c : cases) {
    CAPTURE(c.name);
    CHECK(check_op(c.op, c.shapes, seed++) < tol);
  }
}

TEST_CASE("backward is linear") {
  std::mt19937_64 rng(5);
  auto x = nd::parameter(random_array({3, 3}, rng));
  auto y = nd::parameter(random_array({3, 3}, rng));
  auto f = [&] { return nd::reduce_sum(nd::gelu(nd::matmul(x, y))); };
  auto g = [&] { return nd::reduce_sum(nd::mul(nd::tanh(x), y)); };
  const double a = 0.7, b = -2.3;

  auto grads = [&](const std::function<nd::Var()>& loss) {
    x.zero_grad();
    y.zero_grad();
    nd::backward(loss());
    return std::pair{x.grad(), y.grad()};
  };
  const auto gf = grads(f);
  const auto gg = grads(g);
  const auto gc = grads([&] { return nd::add(nd::scale(f(), a), nd::scale(g(), b)); });
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(std::abs(gc.first[i] - (a * gf.first[i] + b * gg.first[i])) < 1e-10);
    CHECK(std::abs(gc.second[i] - (a * gf.second[i] + b * gg.second[i])) < 1e-10);
  }
}

TEST_CASE("forward and backward are deterministic") {
  std::mt19937_64 rng(9);
  const auto xv = random_array({4, 4}, rng);
  const auto gv = random_array({4}, rng);
  auto run = [&] {
    auto x = nd::parameter(xv);
    auto g = nd::parameter(gv);
    auto loss = nd::reduce_sum(nd::softmax_rows(
        nd::layer_norm(x, g, nd::constant(nd::Array({4}))), nd::Array({4, 4})));
    nd::backward(nd::mul(loss, loss));
    return std::tuple{loss.value(), x.grad(), g.grad()};
  };
  CHECK(run() == run());
}

TEST_CASE("parameter gradients accumulate until cleared") {
  auto x = nd::parameter(nd::Array::scalar(2.0));
  nd::backward(nd::mul(x, x));
  nd::backward(nd::mul(x, x));
  CHECK(x.grad()[0] == 8.0);
  x.zero_grad();
  CHECK(x.grad().empty());
}

TEST_CASE("invalid BCE cells carry no loss and no gradient") {
  auto s = nd::parameter(nd::Array({1, 3}, {0.5, 0.2, 0.9}));
  const nd::Array y({1, 3}, {1, 0, 0});
  const nd::Array valid({1, 3}, {1, 0, 0});
  auto loss = nd::masked_bce(s, y, valid);
  CHECK(loss.value()[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  nd::backward(loss);
  CHECK(s.grad()[1] == 0.0);
  CHECK(s.grad()[2] == 0.0);
}

TEST_CASE("logit-space BCE agrees with BCE on probabilities") {
  std::mt19937_64 rng(21);
  const auto z = random_array({3, 4}, rng, -6.0, 6.0);
  nd::Array y({3, 4});
  nd::Array valid({3, 4});
  for (std::size_t i = 0; i < 12; ++i) {
    y[i] = static_cast<double>(rng() % 2);
    valid[i] = static_cast<double>(rng() % 3 != 0);
  }
  auto a = nd::parameter(z);
  auto b = nd::parameter(z);
  auto la = nd::masked_bce(nd::sigmoid(a), y, valid);
  auto lb = nd::masked_bce_logits(b, y, valid);
  CHECK(la.value()[0] == doctest::Approx(lb.value()[0]).epsilon(1e-12));
  nd::backward(la);
  nd::backward(lb);
  CHECK(support::max_abs_diff(a.grad(), b.grad()) < 1e-12);
}

TEST_CASE("bce clamps at the boundaries") {
  CHECK(nd::bce(1.0, 0.5) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(nd::bce(0.0, 0.9) == doctest::Approx(2.302585).epsilon(1e-6));
  CHECK(nd::bce(1.0, 1.0) < 1e-11);
  CHECK(std::isfinite(nd::bce(1.0, 0.0)));
  CHECK(nd::bce(1.0, 0.0) == doctest::Approx(-std::log(nd::kBceEps)));
}

TEST_CASE("a corrupted backward rule is caught") {
  std::mt19937_64 rng(4);
  auto x = nd::parameter(random_array({2, 3}, rng));
  auto w = nd::parameter(random_array({3, 2}, rng));
  std::vector<nd::Var> ps{x, w};
  auto loss = [&] { return nd::reduce_sum(nd::gelu(nd::matmul(x, w))); };
  CHECK(nd::grad_check(loss, ps).max_rel_error < 1e-4);
  for (auto fault : {nd::testing::Fault::gelu_backward, nd::testing::Fault::matmul_backward}) {
    nd::testing::set_fault(fault);
    CHECK(nd::grad_check(loss, ps).max_rel_error > 1e-4);
  }
  nd::testing::set_fault(nd::testing::Fault::none);
}

TEST_CASE("checkpoint round trip is bit exact") {
  std::mt19937_64 rng(8);
  ParamStore store;
  store.add("b.weight", random_array({3, 2}, rng, -1e3, 1e3));
  store.add("a.bias", random_array({5}, rng));
  store.add("c.cube", random_array({2, 2, 2}, rng));
  store.get("a.bias").mutable_value()[0] = 1.0 / 3.0;

  const auto dir = std::filesystem::temp_directory_path() / "uniex_test_ckpt";
  std::filesystem::create_directories(dir);
  store.save(dir / "p.bin");
  const auto loaded = ParamStore::load(dir / "p.bin");
  CHECK(loaded.values_equal(store));
  CHECK(loaded.names() == store.names());
  loaded.save(dir / "q.bin");
  auto bytes = [](const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
  };
  CHECK(bytes(dir / "p.bin") == bytes(dir / "q.bin"));
  CHECK(bytes(dir / "p.bin").substr(0, 8) == "UNIEXPRM");

  std::ofstream(dir / "bad.bin") << "NOTACKPT";
  CHECK_THROWS(ParamStore::load(dir / "bad.bin"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("clone shares no nodes") {
  ParamStore store;
  store.add("w", nd::Array({2}, 1.0));
  auto copy = store.clone();
  copy.get("w").mutable_value()[0] = 5.0;
  CHECK(store.get("w").value()[0] == 1.0);
  CHECK_FALSE(copy.values_equal(store));
}
