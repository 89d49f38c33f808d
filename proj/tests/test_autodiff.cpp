#include <cmath>

#include "birgat/grad_check.hpp"
#include "birgat/nn.hpp"
#include "birgat/ops.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace birgat;
using namespace birgat::ops;
using birgat::testutil::rand_t;

namespace {

// scalarizes a tensor so every element contributes a distinct weight
TensorPtr weighted_sum(Tape& t, const TensorPtr& x) {
  auto w = make_tensor(x->shape, false);
  for (size_t i = 0; i < w->data.size(); ++i) w->data[i] = 0.1 + 0.01 * static_cast<double>(i % 17);
  return sum(t, mul(t, x, w));
}

double check_op(const std::function<TensorPtr(Tape&)>& f,
                const std::vector<std::pair<std::string, TensorPtr>>& params) {
  return grad_check(f, params).max_rel_err;
}

}  // namespace

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("elementwise ops match finite differences") {
  Rng rng(11);
  auto a = rand_t({3, 4}, rng);
  auto b = rand_t({3, 4}, rng);
  auto row = rand_t({1, 4}, rng);

  CHECK(check_op([&](Tape& t) { return weighted_sum(t, add(t, a, b)); }, {{"a", a}, {"b", b}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, add(t, a, row)); }, {{"a", a}, {"row", row}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, sub(t, a, b)); }, {{"a", a}, {"b", b}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, mul(t, a, b)); }, {{"a", a}, {"b", b}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, scale(t, a, -1.7)); }, {{"a", a}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, ops::exp(t, a)); }, {{"a", a}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, ops::tanh(t, a)); }, {{"a", a}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, sigmoid(t, a)); }, {{"a", a}}) < 1e-6);
  auto pos = rand_t({3, 4}, rng);
  for (double& x : pos->data) x = 0.2 + std::fabs(x);  // keep log inputs positive
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, ops::log(t, pos)); }, {{"p", pos}}) < 1e-6);
  auto faraway = rand_t({3, 4}, rng);
  for (double& x : faraway->data) x += (x >= 0 ? 0.3 : -0.3);  // keep relu/clamp kinks away
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, relu(t, faraway)); }, {{"a", faraway}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, clamp_min(t, faraway, 0.05)); }, {{"a", faraway}}) < 1e-6);
}

TEST_CASE("reductions and shape plumbing match finite differences") {
  Rng rng(12);
  auto a = rand_t({3, 4}, rng), b = rand_t({2, 4}, rng), c = rand_t({3, 2}, rng);
  CHECK(check_op([&](Tape& t) { return sum(t, a); }, {{"a", a}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return mean(t, a); }, {{"a", a}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, mean_over_rows(t, a)); }, {{"a", a}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, transpose(t, a)); }, {{"a", a}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, concat_rows(t, {a, b})); }, {{"a", a}, {"b", b}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, concat_cols(t, {a, c})); }, {{"a", a}, {"c", c}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, slice_rows(t, a, 1, 3)); }, {{"a", a}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, slice_cols(t, a, 1, 3)); }, {{"a", a}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, embedding_lookup(t, a, {2, 0, 2})); }, {{"a", a}}) < 1e-6);
  CHECK(check_op([&](Tape& t) { return pick(t, a, 2, 1); }, {{"a", a}}) < 1e-6);
  std::vector<uint8_t> mask = {1, 0, 1};
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, where_rows(t, mask, a, b->rows() == 3 ? b : a)); },
                 {{"a", a}}) < 1e-6);
}

TEST_CASE("matmul gradients match finite differences on random 3x4 * 4x2") {
  Rng rng(13);
  auto a = rand_t({3, 4}, rng);
  auto b = rand_t({4, 2}, rng);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, matmul(t, a, b)); }, {{"a", a}, {"b", b}}) < 1e-6);
  auto bt = rand_t({2, 4}, rng);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, matmul_nt(t, a, bt)); }, {{"a", a}, {"bt", bt}}) < 1e-6);
}

TEST_CASE("matmul_nt equals matmul with explicit transpose") {
  Rng rng(14);
  auto a = rand_t({3, 5}, rng), b = rand_t({4, 5}, rng);
  Tape t;
  auto via_nt = matmul_nt(t, a, b);
  auto via_t = matmul(t, a, transpose(t, b));
  for (size_t i = 0; i < via_nt->data.size(); ++i) CHECK(via_nt->data[i] == doctest::Approx(via_t->data[i]));
}

TEST_CASE("softmax of a constant row is uniform") {
  Tape t;
  auto x = full({1, 4}, 3.25);
  auto y = softmax_rows(t, x);
  for (double v : y->data) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one and gradients check out") {
  Rng rng(15);
  auto a = rand_t({4, 6}, rng, 1.0);
  Tape t;
  auto y = softmax_rows(t, a);
  for (int r = 0; r < 4; ++r) {
    double s = 0.0;
    for (int c = 0; c < 6; ++c) s += y->at(r, c);
    CHECK(std::fabs(s - 1.0) < 1e-12);
  }
  CHECK(check_op([&](Tape& tp) { return weighted_sum(tp, softmax_rows(tp, a)); }, {{"a", a}}) < 1e-6);
}

TEST_CASE("layer_norm normalizes rows to zero mean unit variance with unit gain") {
  Rng rng(16);
  auto x = rand_t({3, 8}, rng, 2.0);
  auto g = full({1, 8}, 1.0);
  auto b = zeros({1, 8});
  Tape t;
  auto y = layer_norm(t, x, g, b, 1e-5);
  for (int r = 0; r < 3; ++r) {
    double mu = 0, var = 0;
    for (int c = 0; c < 8; ++c) mu += y->at(r, c);
    mu /= 8;
    for (int c = 0; c < 8; ++c) var += (y->at(r, c) - mu) * (y->at(r, c) - mu);
    var /= 8;
    CHECK(std::fabs(mu) < 1e-9);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // up to the eps regularizer
  }
}

TEST_CASE("layer_norm gradients match finite differences") {
  Rng rng(17);
  auto x = rand_t({3, 6}, rng);
  auto g = rand_t({1, 6}, rng);
  auto b = rand_t({1, 6}, rng);
  CHECK(check_op([&](Tape& t) { return weighted_sum(t, layer_norm(t, x, g, b, 1e-5)); },
                 {{"x", x}, {"g", g}, {"b", b}}) < 1e-6);
}

TEST_CASE("dropout is identity in eval mode and scales by 1/(1-rate) in train mode") {
  Rng rng(18);
  auto x = rand_t({20, 10}, rng);
  Tape t;
  Rng r1(7);
  auto eval_out = dropout(t, x, 0.4, false, r1);
  CHECK(eval_out.get() == x.get());
  Rng r2(7);
  auto train_out = dropout(t, x, 0.4, true, r2);
  int kept = 0;
  for (size_t i = 0; i < x->data.size(); ++i) {
    if (train_out->data[i] != 0.0) {
      ++kept;
      CHECK(train_out->data[i] == doctest::Approx(x->data[i] / 0.6));
    }
  }
  CHECK(kept > 60);
  CHECK(kept < 180);
}

TEST_CASE("cross_entropy is non-negative and matches finite differences") {
  Rng rng(19);
  auto logits = rand_t({3, 5}, rng, 2.0);
  std::vector<int> targets = {1, 4, 0};
  Tape t;
  auto logp = ops::log(t, softmax_rows(t, logits));
  auto ce = cross_entropy(t, logp, targets);
  CHECK(ce->data[0] >= 0.0);
  CHECK(check_op(
            [&](Tape& tp) {
              return cross_entropy(tp, ops::log(tp, softmax_rows(tp, logits)), targets);
            },
            {{"logits", logits}}) < 1e-6);
}

TEST_CASE("grad_check on f(x)=sum(x^2) is exact to 1e-9") {
  Rng rng(20);
  auto x = rand_t({4, 3}, rng);
  auto r = grad_check([&](Tape& t) { return sum(t, mul(t, x, x)); }, {{"x", x}});
  CHECK(r.max_rel_err < 1e-9);
}

TEST_CASE("fan-out gradients equal the unrolled-tree sum on a shared subexpression") {
  // y = (x*x) reused twice: z = sum(x*x + x*x); dz/dx = 4x
  Rng rng(21);
  auto x = rand_t({2, 3}, rng);
  Tape t;
  auto sq = mul(t, x, x);
  auto z = sum(t, add(t, sq, sq));
  t.backward(z);
  for (size_t i = 0; i < x->data.size(); ++i)
    CHECK(x->grad[i] == doctest::Approx(4.0 * x->data[i]).epsilon(1e-12));
}

TEST_CASE("shape mismatches raise ShapeMismatch naming both shapes") {
  Tape t;
  auto a = zeros({2, 3});
  auto b = zeros({3, 3});
  CHECK_THROWS_AS(add(t, a, b), ShapeMismatch);
  CHECK_THROWS_AS(matmul(t, a, a), ShapeMismatch);
  try {
    add(t, a, b);
  } catch (const ShapeMismatch& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2,3)") != std::string::npos);
    CHECK(msg.find("(3,3)") != std::string::npos);
  }
}

TEST_CASE("backward rejects non-scalar roots and double replay") {
  Tape t;
  Rng rng(3);
  auto x = rand_t({2, 2}, rng);
  auto y = mul(t, x, x);
  CHECK_THROWS_AS(t.backward(y), ShapeMismatch);
  auto s = sum(t, y);
  t.backward(s);
  CHECK_THROWS_AS(t.backward(s), Error);
}

TEST_SUITE_END();
