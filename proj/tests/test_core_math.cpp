#include <cmath>
#include <random>

#include "doctest.h"
#include "mir/autodiff.hpp"
#include "mir/errors.hpp"
#include "mir/gradcheck.hpp"
#include "mir/parameters.hpp"
#include "support.hpp"

using namespace mir;

namespace {

Tensor triple_loop(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

double value_of(Var v) { return v.value().item(); }

}  // namespace

TEST_CASE("matmul identity, zeros and triple-loop reference") {
  std::mt19937_64 rng(1);
  Tape tape;
  const Tensor M = testing::random_tensor(2, 3, rng);
  CHECK(matmul(tape.constant(Tensor::identity(2)), tape.constant(M)).value() == M);
  const Tensor Z = matmul(tape.constant(Tensor(3, 4)), tape.constant(testing::random_tensor(4, 2, rng))).value();
  CHECK(Z == Tensor(3, 2));
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = testing::random_tensor(5, 6, rng), b = testing::random_tensor(6, 3, rng);
    CHECK(max_abs_diff(matmul(tape.constant(a), tape.constant(b)).value(), triple_loop(a, b)) < 1e-12);
  }
}

TEST_CASE("matmul rejects mismatched shapes and names them") {
  Tape tape;
  try {
    matmul(tape.constant(Tensor(2, 3)), tape.constant(Tensor(2, 3)));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("[2x3]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(tape.constant(Tensor(2, 3)), tape.constant(Tensor(3, 2))), ShapeError);
  CHECK_THROWS_AS(add(tape.constant(Tensor(2, 3)), tape.constant(Tensor(2, 1))), ShapeError);
}

TEST_CASE("element-wise nonlinearities at known points") {
  Tape tape;
  CHECK(tanh(tape.constant(Tensor::scalar(0.0))).value().item() == 0.0);
  CHECK(sigmoid(tape.constant(Tensor::scalar(0.0))).value().item() == 0.5);
  CHECK(leaky_relu(tape.constant(Tensor::scalar(-1.0)), 0.01).value().item() == doctest::Approx(-0.01).epsilon(1e-15));
  CHECK(softplus(tape.constant(Tensor::scalar(0.0))).value().item() == doctest::Approx(std::log(2.0)));
  // Large arguments stay finite.
  CHECK(std::isfinite(softplus(tape.constant(Tensor::scalar(800.0))).value().item()));
  CHECK(sigmoid(tape.constant(Tensor::scalar(-800.0))).value().item() >= 0.0);
}

TEST_CASE("softmax rows with and without masks") {
  Tape tape;
  const Tensor flat = softmax_rows(tape.constant(Tensor::matrix({{2.5, 2.5, 2.5}}))).value();
  for (std::size_t j = 0; j < 3; ++j) CHECK(flat(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const Tensor analytic = softmax_rows(tape.constant(Tensor::matrix({{0.0, std::log(2.0)}}))).value();
  CHECK(analytic(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(analytic(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));

  Mask mask = Mask::columns(1, {true, false});
  const Tensor masked = softmax_rows(tape.constant(Tensor::matrix({{5.0, 9.0}})), &mask).value();
  CHECK(masked(0, 0) == 1.0);
  CHECK(masked(0, 1) == 0.0);

  Mask none(2, 2, true);
  none.set(1, 0, false);
  none.set(1, 1, false);
  try {
    softmax_rows(tape.constant(Tensor(2, 2)), &none);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
}

TEST_CASE("backward on simple losses") {
  Tape tape;
  Var x = tape.variable(Tensor::matrix({{1.0, -2.0}, {0.5, 4.0}}));
  Var s = sum(x);
  tape.backward(s);
  CHECK(tape.grad(x) == Tensor(2, 2, 1.0));

  Tape t2;
  Var y = t2.variable(Tensor::scalar(3.0));
  Var sq = mul(y, y);
  t2.backward(sq);
  CHECK(t2.grad(y).item() == 6.0);

  Tape t3;
  Var z = t3.variable(Tensor(2, 2));
  CHECK_THROWS_AS(t3.backward(z), ShapeError);
}

TEST_CASE("finite-difference check: linear and tanh objectives") {
  std::mt19937_64 rng(7);
  ModelParameters params;
  params.add("w", testing::random_tensor(3, 1, rng));
  const Tensor x = testing::random_tensor(1, 3, rng);

  const Objective linear = [&](ParameterBinding& b) { return matmul(b.tape().constant(x), b("w")); };
  const GradCheckReport lin = finite_diff_check(linear, params);
  CHECK(lin.passed);
  CHECK(lin.worst_relative_error < 1e-9);

  const Objective squashed = [&](ParameterBinding& b) { return tanh(matmul(b.tape().constant(x), b("w"))); };
  const GradCheckReport th = finite_diff_check(squashed, params);
  CHECK(th.passed);
  CHECK(th.worst_relative_error < 1e-6);

  // Analytic gradient of tanh(w.x) is (1 - tanh^2) x.
  Tape tape;
  ParameterBinding binding(tape, params);
  Var loss = squashed(binding);
  const Gradients g = backward(loss, binding);
  const double th_val = value_of(loss);
  for (std::size_t i = 0; i < 3; ++i) CHECK(g.at("w")[i] == doctest::Approx((1 - th_val * th_val) * x(0, i)).epsilon(1e-12));
}

TEST_CASE("finite-difference check: non-finite objective is reported") {
  ModelParameters params;
  params.add("w", Tensor::scalar(1.0));
  const Objective blowup = [](ParameterBinding& b) { return scale(exp(scale(b("w"), 1e6)), 1.0); };
  const GradCheckReport r = finite_diff_check(blowup, params);
  CHECK_FALSE(r.passed);
  CHECK_FALSE(r.error.empty());
}

TEST_CASE("gradients of every primitive match central differences") {
  std::mt19937_64 rng(11);
  ModelParameters params;
  params.add("a", testing::random_tensor(3, 4, rng));
  params.add("b", testing::random_tensor(4, 4, rng));
  params.add("r", testing::random_tensor(1, 4, rng));
  params.add("k", testing::random_tensor(2, 2, rng));
  params.add("table", testing::random_tensor(5, 4, rng), ParamKind::padded_table);
  const Tensor weights = testing::random_tensor(3, 4, rng);
  Mask mask = Mask::columns(3, {true, false, true, true});
  const std::vector<std::size_t> idx = {2, 0, 4, 2};
  const std::vector<double> labels = {1, 0, 1};

  const Objective everything = [&](ParameterBinding& bind) {
    Tape& t = bind.tape();
    Var a = bind("a"), b = bind("b"), r = bind("r");
    Var prod = matmul(a, b);                                   // 3x4
    Var mixed = add(mul(tanh(prod), sigmoid(a)), r);           // row broadcast
    Var soft = softmax_rows(sub(mixed, scale(a, 0.3)), &mask);
    Var leaky = leaky_relu(neg(softplus(exp(scale(a, 0.2)))), 0.01);
    Var tr = matmul(transpose(a), soft);                       // 4x4
    Var cat = concat_cols(std::vector<Var>{slice_cols(tr, 0, 2), slice_cols(tr, 2, 4)});
    Var stacked = concat_rows(std::vector<Var>{slice_rows(cat, 0, 2), slice_rows(cat, 2, 4)});
    Var re = reshape(stacked, 8, 2);
    Var blocks = block_weighted_sum(tanh(matmul(re, transpose(re))), bind("k"));  // 4x4
    Var gathered = gather_rows(bind("table"), idx, true);     // 4x4
    Var rep = repeat_rows(r, 3);
    Var logits = matmul(add(mul(soft, rep), leaky), slice_cols(transpose(r), 0, 1));
    Var masked = mask_rows(logits, {true, false, true});
    Var total = add(sum(mul(blocks, gathered)), scale_by(sum(mul(mixed, t.constant(weights))), sum(masked)));
    return add(total, bce_with_logits(logits, labels, {true, true, false}));
  };
  const GradCheckReport rep = finite_diff_check(everything, params, 1e-6, 1e-6);
  CHECK(rep.error.empty());
  for (const ParameterCheck& c : rep.parameters) CHECK_MESSAGE(c.passed, c.name, " relative error ", c.relative_error);
}

TEST_CASE("padding row of a gathered table receives no gradient") {
  ModelParameters params;
  params.add("table", Tensor::matrix({{0, 0}, {1, 2}, {3, 4}}), ParamKind::padded_table);
  Tape tape;
  ParameterBinding binding(tape, params);
  const std::vector<std::size_t> idx = {0, 2, 0};
  Var loss = sum(gather_rows(binding("table"), idx, true));
  const Gradients g = backward(loss, binding);
  CHECK(g.at("table")(0, 0) == 0.0);
  CHECK(g.at("table")(0, 1) == 0.0);
  CHECK(g.at("table")(2, 0) == 1.0);
  CHECK(g.at("table")(1, 0) == 0.0);
}

TEST_CASE("zero-extent tensors flow through matmul and concat") {
  Tape tape;
  Var empty = tape.constant(Tensor(0, 3));
  Var w = tape.constant(Tensor(3, 2, 1.0));
  const Tensor out = matmul(empty, w).value();
  CHECK(out.rows() == 0);
  CHECK(out.cols() == 2);
  Var wide = concat_cols(std::vector<Var>{empty, tape.constant(Tensor(0, 2))});
  CHECK(wide.cols() == 5);
}
