#include "doctest.h"
#include "mir/cross_item.hpp"
#include "mir/errors.hpp"
#include "reference_model.hpp"
#include "support.hpp"

using namespace mir;

namespace {

LstmWeights constant_weights(Tape& tape, const Tensor& wx, const Tensor& wh, const Tensor& b) {
  return {tape.constant(wx), tape.constant(wh), tape.constant(b)};
}

}  // namespace

TEST_CASE("intra-set attention: single row, identical rows and the scalar reference") {
  std::mt19937_64 rng(21);
  Tape tape;
  const Tensor one = testing::random_tensor(1, 5, rng);
  CHECK(max_abs_diff(intra_set_attention(tape.constant(one), {true}, 1).value(), one) < 1e-15);

  Tensor same(4, 3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) same(i, j) = 0.1 * static_cast<double>(j + 1);
  CHECK(max_abs_diff(intra_set_attention(tape.constant(same), std::vector<bool>(4, true), 1).value(), same) < 1e-15);

  for (std::size_t heads : {1, 2, 3}) {
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor V = testing::random_tensor(4, 6, rng);
      const Tensor got = intra_set_attention(tape.constant(V), std::vector<bool>(4, true), heads).value();
      CHECK(max_abs_diff(got, ref::to_tensor(ref::intra_set(ref::from(V), heads))) < 1e-12);
    }
  }
}

TEST_CASE("intra-set attention ignores padded columns") {
  std::mt19937_64 rng(22);
  Tape tape;
  Tensor V = testing::random_tensor(5, 4, rng);
  const Tensor got = intra_set_attention(tape.constant(V), {true, true, true, false, false}, 2).value();
  Tensor real(3, 4);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) real(i, j) = V(i, j);
  const ref::Mat expected = ref::intra_set(ref::from(real), 2);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(got(i, j) == doctest::Approx(expected[i][j]).epsilon(1e-13));
  CHECK_THROWS_AS(intra_set_attention(tape.constant(V), std::vector<bool>(5, true), 3), ShapeError);
}

TEST_CASE("LSTM with zero weights yields zero states") {
  Tape tape;
  const std::size_t d_h = 3;
  std::mt19937_64 rng(23);
  const LstmWeights w = constant_weights(tape, Tensor(4, 4 * d_h), Tensor(d_h, 4 * d_h), Tensor(1, 4 * d_h));
  const Tensor Q = intra_list_encode(tape.constant(testing::random_tensor(5, 4, rng)), w, w, d_h).value();
  CHECK(Q == Tensor(5, 2 * d_h));
}

TEST_CASE("LSTM with one input: both directions agree") {
  std::mt19937_64 rng(24);
  Tape tape;
  const std::size_t d_h = 4;
  const LstmWeights w = constant_weights(tape, testing::random_tensor(3, 4 * d_h, rng),
                                         testing::random_tensor(d_h, 4 * d_h, rng), testing::random_tensor(1, 4 * d_h, rng));
  const Tensor Q = intra_list_encode(tape.constant(testing::random_tensor(1, 3, rng)), w, w, d_h).value();
  for (std::size_t u = 0; u < d_h; ++u) CHECK(Q(0, u) == Q(0, d_h + u));
}

TEST_CASE("LSTM matches the step-by-step scalar recurrence") {
  std::mt19937_64 rng(25);
  const std::size_t d_h = 3;
  for (int trial = 0; trial < 20; ++trial) {
    Tape tape;
    const Tensor X = testing::random_tensor(3 + trial % 4, 5, rng);
    const Tensor fx = testing::random_tensor(5, 4 * d_h, rng), fh = testing::random_tensor(d_h, 4 * d_h, rng),
                 fb = testing::random_tensor(1, 4 * d_h, rng);
    const Tensor bx = testing::random_tensor(5, 4 * d_h, rng), bh = testing::random_tensor(d_h, 4 * d_h, rng),
                 bb = testing::random_tensor(1, 4 * d_h, rng);
    const Tensor Q = intra_list_encode(tape.constant(X), constant_weights(tape, fx, fh, fb),
                                       constant_weights(tape, bx, bh, bb), d_h)
                         .value();
    const ref::Mat f = ref::lstm(ref::from(X), ref::from(fx), ref::from(fh), ref::from(fb)[0], d_h, false);
    const ref::Mat b = ref::lstm(ref::from(X), ref::from(bx), ref::from(bh), ref::from(bb)[0], d_h, true);
    for (std::size_t j = 0; j < X.rows(); ++j)
      for (std::size_t u = 0; u < d_h; ++u) {
        CHECK(std::abs(Q(j, u) - f[j][u]) < 1e-12);
        CHECK(std::abs(Q(j, d_h + u) - b[j][u]) < 1e-12);
      }
  }
}

TEST_CASE("empty history encodes to a 0-row matrix") {
  Tape tape;
  const LstmWeights w = constant_weights(tape, Tensor(2, 8), Tensor(2, 8), Tensor(1, 8));
  const Tensor Q = intra_list_encode(tape.constant(Tensor(0, 2)), w, w, 2).value();
  CHECK(Q.rows() == 0);
  CHECK(Q.cols() == 4);
}
