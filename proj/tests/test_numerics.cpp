#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "heg/errors.hpp"
#include "heg/numerics.hpp"
#include "oracles.hpp"

using heg::Matrix;

TEST_CASE("matmul examples") {
  const Matrix a{{1, 2}, {3, 4}};
  CHECK(heg::matmul(Matrix::identity(2), a) == a);
  CHECK(heg::matmul(Matrix{{1, 0}}, Matrix{{0}, {5}}) == Matrix{{0}});
  CHECK(heg::matmul(a, Matrix{{5}, {6}}) == Matrix{{17}, {39}});
}

TEST_CASE("matmul shape mismatch names both shapes") {
  try {
    heg::matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL("expected DimensionError");
  } catch (const heg::DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
}

TEST_CASE("matmul is associative on random triples") {
  heg::Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = fixture::random_matrix(3, 4, rng);
    const Matrix b = fixture::random_matrix(4, 5, rng);
    const Matrix c = fixture::random_matrix(5, 2, rng);
    CHECK(heg::max_relative_error(heg::matmul(heg::matmul(a, b), c), heg::matmul(a, heg::matmul(b, c))) < 1e-9);
  }
}

TEST_CASE("transposed products agree with explicit transposes") {
  heg::Rng rng(12);
  const Matrix a = fixture::random_matrix(4, 3, rng);
  const Matrix b = fixture::random_matrix(4, 5, rng);
  const Matrix c = fixture::random_matrix(6, 3, rng);
  CHECK(heg::max_relative_error(heg::matmul_tn(a, b), heg::matmul(heg::transpose(a), b)) < 1e-14);
  CHECK(heg::max_relative_error(heg::matmul_nt(a, c), heg::matmul(a, heg::transpose(c))) < 1e-14);
}

TEST_CASE("softmax over rows normalizes each column") {
  CHECK(heg::softmax_over_rows(Matrix{{0, 0}, {0, 0}}) == Matrix{{0.5, 0.5}, {0.5, 0.5}});
  CHECK(heg::softmax_over_rows(Matrix{{3, -7}}) == Matrix{{1, 1}});
  const Matrix s = heg::softmax_over_rows(Matrix{{0}, {std::log(3.0)}});
  CHECK(s(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(s(1, 0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK_THROWS_AS(heg::softmax_over_rows(Matrix()), heg::DomainError);

  heg::Rng rng(13);
  Matrix m = fixture::random_matrix(7, 5, rng);
  const Matrix out = heg::softmax_over_rows(m);
  for (std::size_t j = 0; j < out.cols(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < out.rows(); ++i) sum += out(i, j);
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  // Adding a constant to one whole column changes nothing.
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, 2) += 123.0;
  CHECK(heg::max_relative_error(heg::softmax_over_rows(m), out) < 1e-12);
}

TEST_CASE("softmax survives large inputs") {
  const Matrix s = heg::softmax_over_rows(Matrix{{1000}, {1000}});
  CHECK(s(0, 0) == 0.5);
  CHECK(heg::softmax_over_cols(Matrix{{-1000, 1000}}).all_finite());
}

TEST_CASE("xavier bounds and determinism") {
  const Matrix one = heg::xavier_init(1, 1, 5);
  CHECK(std::abs(one(0, 0)) <= std::sqrt(3.0));
  CHECK(heg::xavier_init(4, 6, 9) == heg::xavier_init(4, 6, 9));
  CHECK_FALSE(heg::xavier_init(4, 6, 9) == heg::xavier_init(4, 6, 10));
  const Matrix big = heg::xavier_init(1024, 512, 3);
  CHECK(heg::max_abs(big) <= std::sqrt(6.0 / 1536.0));
  CHECK(heg::max_abs(big) > 0.9 * std::sqrt(6.0 / 1536.0));
  CHECK_THROWS_AS(heg::xavier_init(0, 3, 1), heg::DomainError);
}

TEST_CASE("adam: zero gradient without decay is a no-op") {
  const Matrix p{{1.5, -2.0}};
  heg::AdamHyper h;
  h.learning_rate = 0.1;
  const auto r = heg::adam_step(p, Matrix(1, 2), heg::AdamState::for_shape(p, h));
  CHECK(r.param == p);
  CHECK(r.state.step == 1);
}

TEST_CASE("adam: first step moves by about the learning rate") {
  const Matrix p{{0.3}};
  heg::AdamHyper h;
  h.learning_rate = 1e-3;
  const auto r = heg::adam_step(p, Matrix{{1.0}}, heg::AdamState::for_shape(p, h));
  CHECK(r.param(0, 0) - 0.3 == doctest::Approx(-1e-3).epsilon(1e-6));
}

TEST_CASE("adam: two steps match the scalar recurrences") {
  heg::AdamHyper h;
  h.learning_rate = 0.01;
  h.weight_decay = 0.5;
  Matrix p{{0.7, -1.2}};
  heg::AdamState st = heg::AdamState::for_shape(p, h);
  oracle::ScalarAdam a{h.learning_rate, h.beta1, h.beta2, h.epsilon, h.weight_decay};
  oracle::ScalarAdam b = a;
  double pa = 0.7;
  double pb = -1.2;
  const Matrix g{{0.25, -0.4}};
  for (int i = 0; i < 2; ++i) {
    auto r = heg::adam_step(p, g, st);
    p = r.param;
    st = r.state;
    pa = a.step(pa, 0.25);
    pb = b.step(pb, -0.4);
  }
  CHECK(p(0, 0) == doctest::Approx(pa).epsilon(1e-14));
  CHECK(p(0, 1) == doctest::Approx(pb).epsilon(1e-14));
  CHECK(st.step == 2);
}

TEST_CASE("adam: lr 0 leaves parameters bit-identical") {
  heg::Rng rng(3);
  const Matrix p = fixture::random_matrix(3, 3, rng);
  heg::AdamHyper h;
  h.learning_rate = 0.0;
  h.weight_decay = 0.5;
  auto st = heg::AdamState::for_shape(p, h);
  Matrix q = p;
  for (int i = 0; i < 5; ++i) heg::adam_step_inplace(q, fixture::random_matrix(3, 3, rng), st);
  CHECK(q == p);
}

TEST_CASE("adam: shape mismatch") {
  const Matrix p(2, 2);
  CHECK_THROWS_AS(heg::adam_step(p, Matrix(2, 3), heg::AdamState::for_shape(p, {})), heg::DimensionError);
}

TEST_CASE("finite differences") {
  const auto sq = [](const Matrix& x) {
    double s = 0.0;
    for (double v : x.values()) s += v * v;
    return s;
  };
  CHECK(heg::finite_diff_gradient(sq, Matrix{{3.0}})(0, 0) == doctest::Approx(6.0).epsilon(1e-6));
  const Matrix zero = heg::finite_diff_gradient([](const Matrix&) { return 4.2; }, Matrix{{1, 2, 3}});
  CHECK(zero == Matrix(1, 3));
  const Matrix prod =
      heg::finite_diff_gradient([](const Matrix& x) { return x(0, 0) * x(0, 1); }, Matrix{{2.0, 5.0}});
  CHECK(prod(0, 0) == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(prod(0, 1) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK_THROWS_AS(heg::finite_diff_gradient([](const Matrix&) { return std::nan(""); }, Matrix{{1.0}}),
                  heg::NumericError);
  CHECK_THROWS_AS(heg::finite_diff_gradient(sq, Matrix{{1.0}}, 0.0), heg::DomainError);
}

TEST_CASE("rng is reproducible and derive_seed separates streams") {
  heg::Rng a(42);
  heg::Rng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(heg::derive_seed(1, 0) != heg::derive_seed(1, 1));
  CHECK(heg::derive_seed(1, 0) != heg::derive_seed(2, 0));
  heg::Rng r(7);
  auto perm = r.permutation(50);
  std::sort(perm.begin(), perm.end());
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(perm[i] == i);
  for (int i = 0; i < 1000; ++i) {
    const auto v = r.between(-3, 3);
    CHECK(v >= -3);
    CHECK(v <= 3);
  }
}
