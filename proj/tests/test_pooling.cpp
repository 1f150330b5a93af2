#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "heg/errors.hpp"
#include "heg/numerics.hpp"
#include "heg/pooling.hpp"
#include "oracles.hpp"

using heg::Matrix;
using heg::PoolingHead;
using heg::PoolingMode;

namespace {

std::vector<std::size_t> one_graph(std::size_t n) { return std::vector<std::size_t>(n, 0); }

double column_sum(const Matrix& m, std::size_t j, std::size_t from, std::size_t to) {
  double s = 0.0;
  for (std::size_t i = from; i < to; ++i) s += m(i, j);
  return s;
}

}  // namespace

TEST_CASE("pooling names") {
  for (PoolingMode m : heg::kAllPoolingModes) CHECK(heg::parse_pooling(heg::to_string(m)) == m);
  CHECK_THROWS_AS(heg::parse_pooling("median"), heg::DomainError);
}

TEST_CASE("a single node pools to itself in every mode") {
  const Matrix x{{0.5, -2.0, 3.0}};
  for (PoolingMode m : heg::kAllPoolingModes) {
    const auto head = PoolingHead::create(3, 2, m, 1);
    CHECK(heg::max_relative_error(heg::pool(head, x, one_graph(1)).pooled, x) < 1e-15);
  }
}

TEST_CASE("identical nodes") {
  const Matrix x{{1, 2}, {1, 2}, {1, 2}};
  const auto head = PoolingHead::create(2, 2, PoolingMode::attention, 2);
  const auto r = heg::pool(head, x, one_graph(3));
  CHECK(heg::max_relative_error(r.pooled, Matrix{{1, 2}}) < 1e-14);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(r.trace.gates(i, j) == doctest::Approx(1.0 / 3.0));
  const auto sum = PoolingHead::create(2, 2, PoolingMode::sum, 2);
  CHECK(heg::pool(sum, x, one_graph(3)).pooled == Matrix{{3, 6}});
}

TEST_CASE("attention matches the per-feature oracle") {
  heg::Rng rng(3);
  auto head = PoolingHead::create(4, 3, PoolingMode::attention, 3);
  head.b_gate = fixture::random_matrix(1, 4, rng);
  const Matrix x = fixture::random_matrix(6, 4, rng);
  const auto r = heg::pool(head, x, one_graph(6));
  const auto expected = oracle::attention_pool(x, head.w_gate, head.b_gate);
  for (std::size_t j = 0; j < 4; ++j) CHECK(r.pooled(0, j) == doctest::Approx(expected[j]).epsilon(1e-12));
}

TEST_CASE("baseline readouts") {
  const Matrix x{{1, 5}, {3, -1}, {2, 7}};
  auto pooled = [&](PoolingMode m) { return heg::pool(PoolingHead::create(2, 2, m, 4), x, one_graph(3)).pooled; };
  CHECK(pooled(PoolingMode::mean) == Matrix{{2, 11.0 / 3.0}});
  CHECK(pooled(PoolingMode::sum) == Matrix{{6, 11}});
  CHECK(pooled(PoolingMode::max) == Matrix{{3, 7}});
}

TEST_CASE("classification and loss") {
  auto head = PoolingHead::create(2, 3, PoolingMode::mean, 5);
  head.w_cls.fill(0);
  head.b_cls.fill(0);
  const Matrix p = heg::classify(head, Matrix{{4, -1}});
  for (std::size_t c = 0; c < 3; ++c) CHECK(p(0, c) == doctest::Approx(1.0 / 3.0));
  const int label3[] = {2};
  CHECK(heg::cross_entropy_loss(Matrix(1, 3), label3).loss == doctest::Approx(std::log(3.0)));

  const int labels[] = {0, 1};
  const auto l = heg::cross_entropy_loss(Matrix(2, 2), labels);
  CHECK(l.loss == doctest::Approx(std::log(2.0)));
  CHECK(l.grad_logits == Matrix{{-0.25, 0.25}, {0.25, -0.25}});

  const int big_label[] = {0};
  const auto big = heg::cross_entropy_loss(Matrix{{1000, 0}}, big_label);
  CHECK(std::isfinite(big.loss));
  CHECK(big.loss == doctest::Approx(0.0));
  const int bad[] = {2};
  CHECK_THROWS(heg::cross_entropy_loss(Matrix(1, 2), bad));
}

TEST_CASE("gate columns sum to one per graph") {
  heg::Rng rng(6);
  const auto head = PoolingHead::create(5, 2, PoolingMode::attention, 6);
  const Matrix x = fixture::random_matrix(9, 5, rng);
  const std::vector<std::size_t> membership{0, 0, 0, 1, 1, 2, 2, 2, 2};
  const auto r = heg::pool(head, x, membership);
  const std::size_t bounds[] = {0, 3, 5, 9};
  for (std::size_t g = 0; g < 3; ++g)
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(std::abs(column_sum(r.trace.gates, j, bounds[g], bounds[g + 1]) - 1.0) < 1e-10);
}

TEST_CASE("readouts are permutation invariant and batch independent") {
  heg::Rng rng(7);
  const Matrix a = fixture::random_matrix(5, 4, rng);
  const Matrix b = fixture::random_matrix(3, 4, rng);
  const auto perm = rng.permutation(5);
  Matrix both(8, 4);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) both(i, j) = a(i, j);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) both(5 + i, j) = b(i, j);
  const std::vector<std::size_t> membership{0, 0, 0, 0, 0, 1, 1, 1};
  for (PoolingMode m : heg::kAllPoolingModes) {
    CAPTURE(heg::to_string(m));
    const auto head = PoolingHead::create(4, 2, m, 8);
    const Matrix base = heg::pool(head, a, one_graph(5)).pooled;
    const Matrix moved = heg::pool(head, heg::gather_rows(a, perm), one_graph(5)).pooled;
    CHECK(heg::max_relative_error(base, moved, 1e-12) < 1e-9);
    const Matrix batched = heg::pool(head, both, membership).pooled;
    const Matrix alone = heg::pool(head, b, one_graph(3)).pooled;
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(batched(0, j) == doctest::Approx(base(0, j)).epsilon(1e-12));
      CHECK(batched(1, j) == doctest::Approx(alone(0, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("max routes gradient to the first argmax") {
  const auto head = PoolingHead::create(2, 2, PoolingMode::max, 9);
  const Matrix x{{1, 4}, {3, 4}, {3, 0}};
  const auto r = heg::pool(head, x, one_graph(3));
  const auto g = heg::pool_backward(head, r.trace, Matrix{{1, 2}});
  CHECK(g.grad_input == Matrix{{0, 2}, {1, 0}, {0, 0}});
}

TEST_CASE("membership errors") {
  const auto head = PoolingHead::create(2, 2, PoolingMode::mean, 10);
  const std::vector<std::size_t> gap{0, 2};
  CHECK_THROWS(heg::pool(head, Matrix(2, 2), gap));
  const std::vector<std::size_t> short_membership{0};
  CHECK_THROWS(heg::pool(head, Matrix(2, 2), short_membership));
}

TEST_CASE("pooling and head gradients match finite differences") {
  heg::Rng rng(11);
  const Matrix x = fixture::random_matrix(7, 3, rng);
  const std::vector<std::size_t> membership{0, 0, 0, 1, 1, 1, 1};
  const Matrix up = fixture::random_matrix(2, 3, rng);
  for (PoolingMode m : heg::kAllPoolingModes) {
    CAPTURE(heg::to_string(m));
    auto head = PoolingHead::create(3, 2, m, 12);
    head.b_gate = fixture::random_matrix(1, 3, rng);
    auto objective = [&](const PoolingHead& h, const Matrix& in) {
      const Matrix p = heg::pool(h, in, membership).pooled;
      double s = 0.0;
      for (std::size_t i = 0; i < p.values().size(); ++i) s += p.values()[i] * up.values()[i];
      return s;
    };
    const auto g = heg::pool_backward(head, heg::pool(head, x, membership).trace, up);
    CHECK(heg::max_relative_error(
              g.grad_input, heg::finite_diff_gradient([&](const Matrix& in) { return objective(head, in); }, x),
              1e-6) < 1e-5);
    if (m == PoolingMode::attention) {
      PoolingHead probe = head;
      auto fw = [&](const Matrix& w) {
        probe.w_gate = w;
        return objective(probe, x);
      };
      CHECK(heg::max_relative_error(g.w_gate, heg::finite_diff_gradient(fw, head.w_gate), 1e-6) < 1e-5);
      probe = head;
      auto fb = [&](const Matrix& b) {
        probe.b_gate = b;
        return objective(probe, x);
      };
      CHECK(heg::max_relative_error(g.b_gate, heg::finite_diff_gradient(fb, head.b_gate), 1e-6) < 1e-5);
    }
  }

  auto head = PoolingHead::create(3, 2, PoolingMode::mean, 13);
  const Matrix pooled = fixture::random_matrix(2, 3, rng);
  const int labels[] = {1, 0};
  auto loss_of = [&](const PoolingHead& h, const Matrix& p) {
    return heg::cross_entropy_loss(heg::class_logits(h, p), labels).loss;
  };
  const auto l = heg::cross_entropy_loss(heg::class_logits(head, pooled), labels);
  const auto hg = heg::head_backward(head, pooled, l.grad_logits);
  CHECK(heg::max_relative_error(
            hg.grad_pooled, heg::finite_diff_gradient([&](const Matrix& p) { return loss_of(head, p); }, pooled),
            1e-6) < 1e-5);
  PoolingHead probe = head;
  auto fw = [&](const Matrix& w) {
    probe.w_cls = w;
    return loss_of(probe, pooled);
  };
  CHECK(heg::max_relative_error(hg.w_cls, heg::finite_diff_gradient(fw, head.w_cls), 1e-6) < 1e-5);
}
