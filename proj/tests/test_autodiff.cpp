#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>

#include "fd_check.hpp"
#include "mmn/autodiff.hpp"
#include "mmn/rng.hpp"
#include "mmn/tensor.hpp"

using namespace mmn;

namespace {

Tensor random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::vector(n);
  for (std::size_t i = 0; i < n; ++i) t(i) = rng.uniform(lo, hi);
  return t;
}

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Tensor t = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t(i) = rng.uniform(-1.0, 1.0);
  return t;
}

// Weighted-sum readout so the probe mixes all output entries.
NodeId weighted(Tape& t, NodeId out, const Tensor& w) {
  return t.sum(t.mul(out, t.leaf(w)));
}

}  // namespace

TEST_CASE("matmul identity and zero") {
  Tape t;
  NodeId eye = t.leaf(Tensor::from_rows({{1, 0}, {0, 1}}));
  NodeId a = t.leaf(Tensor::from_rows({{1, 2}, {3, 4}}));
  NodeId c = t.matmul(eye, a);
  CHECK(t.value(c) == t.value(a));

  NodeId row = t.leaf(Tensor::from_rows({{1, 2}}));
  NodeId zeros = t.leaf(Tensor::from_rows({{0}, {0}}));
  NodeId z = t.matmul(row, zeros);
  CHECK(t.value(z)(0, 0) == 0.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape t;
  NodeId a = t.leaf(Tensor::matrix(3, 4));
  NodeId b = t.leaf(Tensor::matrix(5, 2));
  try {
    t.matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    std::string msg = e.what();
    CHECK(msg.find("3x4") != std::string::npos);
    CHECK(msg.find("5x2") != std::string::npos);
  }
}

TEST_CASE("matmul gradient of sum matches finite differences") {
  Rng rng(42);
  Tensor a = random_matrix(rng, 3, 4);
  Tensor b = random_matrix(rng, 4, 2);
  double err = testing::max_grad_err(
      {&a, &b}, [](Tape& t, const std::vector<NodeId>& l) { return t.sum(t.matmul(l[0], l[1])); });
  CHECK(err < 1e-6);
}

TEST_CASE("softmax examples") {
  Tape t;
  NodeId s = t.softmax(t.leaf({0.0, 0.0}));
  CHECK(t.value(s)(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t.value(s)(1) == doctest::Approx(0.5).epsilon(1e-12));

  NodeId s2 = t.softmax(t.leaf({std::log(2.0), 0.0}));
  CHECK(t.value(s2)(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(t.value(s2)(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(t.softmax(t.leaf(Tensor::vector(0))), InputError);
}

TEST_CASE("softmax shift invariance and simplex property") {
  Rng rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    std::size_t n = 1 + rng.index(8);
    Tensor v = random_vector(rng, n, -1e3, 1e3);
    Tensor shifted = v;
    double c = rng.uniform(-100.0, 100.0);
    for (std::size_t i = 0; i < n; ++i) shifted(i) += c;

    Tape t;
    const Tensor& y = t.value(t.softmax(t.leaf(v)));
    const Tensor& y2 = t.value(t.softmax(t.leaf(shifted)));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(y(i) > 0.0);
      CHECK(y(i) <= 1.0);
      CHECK(std::fabs(y(i) - y2(i)) < 1e-12);
      total += y(i);
    }
    CHECK(std::fabs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("cosine similarity examples") {
  Tape t;
  auto cs = [&](Tensor a, Tensor b) {
    return t.value(t.cosine_similarity(t.leaf(std::move(a)), t.leaf(std::move(b))))(0);
  };
  CHECK(cs({1, 0}, {1, 0}) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(cs({1, 0}, {0, 1}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cs({1, 2}, {2, 1}) == doctest::Approx(0.8).epsilon(1e-9));
  CHECK(cs({0, 0}, {1, 2}) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cosine similarity symmetry and scale invariance") {
  Rng rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    std::size_t n = 2 + rng.index(6);
    Tensor a = random_vector(rng, n);
    Tensor b = random_vector(rng, n);
    double alpha = rng.uniform(0.1, 10.0);
    double beta = rng.uniform(0.1, 10.0);
    Tensor sa = a, sb = b;
    for (std::size_t i = 0; i < n; ++i) {
      sa(i) *= alpha;
      sb(i) *= beta;
    }
    Tape t;
    double k1 = t.value(t.cosine_similarity(t.leaf(a), t.leaf(b)))(0);
    double k2 = t.value(t.cosine_similarity(t.leaf(b), t.leaf(a)))(0);
    double k3 = t.value(t.cosine_similarity(t.leaf(sa), t.leaf(sb)))(0);
    CHECK(std::fabs(k1 - k2) < 1e-15);
    CHECK(std::fabs(k1 - k3) < 1e-9);
    CHECK(k1 >= -1.0 - 1e-12);
    CHECK(k1 <= 1.0 + 1e-12);
  }
}

TEST_CASE("backward trivia") {
  Tape t;
  NodeId x = t.leaf({1.0, 2.0, 3.0, 4.0, 5.0});
  NodeId loss = t.sum(x);
  t.backward(loss);
  for (std::size_t i = 0; i < 5; ++i) CHECK(t.grad(x)(i) == 1.0);

  Tape t2;
  NodeId z = t2.leaf({0.0});
  NodeId th = t2.tanh(z);
  t2.backward(th);
  CHECK(t2.grad(z)(0) == 1.0);
}

TEST_CASE("backward rejects non-scalar loss") {
  Tape t;
  NodeId x = t.leaf({1.0, 2.0});
  CHECK_THROWS_AS(t.backward(x), InputError);
}

TEST_CASE("gradient accumulates across fan-out") {
  Tape t;
  NodeId x = t.leaf({3.0});
  NodeId y = t.add(x, x);
  t.backward(y);
  CHECK(t.grad(x)(0) == 2.0);
}

TEST_CASE("per-op gradient checks vs central finite differences") {
  Rng rng(1234);

  SUBCASE("matmul matrix-matrix") {
    Tensor a = random_matrix(rng, 3, 4), b = random_matrix(rng, 4, 2);
    Tensor w = random_matrix(rng, 3, 2);
    double err = testing::max_grad_err({&a, &b}, [&](Tape& t, const std::vector<NodeId>& l) {
      return weighted(t, t.matmul(l[0], l[1]), w);
    });
    CHECK(err < 1e-6);
  }
  SUBCASE("matmul matrix-vector") {
    Tensor a = random_matrix(rng, 3, 4), x = random_vector(rng, 4);
    Tensor w = random_vector(rng, 3);
    double err = testing::max_grad_err({&a, &x}, [&](Tape& t, const std::vector<NodeId>& l) {
      return weighted(t, t.matmul(l[0], l[1]), w);
    });
    CHECK(err < 1e-6);
  }
  SUBCASE("add and mul") {
    Tensor a = random_vector(rng, 6), b = random_vector(rng, 6);
    Tensor w = random_vector(rng, 6);
    double err = testing::max_grad_err({&a, &b}, [&](Tape& t, const std::vector<NodeId>& l) {
      return weighted(t, t.mul(t.add(l[0], l[1]), l[1]), w);
    });
    CHECK(err < 1e-6);
  }
  SUBCASE("mul scalar broadcast") {
    Tensor s = Tensor::scalar(0.7), b = random_vector(rng, 5);
    Tensor w = random_vector(rng, 5);
    double err = testing::max_grad_err({&s, &b}, [&](Tape& t, const std::vector<NodeId>& l) {
      return weighted(t, t.mul(l[0], l[1]), w);
    });
    CHECK(err < 1e-6);
    err = testing::max_grad_err({&s, &b}, [&](Tape& t, const std::vector<NodeId>& l) {
      return weighted(t, t.mul(l[1], l[0]), w);
    });
    CHECK(err < 1e-6);
  }
  SUBCASE("tanh sigmoid") {
    Tensor a = random_vector(rng, 7);
    Tensor w = random_vector(rng, 7);
    double err = testing::max_grad_err({&a}, [&](Tape& t, const std::vector<NodeId>& l) {
      return weighted(t, t.tanh(l[0]), w);
    });
    CHECK(err < 1e-6);
    err = testing::max_grad_err({&a}, [&](Tape& t, const std::vector<NodeId>& l) {
      return weighted(t, t.sigmoid(l[0]), w);
    });
    CHECK(err < 1e-6);
  }
  SUBCASE("concat axis 0 and 1") {
    Tensor a = random_vector(rng, 3), b = random_vector(rng, 3);
    Tensor w0 = random_vector(rng, 6);
    double err = testing::max_grad_err({&a, &b}, [&](Tape& t, const std::vector<NodeId>& l) {
      std::vector<NodeId> parts{l[0], l[1]};
      return weighted(t, t.concat(parts, 0), w0);
    });
    CHECK(err < 1e-6);
    Tensor w1 = random_matrix(rng, 3, 2);
    err = testing::max_grad_err({&a, &b}, [&](Tape& t, const std::vector<NodeId>& l) {
      std::vector<NodeId> parts{l[0], l[1]};
      return weighted(t, t.concat(parts, 1), w1);
    });
    CHECK(err < 1e-6);
  }
  SUBCASE("softmax") {
    Tensor a = random_vector(rng, 5);
    Tensor w = random_vector(rng, 5);
    double err = testing::max_grad_err({&a}, [&](Tape& t, const std::vector<NodeId>& l) {
      return weighted(t, t.softmax(l[0]), w);
    });
    CHECK(err < 1e-6);
  }
  SUBCASE("cosine similarity") {
    Tensor a = random_vector(rng, 6), b = random_vector(rng, 6);
    double err = testing::max_grad_err({&a, &b}, [&](Tape& t, const std::vector<NodeId>& l) {
      return t.cosine_similarity(l[0], l[1]);
    });
    CHECK(err < 1e-6);
  }
  SUBCASE("sum mean") {
    Tensor a = random_vector(rng, 9);
    double err = testing::max_grad_err(
        {&a}, [&](Tape& t, const std::vector<NodeId>& l) { return t.mean(l[0]); });
    CHECK(err < 1e-6);
  }
  SUBCASE("log with floor") {
    Tensor a = random_vector(rng, 5, 0.2, 2.0);
    Tensor w = random_vector(rng, 5);
    double err = testing::max_grad_err({&a}, [&](Tape& t, const std::vector<NodeId>& l) {
      return weighted(t, t.log(l[0], 1e-12), w);
    });
    CHECK(err < 1e-6);
  }
  SUBCASE("pick select_row select_col") {
    Tensor a = random_matrix(rng, 4, 5);
    Tensor wr = random_vector(rng, 5), wc = random_vector(rng, 4);
    double err = testing::max_grad_err({&a}, [&](Tape& t, const std::vector<NodeId>& l) {
      return weighted(t, t.select_row(l[0], 2), wr);
    });
    CHECK(err < 1e-6);
    err = testing::max_grad_err({&a}, [&](Tape& t, const std::vector<NodeId>& l) {
      return weighted(t, t.select_col(l[0], 3), wc);
    });
    CHECK(err < 1e-6);
    Tensor v = random_vector(rng, 6);
    err = testing::max_grad_err(
        {&v}, [&](Tape& t, const std::vector<NodeId>& l) { return t.pick(l[0], 4); });
    CHECK(err < 1e-6);
  }
}

TEST_CASE("tape replay determinism") {
  Rng rng(99);
  Tensor a = random_matrix(rng, 4, 4);
  Tensor x = random_vector(rng, 4);

  auto run = [&](Tensor& gout) {
    Tape t;
    NodeId la = t.leaf(a), lx = t.leaf(x);
    NodeId y = t.softmax(t.tanh(t.matmul(la, lx)));
    NodeId loss = t.sum(t.mul(y, y));
    t.backward(loss);
    gout = t.grad(la);
    return t.value(loss)(0);
  };
  Tensor g1, g2;
  double v1 = run(g1), v2 = run(g2);
  CHECK(v1 == v2);
  CHECK(g1 == g2);
}

TEST_CASE("log clamp zeroes gradient below the floor") {
  Tape t;
  NodeId x = t.leaf({1e-15});
  NodeId y = t.log(x, 1e-12);
  CHECK(t.value(y)(0) == doctest::Approx(std::log(1e-12)));
  t.backward(y);
  CHECK(t.grad(x)(0) == 0.0);
}
