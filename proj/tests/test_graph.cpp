#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "bdtf/error.hpp"
#include "bdtf/graph.hpp"
#include "bdtf/rng.hpp"

using namespace bdtf;

namespace {

Tensor random_tensor(std::vector<i64> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

// Finite-difference check of d(scalar)/d(inputs) for a graph builder. The builder maps leaf
// ids to a scalar node id.
void fd_check(std::vector<Tensor> inputs,
              const std::function<int(Graph&, const std::vector<int>&)>& build,
              double tol = 1e-7) {
  Graph g;
  std::vector<int> ids;
  for (auto& t : inputs) ids.push_back(g.leaf(t, true));
  const int loss = build(g, ids);
  REQUIRE(g.val(loss).size() == 1);
  g.backward(loss);

  const double h = 1e-6;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (i64 k = 0; k < inputs[i].size(); ++k) {
      auto eval = [&](double delta) {
        Graph g2;
        std::vector<int> ids2;
        for (size_t j = 0; j < inputs.size(); ++j) {
          Tensor t = inputs[j];
          if (j == i) t(k) += delta;
          ids2.push_back(g2.leaf(t, true));
        }
        return g2.val(build(g2, ids2))(0);
      };
      const double fd = (eval(h) - eval(-h)) / (2.0 * h);
      const Tensor& grad = g.grad(ids[i]);
      const double an = grad.empty() ? 0.0 : grad(k);
      CHECK(std::abs(fd - an) < tol * std::max(1.0, std::abs(fd)));
    }
  }
}

}  // namespace

TEST_CASE("add/sub/mul/smul gradients") {
  Rng rng(1);
  fd_check({random_tensor({3, 2}, rng), random_tensor({3, 2}, rng)},
           [](Graph& g, const std::vector<int>& in) {
             return g.sum(g.mul(g.add(in[0], in[1]), g.sub(in[0], g.smul(in[1], 0.7))));
           });
}

TEST_CASE("matmul and add_rowvec gradients") {
  Rng rng(2);
  fd_check({random_tensor({3, 4}, rng), random_tensor({4, 2}, rng), random_tensor({2}, rng)},
           [](Graph& g, const std::vector<int>& in) {
             return g.sum(g.add_rowvec(g.matmul(in[0], in[1], 3, 4, 2), in[2]));
           });
}

TEST_CASE("matmul transpose-variant gradients") {
  Rng rng(21);
  // A stored transposed (k x m), B stored transposed (n x k)
  fd_check({random_tensor({4, 3}, rng), random_tensor({2, 4}, rng)},
           [](Graph& g, const std::vector<int>& in) {
             return g.sum(g.matmul(in[0], in[1], 3, 4, 2, true, true));
           });
  fd_check({random_tensor({4, 3}, rng), random_tensor({4, 2}, rng)},
           [](Graph& g, const std::vector<int>& in) {
             return g.sum(g.matmul(in[0], in[1], 3, 4, 2, true, false));
           });
  fd_check({random_tensor({3, 4}, rng), random_tensor({2, 4}, rng)},
           [](Graph& g, const std::vector<int>& in) {
             return g.sum(g.matmul(in[0], in[1], 3, 4, 2, false, true));
           });
}

TEST_CASE("gelu and sigmoid gradients") {
  Rng rng(3);
  fd_check({random_tensor({5}, rng, -2.0, 2.0)}, [](Graph& g, const std::vector<int>& in) {
    return g.sum(g.mul(g.gelu(in[0]), g.sigmoid(in[0])));
  });
}

TEST_CASE("layer_norm gradients") {
  Rng rng(4);
  fd_check(
      {random_tensor({3, 6}, rng), random_tensor({6}, rng, 0.5, 1.5), random_tensor({6}, rng)},
      [](Graph& g, const std::vector<int>& in) {
        return g.sum(g.mul(g.layer_norm(in[0], in[1], in[2]), in[0]));
      },
      1e-5);
}

TEST_CASE("softmax_rows gradients and masking") {
  Rng rng(5);
  std::vector<std::uint8_t> mask = {1, 0, 1, 1};
  fd_check({random_tensor({2, 4}, rng)}, [&](Graph& g, const std::vector<int>& in) {
    const int p = g.softmax_rows(in[0], &mask);
    return g.sum(g.mul(p, in[0]));
  });

  Graph g;
  const int x = g.leaf(random_tensor({2, 4}, rng));
  const int p = g.softmax_rows(x, &mask);
  for (i64 i = 0; i < 2; ++i) {
    CHECK(g.val(p)(i, 1) == 0.0);
    double row = 0.0;
    for (i64 j = 0; j < 4; ++j) row += g.val(p)(i, j);
    CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
  }

  std::vector<std::uint8_t> all_masked = {0, 0, 0, 0};
  CHECK_THROWS_WITH_AS(g.softmax_rows(x, &all_masked), doctest::Contains("AllKeysMasked"),
                       Error);
}

TEST_CASE("gather, concat, concat_cols, reshape gradients") {
  Rng rng(6);
  auto idx = std::make_shared<std::vector<i64>>(std::vector<i64>{5, 0, 3, 3, 1});
  fd_check({random_tensor({3, 3}, rng), random_tensor({2, 2}, rng)},
           [&](Graph& g, const std::vector<int>& in) {
             const int gathered = g.gather(in[0], idx, {5});
             const int cat = g.concat({gathered, in[1]}, {9});
             const int r = g.reshape(cat, {3, 3});
             const int cc = g.concat_cols({r, in[0]});
             return g.sum(g.mul(cc, cc));
           });
}

TEST_CASE("dot, cosine, scale_by, masked_sse gradients") {
  Rng rng(7);
  const Tensor target = random_tensor({6}, rng);
  Tensor mask({6});
  for (i64 i = 0; i < 6; ++i) mask(i) = i % 2 == 0 ? 1.0 : 0.0;
  fd_check({random_tensor({6}, rng, 0.2, 1.0), random_tensor({6}, rng, 0.2, 1.0)},
           [&](Graph& g, const std::vector<int>& in) {
             const int c = g.cosine(in[0], in[1]);
             const int d = g.dot(in[0], in[1]);
             const int scaled = g.scale_by(in[1], c);
             const int sse = g.masked_sse(scaled, target, mask);
             return g.add(g.add(sse, d), c);
           },
           1e-6);
}

TEST_CASE("masked_sse ignores unmasked positions") {
  Graph g;
  Tensor pred({3}, {1.0, 2.0, 3.0});
  Tensor target({3}, {1.0, 0.0, 5.0});
  Tensor mask({3}, {1.0, 0.0, 1.0});
  const int p = g.leaf(pred, true);
  CHECK(g.val(g.masked_sse(p, target, mask))(0) == doctest::Approx(4.0));
}

TEST_CASE("gradient accumulates when a node feeds several consumers") {
  Rng rng(8);
  fd_check({random_tensor({4}, rng)}, [](Graph& g, const std::vector<int>& in) {
    const int a = g.gelu(in[0]);
    return g.add(g.sum(g.mul(a, in[0])), g.dot(a, a));
  });
}

TEST_CASE("dropout scales kept values and zeroes dropped ones") {
  Rng rng(9);
  Graph g;
  Tensor x = Tensor::full({1000}, 1.0);
  const int id = g.leaf(x, true);
  Rng drop(42);
  const int y = g.dropout(id, 0.25, drop);
  i64 kept = 0;
  for (i64 i = 0; i < 1000; ++i) {
    const double v = g.val(y)(i);
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
    if (v != 0.0) ++kept;
  }
  CHECK(kept > 650);
  CHECK(kept < 850);
}
