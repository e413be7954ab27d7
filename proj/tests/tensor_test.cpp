#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <stdexcept>

#include "ctxnmt/adam.hpp"
#include "ctxnmt/checkpoint.hpp"
#include "ctxnmt/graph.hpp"
#include "ctxnmt/tensor.hpp"
#include "gradcheck.hpp"

using ctxnmt::AdamState;
using ctxnmt::Graph;
using ctxnmt::Tensor;
using ctxnmt::testing::max_rel_err;
using ctxnmt::testing::random_tensor;

TEST(Tensor, InvariantsEnforced) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5, 0.0)), std::invalid_argument);
  EXPECT_THROW(Tensor({0}), std::invalid_argument);
  EXPECT_THROW(Tensor({2, -1}), std::invalid_argument);
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_DOUBLE_EQ(t.at(1, 2), 1.5);
  EXPECT_EQ(ctxnmt::shape_str(t.shape), "2x3");
}

TEST(Tensor, GradBuffers) {
  Tensor t({3}, std::vector<double>{1.0, 2.0, 3.0}, true);
  EXPECT_FALSE(t.grad.has_value());
  t.ensure_grad();
  ASSERT_TRUE(t.grad.has_value());
  (*t.grad)[1] = 7.0;
  t.zero_grad();
  EXPECT_DOUBLE_EQ((*t.grad)[1], 0.0);
}

TEST(Graph, SoftmaxUniformOnZeros) {
  Graph g;
  auto y = g.softmax(g.constant({3}, {0.0, 0.0, 0.0}));
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(g.value(y).at(i), 1.0 / 3.0, 1e-15);
  }
}

TEST(Graph, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(7);
  for (int seed = 0; seed < 100; ++seed) {
    Tensor x = random_tensor({3, 5}, rng, -30.0, 30.0, false);
    Graph g;
    const Tensor& y = g.value(g.softmax(g.constant(x)));
    for (int r = 0; r < 3; ++r) {
      double sum = 0.0;
      for (int c = 0; c < 5; ++c) {
        EXPECT_GT(y.at(r, c), 0.0);
        sum += y.at(r, c);
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(Graph, SigmoidAtZero) {
  Graph g;
  EXPECT_DOUBLE_EQ(g.value(g.sigmoid(g.constant({1}, {0.0}))).at(0), 0.5);
}

TEST(Graph, MatmulIdentity) {
  std::mt19937_64 rng(11);
  Tensor eye({3, 3});
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  for (int trial = 0; trial < 10; ++trial) {
    Tensor v = random_tensor({3}, rng, -5.0, 5.0, false);
    Graph g;
    const Tensor& out = g.value(g.matmul(g.constant(eye), g.constant(v)));
    ASSERT_EQ(out.shape, v.shape);
    for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(out.at(i), v.at(i));
  }
}

TEST(Graph, MatmulRankCases) {
  Graph g;
  auto A = g.constant({2, 3}, {1, 2, 3, 4, 5, 6});
  auto B = g.constant({3, 2}, {7, 8, 9, 10, 11, 12});
  const Tensor& C = g.value(g.matmul(A, B));
  ASSERT_EQ(C.shape, (std::vector<int>{2, 2}));
  EXPECT_DOUBLE_EQ(C.at(0, 0), 58.0);
  EXPECT_DOUBLE_EQ(C.at(0, 1), 64.0);
  EXPECT_DOUBLE_EQ(C.at(1, 0), 139.0);
  EXPECT_DOUBLE_EQ(C.at(1, 1), 154.0);

  auto v = g.constant({3}, {1, 0, -1});
  const Tensor& Av = g.value(g.matmul(A, v));  // (2x3)(3) -> (2)
  ASSERT_EQ(Av.shape, (std::vector<int>{2}));
  EXPECT_DOUBLE_EQ(Av.at(0), -2.0);
  EXPECT_DOUBLE_EQ(Av.at(1), -2.0);

  auto u = g.constant({2}, {1, 2});
  const Tensor& uA = g.value(g.matmul(u, A));  // (2)(2x3) -> (3)
  ASSERT_EQ(uA.shape, (std::vector<int>{3}));
  EXPECT_DOUBLE_EQ(uA.at(0), 9.0);
  EXPECT_DOUBLE_EQ(uA.at(1), 12.0);
  EXPECT_DOUBLE_EQ(uA.at(2), 15.0);

  const Tensor& dot = g.value(g.matmul(v, v));  // (3)(3) -> {1}
  ASSERT_EQ(dot.shape, (std::vector<int>{1}));
  EXPECT_DOUBLE_EQ(dot.at(0), 2.0);
}

TEST(Graph, ShapeDiagnosticsNamePrimitiveAndShapes) {
  Graph g;
  auto A = g.constant({2, 3}, std::vector<double>(6, 0.0));
  auto v = g.constant({4}, std::vector<double>(4, 0.0));
  try {
    g.matmul(A, v);
    FAIL() << "expected shape mismatch";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("4"), std::string::npos) << msg;
  }
  EXPECT_THROW(g.add(A, v), std::invalid_argument);
  EXPECT_THROW(g.mul(A, v), std::invalid_argument);
  EXPECT_THROW(g.concat({A, v}, 0), std::invalid_argument);
  EXPECT_THROW(g.mean_rows(v), std::invalid_argument);
  EXPECT_THROW(g.nll(A, 0), std::invalid_argument);
}

TEST(Graph, GatherRejectsOutOfRangeWithPosition) {
  Graph g;
  auto M = g.constant({2, 2}, {1, 2, 3, 4});
  try {
    g.gather_rows(M, {0, 5});
    FAIL() << "expected out-of-range index";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("5"), std::string::npos) << msg;
    EXPECT_NE(msg.find("position 1"), std::string::npos) << msg;
  }
}

TEST(Graph, BackwardSumOfSquares) {
  Tensor w({2}, std::vector<double>{1.0, 2.0}, true);
  Graph g;
  auto wn = g.param(w);
  auto loss = g.matmul(g.mul(wn, wn), g.constant({2}, {1.0, 1.0}));
  g.backward(loss);
  ASSERT_TRUE(w.grad.has_value());
  EXPECT_DOUBLE_EQ((*w.grad)[0], 2.0);
  EXPECT_DOUBLE_EQ((*w.grad)[1], 4.0);
}

TEST(Graph, UnreachedParameterGetsZeroGradient) {
  Tensor w({2}, std::vector<double>{1.0, 2.0}, true);
  Tensor p({3}, std::vector<double>{9.0, 9.0, 9.0}, true);
  p.ensure_grad();
  Graph g;
  auto wn = g.param(w);
  g.param(p);  // on the tape, no path to the loss
  g.backward(g.matmul(wn, wn));
  for (double v : *p.grad) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Graph, BackwardAccumulatesAcrossCalls) {
  Tensor w({2}, std::vector<double>{3.0, -1.0}, true);
  Graph g;
  auto loss = g.matmul(g.param(w), g.param(w));
  g.backward(loss);
  const double once = (*w.grad)[0];
  g.backward(loss);
  EXPECT_DOUBLE_EQ((*w.grad)[0], 2.0 * once);
}

TEST(Graph, NonScalarLossRejected) {
  Tensor w({2}, std::vector<double>{1.0, 2.0}, true);
  Graph g;
  auto wn = g.param(w);
  EXPECT_THROW(g.backward(wn), std::invalid_argument);
}

// Central finite differences over every primitive, composed with a random
// projection so upstream gradients are non-uniform. 100 seeds, tolerance
// 1e-5 (double precision).
TEST(Gradcheck, AllPrimitivesHundredSeeds) {
  double worst = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(1000 + seed);

    {  // matmul, all four rank cases, plus add/mul/tanh/sigmoid
      Tensor A = random_tensor({3, 4}, rng);
      Tensor B = random_tensor({4, 2}, rng);
      Tensor u = random_tensor({3}, rng);
      Tensor v = random_tensor({2}, rng);
      Tensor bias = random_tensor({2}, rng);
      auto build = [&](Graph& g) {
        auto C = g.matmul(g.param(A), g.param(B));          // 3x2
        auto r = g.matmul(g.param(u), C);                   // 2
        auto s = g.sigmoid(g.add(g.mul(r, g.param(v)), g.param(bias)));
        return g.matmul(g.tanh(s), g.param(v));             // dot -> {1}
      };
      worst = std::max(worst, max_rel_err(build, {&A, &B, &u, &v, &bias}));
    }

    {  // softmax (rank-2) + concat + mean_rows
      Tensor X = random_tensor({2, 3}, rng);
      Tensor Y = random_tensor({2, 3}, rng);
      Tensor proj = random_tensor({6}, rng);
      auto build = [&](Graph& g) {
        auto sm = g.softmax(g.concat({g.param(X), g.param(Y)}, 1));  // 2x6
        return g.matmul(g.mean_rows(sm), g.param(proj));
      };
      worst = std::max(worst, max_rel_err(build, {&X, &Y, &proj}));
    }

    {  // concat along axis 0 + stack_rows + gather with a repeated index
      Tensor E = random_tensor({4, 3}, rng);
      Tensor a = random_tensor({3}, rng);
      Tensor b = random_tensor({3}, rng);
      Tensor proj = random_tensor({3}, rng);
      auto build = [&](Graph& g) {
        auto rows = g.gather_rows(g.param(E), {2, 0, 2});  // repeats row 2
        auto stacked = g.stack_rows({g.param(a), g.param(b)});
        auto all = g.concat({rows, stacked}, 0);  // 5x3
        return g.matmul(g.mean_rows(all), g.param(proj));
      };
      worst = std::max(worst, max_rel_err(build, {&E, &a, &b, &proj}));
    }

    {  // nll through a small network
      Tensor W = random_tensor({3, 5}, rng);
      Tensor x = random_tensor({3}, rng);
      std::uniform_int_distribution<int> pick(0, 4);
      const int target = pick(rng);
      auto build = [&](Graph& g) {
        return g.nll(g.matmul(g.param(x), g.param(W)), target);
      };
      worst = std::max(worst, max_rel_err(build, {&W, &x}));
    }

    {  // gather_row (squeezed) + softmax rank-1
      Tensor E = random_tensor({4, 3}, rng);
      Tensor proj = random_tensor({3}, rng);
      auto build = [&](Graph& g) {
        auto row = g.gather_row(g.param(E), 1);
        return g.matmul(g.softmax(row), g.param(proj));
      };
      worst = std::max(worst, max_rel_err(build, {&E, &proj}));
    }
  }
  EXPECT_LE(worst, 1e-5) << "worst relative error " << worst;
}

TEST(Gradcheck, DeterministicBackward) {
  auto run = [](std::vector<double>* out) {
    std::mt19937_64 rng(42);
    Tensor A = random_tensor({3, 3}, rng);
    Tensor x = random_tensor({3}, rng);
    Graph g;
    auto loss = g.nll(g.matmul(g.param(x), g.tanh(g.param(A))), 1);
    g.backward(loss);
    *out = *A.grad;
    out->insert(out->end(), x.grad->begin(), x.grad->end());
    out->push_back(g.scalar_value(loss));
  };
  std::vector<double> first, second;
  run(&first);
  run(&second);
  ASSERT_EQ(first.size(), second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    EXPECT_EQ(first[i], second[i]);  // bitwise
  }
}

TEST(Adam, HandDerivedFirstStep) {
  // t=1: m̂ = g, v̂ = g², so p ← p − lr·g/(|g| + ε) = 1 − 0.1/(1+1e-8).
  Tensor p({1}, std::vector<double>{1.0}, true);
  p.ensure_grad();
  (*p.grad)[0] = 1.0;
  AdamState st;
  st.learning_rate = 0.1;
  st.clip_threshold = 10.0;  // keep clipping out of the way
  ctxnmt::adam_step({&p}, st);
  EXPECT_NEAR(p.values[0], 1.0 - 0.1 / (1.0 + 1e-8), 1e-12);
  EXPECT_NEAR(p.values[0], 0.9, 1e-8);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, GlobalNormClipScalesJointly) {
  Tensor a({2}, std::vector<double>{0.0, 0.0}, true);
  Tensor b({1}, std::vector<double>{0.0}, true);
  a.ensure_grad();
  b.ensure_grad();
  (*a.grad) = {0.0, 2.0};
  (*b.grad) = {0.0};
  EXPECT_DOUBLE_EQ(ctxnmt::global_grad_norm({&a, &b}), 2.0);
  AdamState st;
  st.clip_threshold = 1.0;
  const double scale = ctxnmt::adam_step({&a, &b}, st);
  EXPECT_DOUBLE_EQ(scale, 0.5);  // effective grad [0, 1]: direction preserved
  EXPECT_DOUBLE_EQ(a.values[0], 0.0);
  EXPECT_LT(a.values[1], 0.0);
  EXPECT_DOUBLE_EQ(b.values[0], 0.0);
}

TEST(Adam, BelowThresholdNotScaled) {
  Tensor a({1}, std::vector<double>{0.0}, true);
  a.ensure_grad();
  (*a.grad)[0] = 0.25;
  AdamState st;
  EXPECT_DOUBLE_EQ(ctxnmt::adam_step({&a}, st), 1.0);
}

TEST(Adam, ZeroGradientsAdvanceCounterOnly) {
  Tensor a({3}, std::vector<double>{1.0, -2.0, 3.0}, true);
  a.zero_grad();
  AdamState st;
  ctxnmt::adam_step({&a}, st);
  EXPECT_EQ(st.step, 1);
  EXPECT_DOUBLE_EQ(a.values[0], 1.0);
  EXPECT_DOUBLE_EQ(a.values[1], -2.0);
  EXPECT_DOUBLE_EQ(a.values[2], 3.0);
}

TEST(Adam, NonFiniteGradientRejectedStateUntouched) {
  Tensor a({2}, std::vector<double>{1.0, 2.0}, true);
  a.zero_grad();
  AdamState st;
  ctxnmt::adam_step({&a}, st);  // initialize moments
  const auto m_before = st.m;
  const auto v_before = st.v;
  (*a.grad)[1] = std::nan("");
  EXPECT_THROW(ctxnmt::adam_step({&a}, st), std::runtime_error);
  EXPECT_EQ(st.step, 1);
  EXPECT_EQ(st.m, m_before);
  EXPECT_EQ(st.v, v_before);
  EXPECT_DOUBLE_EQ(a.values[0], 1.0);

  (*a.grad)[1] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(ctxnmt::adam_step({&a}, st), std::runtime_error);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, DeterministicUpdates) {
  auto run = [](std::vector<double>* out) {
    std::mt19937_64 rng(5);
    Tensor w = random_tensor({4}, rng);
    AdamState st;
    for (int i = 0; i < 10; ++i) {
      w.zero_grad();
      for (std::size_t j = 0; j < 4; ++j) (*w.grad)[j] = w.values[j] * 0.3 - 0.1;
      ctxnmt::adam_step({&w}, st);
    }
    *out = w.values;
  };
  std::vector<double> first, second;
  run(&first);
  run(&second);
  for (std::size_t i = 0; i < first.size(); ++i) EXPECT_EQ(first[i], second[i]);
}

TEST(Checkpoint, BitwiseRoundTrip) {
  std::mt19937_64 rng(3);
  ctxnmt::NamedTensors saved;
  saved.emplace_back("embeddings/source", random_tensor({7, 4}, rng, -10, 10, false));
  saved.emplace_back("bias", random_tensor({5}, rng, -1e300, 1e300, false));
  Tensor special({4}, std::vector<double>{0.0, -0.0, 5e-324, 1.7976931348623157e308});
  saved.emplace_back("edge-cases", special);

  const std::string path = ::testing::TempDir() + "roundtrip.ctx";
  ctxnmt::save_checkpoint(path, saved);
  const auto loaded = ctxnmt::load_checkpoint(path);
  ASSERT_EQ(loaded.size(), saved.size());
  for (std::size_t i = 0; i < saved.size(); ++i) {
    EXPECT_EQ(loaded[i].first, saved[i].first);
    EXPECT_EQ(loaded[i].second.shape, saved[i].second.shape);
    ASSERT_EQ(loaded[i].second.numel(), saved[i].second.numel());
    for (std::size_t j = 0; j < saved[i].second.numel(); ++j) {
      // bit-level comparison; EXPECT_EQ would conflate 0.0 with -0.0
      EXPECT_EQ(std::bit_cast<std::uint64_t>(loaded[i].second.values[j]),
                std::bit_cast<std::uint64_t>(saved[i].second.values[j]));
    }
  }
}

TEST(Checkpoint, FormatDiagnostics) {
  const std::string dir = ::testing::TempDir();
  EXPECT_THROW(ctxnmt::load_checkpoint(dir + "does-not-exist.ctx"), std::runtime_error);

  const std::string bad_magic = dir + "bad-magic.ctx";
  {
    std::ofstream out(bad_magic, std::ios::binary);
    out << "NOTMAGIC" << std::string(8, '\0');
  }
  try {
    ctxnmt::load_checkpoint(bad_magic);
    FAIL() << "expected bad magic";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
  }

  const std::string truncated = dir + "truncated.ctx";
  {
    ctxnmt::NamedTensors one;
    one.emplace_back("w", Tensor({2, 2}, {1, 2, 3, 4}));
    ctxnmt::save_checkpoint(truncated, one);
    // chop the last 8 bytes off the payload
    std::ifstream in(truncated, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    std::ofstream out(truncated, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 8));
  }
  EXPECT_THROW(ctxnmt::load_checkpoint(truncated), std::runtime_error);

  const std::string trailing = dir + "trailing.ctx";
  {
    ctxnmt::NamedTensors one;
    one.emplace_back("w", Tensor({1}, {1.0}));
    ctxnmt::save_checkpoint(trailing, one);
    std::ofstream out(trailing, std::ios::binary | std::ios::app);
    out << "junk";
  }
  EXPECT_THROW(ctxnmt::load_checkpoint(trailing), std::runtime_error);
}

TEST(Checkpoint, PreservesEntryOrder) {
  ctxnmt::NamedTensors saved;
  saved.emplace_back("z", Tensor({1}, {1.0}));
  saved.emplace_back("a", Tensor({1}, {2.0}));
  saved.emplace_back("m", Tensor({1}, {3.0}));
  const std::string path = ::testing::TempDir() + "order.ctx";
  ctxnmt::save_checkpoint(path, saved);
  const auto loaded = ctxnmt::load_checkpoint(path);
  ASSERT_EQ(loaded.size(), 3u);
  EXPECT_EQ(loaded[0].first, "z");
  EXPECT_EQ(loaded[1].first, "a");
  EXPECT_EQ(loaded[2].first, "m");
}
