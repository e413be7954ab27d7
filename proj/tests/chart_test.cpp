#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctxnmt/chart.hpp"
#include "ctxnmt/rng.hpp"

using ctxnmt::axis_report;
using ctxnmt::build_local_chart;
using ctxnmt::ChartOptions;
using ctxnmt::edit_distance;
using ctxnmt::EmbeddingIndex;
using ctxnmt::load_embeddings;
using ctxnmt::LocalChart;
using ctxnmt::local_chart_pca;
using ctxnmt::nearest_neighbors;
using ctxnmt::NeighborMetric;
using ctxnmt::save_embeddings;
using ctxnmt::Xorshift64Star;

namespace {

double gaussian(Xorshift64Star& rng) {
  double u1 = rng.uniform();
  while (u1 <= 0.0) u1 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * rng.uniform());
}

std::vector<double> random_unit(std::size_t dim, Xorshift64Star& rng) {
  std::vector<double> v(dim);
  for (double& x : v) x = gaussian(rng);
  double n = 0.0;
  for (const double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// covariance of the chart points (center first), mean-centered, 1/n
std::vector<std::vector<double>> chart_covariance(
    const std::vector<double>& center,
    const std::vector<std::vector<double>>& neighbors) {
  std::vector<std::vector<double>> points{center};
  points.insert(points.end(), neighbors.begin(), neighbors.end());
  const std::size_t n = points.size(), dim = center.size();
  std::vector<double> mean(dim, 0.0);
  for (const auto& p : points) {
    for (std::size_t k = 0; k < dim; ++k) mean[k] += p[k];
  }
  for (double& v : mean) v /= static_cast<double>(n);
  std::vector<std::vector<double>> cov(dim, std::vector<double>(dim, 0.0));
  for (const auto& p : points) {
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]);
      }
    }
  }
  for (auto& row : cov) {
    for (double& v : row) v /= static_cast<double>(n);
  }
  return cov;
}

void check_chart_algebra(const std::vector<double>& center,
                         const std::vector<std::vector<double>>& neighbors,
                         const LocalChart& chart) {
  const std::size_t num_axes = chart.axes.size();
  ASSERT_EQ(num_axes, std::min(center.size(), neighbors.size() + 1));
  ASSERT_EQ(chart.eigenvalues.size(), num_axes);
  ASSERT_EQ(chart.coordinates.size(), neighbors.size() + 1);

  for (std::size_t i = 0; i < num_axes; ++i) {
    for (std::size_t j = 0; j < num_axes; ++j) {
      EXPECT_NEAR(dot(chart.axes[i], chart.axes[j]), i == j ? 1.0 : 0.0, 1e-8);
    }
  }
  for (std::size_t i = 0; i + 1 < num_axes; ++i) {
    EXPECT_GE(chart.eigenvalues[i], chart.eigenvalues[i + 1]);
  }
  for (const double v : chart.eigenvalues) EXPECT_GE(v, -1e-10);

  const auto cov = chart_covariance(center, neighbors);
  for (std::size_t i = 0; i < num_axes; ++i) {
    for (std::size_t r = 0; r < center.size(); ++r) {
      EXPECT_NEAR(dot(cov[r], chart.axes[i]),
                  chart.eigenvalues[i] * chart.axes[i][r], 1e-8)
          << "axis " << i << " row " << r;
    }
  }

  // reconstruction with all axes kept
  std::vector<std::vector<double>> points{center};
  points.insert(points.end(), neighbors.begin(), neighbors.end());
  std::vector<double> mean(center.size(), 0.0);
  for (const auto& p : points) {
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += p[k];
  }
  for (double& v : mean) v /= static_cast<double>(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t k = 0; k < mean.size(); ++k) {
      double rebuilt = mean[k];
      for (std::size_t j = 0; j < num_axes; ++j) {
        rebuilt += chart.coordinates[i][j] * chart.axes[j][k];
      }
      EXPECT_NEAR(rebuilt, points[i][k], 1e-8) << "point " << i << " dim " << k;
    }
  }
}

}  // namespace

TEST(EditDistance, KnownValues) {
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3);
  EXPECT_EQ(edit_distance("", "abc"), 3);
  EXPECT_EQ(edit_distance("same", "same"), 0);
  EXPECT_EQ(edit_distance("flaw", "lawn"), 2);
}

TEST(Embeddings, FileRoundTripAndExactBytes) {
  EmbeddingIndex index;
  index.dimension = 2;
  index.words = {"a", "b"};
  index.vectors = {{0.5, -1.25}, {2.0, 3.0}};
  const std::string path = "/tmp/ctxnmt_chart_vecs.txt";
  save_embeddings(path, index);

  std::ifstream in(path);
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  EXPECT_EQ(bytes, "2 2\na 0.5 -1.25\nb 2 3\n");

  const EmbeddingIndex loaded = load_embeddings(path);
  EXPECT_EQ(loaded.words, index.words);
  EXPECT_EQ(loaded.vectors, index.vectors);
  EXPECT_EQ(loaded.dimension, 2);
  std::remove(path.c_str());
}

TEST(Embeddings, LoadRejectsMalformedFiles) {
  const std::string path = "/tmp/ctxnmt_chart_bad.txt";
  const auto write = [&](const char* content) {
    std::ofstream(path) << content;
  };
  write("");
  EXPECT_THROW(load_embeddings(path), std::runtime_error);
  write("not numbers\na 1 2\n");
  EXPECT_THROW(load_embeddings(path), std::runtime_error);
  write("2 2\na 1 2\n");  // one row missing
  EXPECT_THROW(load_embeddings(path), std::runtime_error);
  write("1 3\na 1 2\n");  // too few values
  EXPECT_THROW(load_embeddings(path), std::runtime_error);
  write("1 1\na 1 2\n");  // too many values
  EXPECT_THROW(load_embeddings(path), std::runtime_error);
  write("2 1\na 1\na 2\n");  // duplicate word
  EXPECT_THROW(load_embeddings(path), std::runtime_error);
  EXPECT_THROW(load_embeddings("/tmp/ctxnmt_chart_no_such_file.txt"),
               std::runtime_error);
  std::remove(path.c_str());
}

TEST(Neighbors, OneHotTieBreaksLexicographically) {
  EmbeddingIndex index;
  index.dimension = 3;
  index.words = {"query", "zebra", "apple"};
  index.vectors = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  // both remaining words have cosine 0 to the query
  EXPECT_EQ(nearest_neighbors(index, "query", 2),
            (std::vector<std::string>{"apple"}));
  EXPECT_EQ(nearest_neighbors(index, "query", 3),
            (std::vector<std::string>{"apple", "zebra"}));
}

TEST(Neighbors, DuplicateVectorRanksFirst) {
  EmbeddingIndex index;
  index.dimension = 2;
  index.words = {"query", "twin", "other"};
  index.vectors = {{3, 4}, {3, 4}, {4, 3}};
  const auto got = nearest_neighbors(index, "query", 3);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0], "twin");  // similarity exactly 1.0
  EXPECT_EQ(got[1], "other");
}

TEST(Neighbors, ValidatesArguments) {
  EmbeddingIndex index;
  index.dimension = 1;
  index.words = {"a", "b"};
  index.vectors = {{1}, {2}};
  EXPECT_THROW(nearest_neighbors(index, "a", 0), std::invalid_argument);
  EXPECT_THROW(nearest_neighbors(index, "a", 3), std::invalid_argument);
}

TEST(Neighbors, UnknownWordSuggestsClosestSpellings) {
  EmbeddingIndex index;
  index.dimension = 1;
  index.words = {"apple", "apply", "maple"};
  index.vectors = {{1}, {2}, {3}};
  try {
    nearest_neighbors(index, "appel", 2);
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("appel"), std::string::npos);
    EXPECT_NE(msg.find("apple"), std::string::npos);
  }
}

TEST(Neighbors, MatchesFullSortOracle) {
  Xorshift64Star rng(2024);
  const std::size_t count = 100, dim = 8;
  EmbeddingIndex index;
  index.dimension = static_cast<int>(dim);
  for (std::size_t i = 0; i < count; ++i) {
    index.words.push_back("w" + std::to_string(i));
    index.vectors.push_back(random_unit(dim, rng));
  }

  for (const std::size_t q : {0ul, 17ul, 42ul, 99ul}) {
    const auto& qv = index.vectors[q];
    std::vector<std::pair<double, std::string>> oracle;
    for (std::size_t i = 0; i < count; ++i) {
      if (i == q) continue;
      oracle.emplace_back(dot(index.vectors[i], qv), index.words[i]);
    }
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    std::vector<std::string> expected;
    for (const auto& [sim, w] : oracle) expected.push_back(w);

    EXPECT_EQ(nearest_neighbors(index, index.words[q], static_cast<int>(count)),
              expected);
    // on unit vectors the Euclidean ranking coincides with the cosine one
    EXPECT_EQ(nearest_neighbors(index, index.words[q], static_cast<int>(count),
                                NeighborMetric::kEuclidean),
              expected);
  }
}

TEST(Pca, RejectsDegenerateArguments) {
  EXPECT_THROW(local_chart_pca({1.0, 2.0}, {{1.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(local_chart_pca({1.0, 2.0}, {{1.0, 1.0}, {1.0}}),
               std::invalid_argument);
}

TEST(Pca, IdenticalPointsAreDegenerate) {
  const std::vector<double> c = {0.25, -1.5, 3.0};
  const LocalChart chart = local_chart_pca(c, {c, c, c});
  EXPECT_TRUE(chart.degenerate);
  ASSERT_EQ(chart.eigenvalues.size(), 3u);
  for (const double v : chart.eigenvalues) EXPECT_EQ(v, 0.0);
  for (std::size_t i = 0; i < chart.axes.size(); ++i) {
    for (std::size_t k = 0; k < c.size(); ++k) {
      EXPECT_EQ(chart.axes[i][k], i == k ? 1.0 : 0.0);
    }
  }
  for (const auto& row : chart.coordinates) {
    for (const double v : row) EXPECT_EQ(v, 0.0);
  }

  LocalChart named = chart;
  named.center = "x";
  named.words = {"a", "b", "c"};
  const auto report = axis_report(named, 0, 5);
  EXPECT_TRUE(report.words.empty());
  EXPECT_FALSE(report.note.empty());
}

TEST(Pca, SymmetricPairSpansOneDimension) {
  const std::vector<double> u = {0.6, 0.8, 0.0, 0.0};
  const std::vector<double> mid = {1.0, -2.0, 0.5, 3.0};
  const double a = 0.5;
  std::vector<double> plus = mid, minus = mid;
  for (std::size_t k = 0; k < u.size(); ++k) {
    plus[k] += a * u[k];
    minus[k] -= a * u[k];
  }

  const LocalChart chart = local_chart_pca(mid, {plus, minus});
  check_chart_algebra(mid, {plus, minus}, chart);

  // spread 2a^2/3 along u, nothing elsewhere; sign rule makes axis_1 = +u
  EXPECT_NEAR(chart.eigenvalues[0], 2.0 * a * a / 3.0, 1e-12);
  EXPECT_LE(std::fabs(chart.eigenvalues[1]), 1e-12);
  for (std::size_t k = 0; k < u.size(); ++k) {
    EXPECT_NEAR(chart.axes[0][k], u[k], 1e-10);
  }
  EXPECT_NEAR(chart.coordinates[0][0], 0.0, 1e-12);
  EXPECT_NEAR(chart.coordinates[1][0], a, 1e-12);
  EXPECT_NEAR(chart.coordinates[2][0], -a, 1e-12);
}

TEST(Pca, AxisReportOrdersBySignedCoordinate) {
  const std::vector<double> u = {0.6, 0.8, 0.0, 0.0};
  const std::vector<double> mid = {1.0, -2.0, 0.5, 3.0};
  std::vector<double> plus = mid, minus = mid;
  for (std::size_t k = 0; k < u.size(); ++k) {
    plus[k] += 0.5 * u[k];
    minus[k] -= 0.5 * u[k];
  }
  LocalChart chart = local_chart_pca(mid, {plus, minus});
  chart.center = "mid";
  chart.words = {"plus", "minus"};

  const auto all = axis_report(chart, 0, 3);
  EXPECT_TRUE(all.note.empty());
  EXPECT_EQ(all.words, (std::vector<std::string>{"minus", "(mid)", "plus"}));

  // the two largest-magnitude words carry opposite signs
  const auto pair = axis_report(chart, 0, 2);
  EXPECT_EQ(pair.words, (std::vector<std::string>{"minus", "plus"}));

  EXPECT_TRUE(axis_report(chart, 0, 0).words.empty());
  EXPECT_TRUE(axis_report(chart, 0, 0).note.empty());

  // eigenvalue below tolerance
  const auto degenerate = axis_report(chart, 1, 3);
  EXPECT_TRUE(degenerate.words.empty());
  EXPECT_FALSE(degenerate.note.empty());

  const auto out_of_range = axis_report(chart, 9, 3);
  EXPECT_TRUE(out_of_range.words.empty());
  EXPECT_FALSE(out_of_range.note.empty());

  EXPECT_THROW(axis_report(chart, 0, -1), std::invalid_argument);
}

TEST(Pca, CenteringFlagSelectsOrigin) {
  // center 0, neighbours u and 3u: mean-centred coordinates {-4/3,-1/3,5/3}
  // give lambda 14/9; x'-centred coordinates {0,1,3} give lambda 10/3
  const std::vector<double> zero(3, 0.0);
  const std::vector<double> u = {1.0, 0.0, 0.0};
  const std::vector<double> u3 = {3.0, 0.0, 0.0};

  const LocalChart mean_chart = local_chart_pca(zero, {u, u3});
  EXPECT_NEAR(mean_chart.eigenvalues[0], 14.0 / 9.0, 1e-12);
  EXPECT_NEAR(mean_chart.coordinates[0][0], -4.0 / 3.0, 1e-12);

  ChartOptions at_query;
  at_query.center_at_query = true;
  const LocalChart query_chart = local_chart_pca(zero, {u, u3}, at_query);
  EXPECT_NEAR(query_chart.eigenvalues[0], 10.0 / 3.0, 1e-12);
  EXPECT_EQ(query_chart.coordinates[0][0], 0.0);
  EXPECT_NEAR(query_chart.coordinates[2][0], 3.0, 1e-12);
}

TEST(Pca, PlantedTwoPlaneRecovery) {
  // deterministic coefficients with exactly zero sample correlation keep the
  // only perturbation at the sigma = 1e-3 noise level
  struct Config {
    std::size_t dim, m;
    std::uint64_t seed;
  };
  for (const Config cfg : {Config{10, 11, 7001}, Config{30, 7, 7002}}) {
    Xorshift64Star rng(cfg.seed);
    const auto g1 = random_unit(cfg.dim, rng);
    auto v = random_unit(cfg.dim, rng);
    const double proj = dot(v, g1);
    double vn = 0.0;
    for (std::size_t k = 0; k < cfg.dim; ++k) {
      v[k] -= proj * g1[k];
      vn += v[k] * v[k];
    }
    vn = std::sqrt(vn);
    for (double& x : v) x /= vn;
    const auto& u = g1;

    std::vector<double> center(cfg.dim);
    for (double& x : center) x = gaussian(rng);

    std::vector<std::vector<double>> neighbors;
    std::vector<double> a_coef;
    for (std::size_t i = 0; i < cfg.m; ++i) {
      const double angle =
          2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(cfg.m);
      const double a = 1.4 * std::cos(angle), b = 0.42 * std::sin(angle);
      a_coef.push_back(a);
      std::vector<double> p = center;
      for (std::size_t k = 0; k < cfg.dim; ++k) {
        p[k] += a * u[k] + b * v[k] + 1e-3 * gaussian(rng);
      }
      neighbors.push_back(std::move(p));
    }

    const LocalChart chart = local_chart_pca(center, neighbors);
    check_chart_algebra(center, neighbors, chart);
    EXPECT_GE(std::fabs(dot(chart.axes[0], u)), 0.99) << "dim " << cfg.dim;
    EXPECT_GE(std::fabs(dot(chart.axes[1], v)), 0.99) << "dim " << cfg.dim;
    EXPECT_GT(chart.eigenvalues[0], chart.eigenvalues[1]);
    EXPECT_GT(chart.eigenvalues[1], chart.eigenvalues[2]);

    // axis-1 report must order the dominated words by their a_i
    LocalChart named = chart;
    named.center = "center";
    for (std::size_t i = 0; i < cfg.m; ++i) {
      named.words.push_back("n" + std::to_string(i));
    }
    const auto report = axis_report(named, 0, static_cast<int>(cfg.m + 1));
    ASSERT_GE(report.words.size(), 2u);
    std::vector<double> reported_a;
    for (const auto& w : report.words) {
      if (w.front() == '(') continue;  // the centre marked in place
      reported_a.push_back(a_coef[static_cast<std::size_t>(
          std::stoi(w.substr(1)))]);
    }
    // sign convention may flip the axis as a whole relative to u; the cosine
    // wheel deals some a_i out twice, so equal pairs may land either way and
    // the comparison carries the noise scale
    const bool flipped = dot(chart.axes[0], u) < 0.0;
    for (std::size_t i = 0; i + 1 < reported_a.size(); ++i) {
      if (flipped) {
        EXPECT_GE(reported_a[i], reported_a[i + 1] - 0.01);
      } else {
        EXPECT_LE(reported_a[i], reported_a[i + 1] + 0.01);
      }
    }

    // bitwise determinism of the whole decomposition
    const LocalChart again = local_chart_pca(center, neighbors);
    EXPECT_EQ(chart.axes, again.axes);
    EXPECT_EQ(chart.eigenvalues, again.eigenvalues);
    EXPECT_EQ(chart.coordinates, again.coordinates);
  }
}

TEST(Chart, BuildFromIndexEndToEnd) {
  EmbeddingIndex index;
  index.dimension = 4;
  index.words = {"q", "near1", "near2", "far"};
  index.vectors = {
      {1.0, 0.0, 0.0, 0.0},
      {0.9, 0.1, 0.0, 0.0},
      {0.8, 0.2, 0.0, 0.0},
      {0.0, 0.0, 1.0, 0.0},
  };
  const LocalChart chart = build_local_chart(index, "q", 3);
  EXPECT_EQ(chart.center, "q");
  EXPECT_EQ(chart.words, (std::vector<std::string>{"near1", "near2"}));
  EXPECT_EQ(chart.axes.size(), 3u);  // min(dimension, n)
  EXPECT_EQ(chart.coordinates.size(), 3u);
  EXPECT_FALSE(chart.degenerate);

  const auto report = axis_report(chart, 0, 3);
  EXPECT_EQ(report.words.size(), 3u);
  EXPECT_NE(std::find(report.words.begin(), report.words.end(), "(q)"),
            report.words.end());

  EXPECT_THROW(build_local_chart(index, "nope", 3), std::invalid_argument);
}
