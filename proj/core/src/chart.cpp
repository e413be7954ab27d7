#include "ctxnmt/chart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctxnmt {

std::optional<std::size_t> EmbeddingIndex::find(const std::string& word) const {
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i] == word) return i;
  }
  return std::nullopt;
}

EmbeddingIndex load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_embeddings: cannot open " + path);
  }
  std::string header;
  if (!std::getline(in, header)) {
    throw std::runtime_error("load_embeddings: " + path + " is empty");
  }
  std::istringstream hs(header);
  long count = -1, dim = -1;
  std::string extra;
  if (!(hs >> count >> dim) || hs >> extra || count < 1 || dim < 1) {
    throw std::runtime_error(
        "load_embeddings: malformed header \"" + header +
        "\" (expected \"word_count dimension\")");
  }

  EmbeddingIndex index;
  index.dimension = static_cast<int>(dim);
  std::string line;
  for (long row = 0; row < count; ++row) {
    if (!std::getline(in, line)) {
      throw std::runtime_error("load_embeddings: expected " +
                               std::to_string(count) + " rows, got " +
                               std::to_string(row));
    }
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) {
      throw std::runtime_error("load_embeddings: blank row at line " +
                               std::to_string(row + 2));
    }
    std::vector<double> vec(static_cast<std::size_t>(dim));
    for (double& v : vec) {
      if (!(ls >> v)) {
        throw std::runtime_error("load_embeddings: row for \"" + word +
                                 "\" has fewer than " + std::to_string(dim) +
                                 " values (line " + std::to_string(row + 2) +
                                 ")");
      }
    }
    if (ls >> extra) {
      throw std::runtime_error("load_embeddings: row for \"" + word +
                               "\" has more than " + std::to_string(dim) +
                               " values (line " + std::to_string(row + 2) + ")");
    }
    if (index.find(word).has_value()) {
      throw std::runtime_error("load_embeddings: duplicate word \"" + word +
                               "\" (line " + std::to_string(row + 2) + ")");
    }
    index.words.push_back(std::move(word));
    index.vectors.push_back(std::move(vec));
  }
  return index;
}

void save_embeddings(const std::string& path, const EmbeddingIndex& index) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_embeddings: cannot open " + path);
  }
  out << index.size() << ' ' << index.dimension << '\n';
  char buf[40];
  for (std::size_t i = 0; i < index.size(); ++i) {
    out << index.words[i];
    for (const double v : index.vectors[i]) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ' ' << buf;
    }
    out << '\n';
  }
  if (!out) {
    throw std::runtime_error("save_embeddings: write to " + path + " failed");
  }
}

int edit_distance(const std::string& a, const std::string& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::size_t find_or_suggest(const EmbeddingIndex& index,
                            const std::string& word) {
  const auto found = index.find(word);
  if (found.has_value()) return *found;

  std::vector<std::string> candidates = index.words;
  std::sort(candidates.begin(), candidates.end(),
            [&](const std::string& a, const std::string& b) {
              const int da = edit_distance(word, a), db = edit_distance(word, b);
              if (da != db) return da < db;
              return a < b;
            });
  std::string msg = "unknown word \"" + word + "\"; closest spellings:";
  const std::size_t shown = std::min<std::size_t>(3, candidates.size());
  for (std::size_t i = 0; i < shown; ++i) msg += " " + candidates[i];
  throw std::invalid_argument(msg);
}

}  // namespace

std::vector<std::string> nearest_neighbors(const EmbeddingIndex& index,
                                           const std::string& word, int n,
                                           NeighborMetric metric) {
  if (n < 1) {
    throw std::invalid_argument("nearest_neighbors: n must be >= 1, got " +
                                std::to_string(n));
  }
  if (static_cast<std::size_t>(n) > index.size()) {
    throw std::invalid_argument(
        "nearest_neighbors: n-1 = " + std::to_string(n - 1) +
        " neighbours requested but only " + std::to_string(index.size() - 1) +
        " other words exist");
  }
  const std::size_t query = find_or_suggest(index, word);

  // score is "bigger is better" for both metrics
  struct Scored {
    double score;
    std::size_t row;
  };
  std::vector<Scored> scored;
  scored.reserve(index.size() - 1);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (i == query) continue;
    const double s = metric == NeighborMetric::kCosine
                         ? cosine(index.vectors[query], index.vectors[i])
                         : -euclidean(index.vectors[query], index.vectors[i]);
    scored.push_back({s, i});
  }
  std::sort(scored.begin(), scored.end(), [&](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return index.words[a.row] < index.words[b.row];
  });

  std::vector<std::string> result;
  result.reserve(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n - 1; ++i) {
    result.push_back(index.words[scored[static_cast<std::size_t>(i)].row]);
  }
  return result;
}

namespace {

// cyclic Jacobi on a symmetric matrix; eigenvectors come back as rows of V
void jacobi_eigen(std::vector<std::vector<double>> a,
                  std::vector<double>& values,
                  std::vector<std::vector<double>>& vectors) {
  const std::size_t m = a.size();
  vectors.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) vectors[i][i] = 1.0;

  double frob = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) frob += a[i][j] * a[i][j];
  }
  const double tol = 1e-12 * std::max(1.0, std::sqrt(frob));

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) off += 2.0 * a[p][q] * a[p][q];
    }
    if (std::sqrt(off) <= tol) break;

    for (std::size_t p = 0; p + 1 < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        if (a[p][q] == 0.0) continue;
        const double tau = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < m; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double vpk = vectors[p][k], vqk = vectors[q][k];
          vectors[p][k] = c * vpk - s * vqk;
          vectors[q][k] = s * vpk + c * vqk;
        }
      }
    }
  }

  values.resize(m);
  for (std::size_t i = 0; i < m; ++i) values[i] = a[i][i];
}

void fix_sign(std::vector<double>& axis) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (std::fabs(axis[i]) > std::fabs(axis[arg])) arg = i;
  }
  if (axis[arg] < 0.0) {
    for (double& v : axis) v = -v;
  }
}

// extend `axes` to `target` orthonormal vectors using canonical basis
// directions, re-orthogonalizing twice for hygiene
void pad_with_canonical(std::vector<std::vector<double>>& axes,
                        std::size_t target, std::size_t dim) {
  for (std::size_t j = 0; j < dim && axes.size() < target; ++j) {
    std::vector<double> cand(dim, 0.0);
    cand[j] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& v : axes) {
        const double proj = dot(cand, v);
        for (std::size_t k = 0; k < dim; ++k) cand[k] -= proj * v[k];
      }
    }
    const double n = norm(cand);
    if (n > 1e-6) {
      for (double& v : cand) v /= n;
      axes.push_back(std::move(cand));
    }
  }
}

}  // namespace

LocalChart local_chart_pca(const std::vector<double>& center,
                           const std::vector<std::vector<double>>& neighbors,
                           const ChartOptions& options) {
  // one neighbour is the floor: two points still determine a (single-axis)
  // chart, which the command surface relies on for n = 2
  if (neighbors.empty()) {
    throw std::invalid_argument("local_chart_pca: need >= 1 neighbour");
  }
  const std::size_t dim = center.size();
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    if (neighbors[i].size() != dim) {
      throw std::invalid_argument(
          "local_chart_pca: neighbour " + std::to_string(i) + " has dimension " +
          std::to_string(neighbors[i].size()) + ", center has " +
          std::to_string(dim));
    }
  }

  const std::size_t n = neighbors.size() + 1;
  std::vector<std::vector<double>> points;
  points.reserve(n);
  points.push_back(center);
  for (const auto& v : neighbors) points.push_back(v);

  std::vector<double> origin(dim, 0.0);
  if (options.center_at_query) {
    origin = center;
  } else {
    for (const auto& p : points) {
      for (std::size_t k = 0; k < dim; ++k) origin[k] += p[k];
    }
    for (double& v : origin) v /= static_cast<double>(n);
  }

  std::vector<std::vector<double>> centered(n, std::vector<double>(dim));
  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dim; ++k) {
      centered[i][k] = points[i][k] - origin[k];
      spread = std::max(spread, std::fabs(centered[i][k]));
    }
  }

  LocalChart chart;
  const std::size_t num_axes = std::min(dim, n);

  if (spread == 0.0) {
    chart.degenerate = true;
    chart.eigenvalues.assign(num_axes, 0.0);
    chart.axes.assign(num_axes, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < num_axes; ++i) chart.axes[i][i] = 1.0;
    chart.coordinates.assign(n, std::vector<double>(num_axes, 0.0));
    return chart;
  }

  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
  std::vector<std::pair<double, std::vector<double>>> pairs;

  if (dim <= n) {
    std::vector<std::vector<double>> cov(dim, std::vector<double>(dim, 0.0));
    for (const auto& x : centered) {
      for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) cov[i][j] += x[i] * x[j];
      }
    }
    for (auto& row : cov) {
      for (double& v : row) v /= static_cast<double>(n);
    }
    jacobi_eigen(std::move(cov), values, vectors);
    for (std::size_t i = 0; i < dim; ++i) {
      pairs.emplace_back(values[i], std::move(vectors[i]));
    }
  } else {
    // Gram trick: the n x n problem shares the covariance's nonzero spectrum
    std::vector<std::vector<double>> gram(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        gram[i][j] = dot(centered[i], centered[j]) / static_cast<double>(n);
      }
    }
    jacobi_eigen(std::move(gram), values, vectors);

    double max_value = 0.0;
    for (const double v : values) max_value = std::max(max_value, v);
    const double rank_tol = 1e-12 * std::max(1.0, max_value);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return values[a] > values[b];
    });

    std::vector<std::vector<double>> axes;
    for (const std::size_t i : order) {
      if (values[i] <= rank_tol) continue;
      std::vector<double> axis(dim, 0.0);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < dim; ++k) {
          axis[k] += vectors[i][r] * centered[r][k];
        }
      }
      const double len = norm(axis);
      for (double& v : axis) v /= len;
      pairs.emplace_back(values[i], std::move(axis));
      axes.push_back(pairs.back().second);
    }
    pad_with_canonical(axes, num_axes, dim);
    for (std::size_t i = pairs.size(); i < num_axes; ++i) {
      pairs.emplace_back(0.0, axes[i]);
    }
  }

  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  chart.eigenvalues.reserve(num_axes);
  chart.axes.reserve(num_axes);
  for (std::size_t i = 0; i < num_axes; ++i) {
    chart.eigenvalues.push_back(pairs[i].first);
    fix_sign(pairs[i].second);
    chart.axes.push_back(std::move(pairs[i].second));
  }

  chart.coordinates.assign(n, std::vector<double>(num_axes, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < num_axes; ++j) {
      chart.coordinates[i][j] = dot(centered[i], chart.axes[j]);
    }
  }
  return chart;
}

LocalChart build_local_chart(const EmbeddingIndex& index,
                             const std::string& word, int n,
                             const ChartOptions& options) {
  const std::size_t query = find_or_suggest(index, word);
  const auto neighbor_words = nearest_neighbors(index, word, n, options.metric);

  std::vector<std::vector<double>> neighbor_vectors;
  neighbor_vectors.reserve(neighbor_words.size());
  for (const auto& w : neighbor_words) {
    neighbor_vectors.push_back(index.vectors[*index.find(w)]);
  }
  LocalChart chart =
      local_chart_pca(index.vectors[query], neighbor_vectors, options);
  chart.center = word;
  chart.words = neighbor_words;
  return chart;
}

AxisReport axis_report(const LocalChart& chart, int axis, int k) {
  if (k < 0) {
    throw std::invalid_argument("axis_report: k must be >= 0, got " +
                                std::to_string(k));
  }
  if (!chart.coordinates.empty() &&
      chart.words.size() + 1 != chart.coordinates.size()) {
    throw std::invalid_argument(
        "axis_report: chart has " + std::to_string(chart.words.size()) +
        " neighbour words but " + std::to_string(chart.coordinates.size()) +
        " coordinate rows");
  }
  constexpr double kTol = 1e-10;
  AxisReport report;
  if (chart.degenerate) {
    report.note = "degenerate chart: all points identical, no axes to report";
    return report;
  }
  if (axis < 0 || static_cast<std::size_t>(axis) >= chart.axes.size()) {
    report.note = "axis " + std::to_string(axis) + " out of range (chart has " +
                  std::to_string(chart.axes.size()) + " axes)";
    return report;
  }
  if (chart.eigenvalues[static_cast<std::size_t>(axis)] <= kTol) {
    report.note = "axis " + std::to_string(axis) +
                  " is degenerate (eigenvalue below tolerance)";
    return report;
  }

  const auto ax = static_cast<std::size_t>(axis);
  auto word_at = [&](std::size_t row) {
    return row == 0 ? "(" + chart.center + ")" : chart.words[row - 1];
  };

  std::vector<std::size_t> dominant;
  for (std::size_t i = 0; i < chart.coordinates.size(); ++i) {
    const auto& coords = chart.coordinates[i];
    const double mine = std::fabs(coords[ax]);
    bool dominates = true;
    for (std::size_t j = 0; j < coords.size() && dominates; ++j) {
      dominates = mine >= std::fabs(coords[j]);
    }
    if (dominates) dominant.push_back(i);
  }

  std::sort(dominant.begin(), dominant.end(), [&](std::size_t a, std::size_t b) {
    const double ma = std::fabs(chart.coordinates[a][ax]);
    const double mb = std::fabs(chart.coordinates[b][ax]);
    if (ma != mb) return ma > mb;
    return word_at(a) < word_at(b);
  });
  if (dominant.size() > static_cast<std::size_t>(k)) {
    dominant.resize(static_cast<std::size_t>(k));
  }

  std::sort(dominant.begin(), dominant.end(), [&](std::size_t a, std::size_t b) {
    const double ca = chart.coordinates[a][ax], cb = chart.coordinates[b][ax];
    if (ca != cb) return ca < cb;
    return word_at(a) < word_at(b);
  });
  for (const std::size_t row : dominant) report.words.push_back(word_at(row));
  return report;
}

}  // namespace ctxnmt
