#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ctxnmt {

struct EmbeddingIndex {
  std::vector<std::string> words;
  std::vector<std::vector<double>> vectors;  // one row per word
  int dimension = 0;

  std::size_t size() const { return words.size(); }
  std::optional<std::size_t> find(const std::string& word) const;
};

/// Plain-text vector format: header "word_count dimension", then one line per
/// word: the token followed by `dimension` decimal floats.
EmbeddingIndex load_embeddings(const std::string& path);
void save_embeddings(const std::string& path, const EmbeddingIndex& index);

enum class NeighborMetric { kCosine, kEuclidean };

/// The n-1 neighbours of `word`, best first; ties broken lexicographically,
/// the query itself excluded. An unknown word is rejected with the closest
/// spellings by edit distance in the message.
std::vector<std::string> nearest_neighbors(
    const EmbeddingIndex& index, const std::string& word, int n,
    NeighborMetric metric = NeighborMetric::kCosine);

struct ChartOptions {
  NeighborMetric metric = NeighborMetric::kCosine;
  bool center_at_query = false;  // default centers at the mean of all n points
};

/// A local chart over n points: the query plus its n-1 neighbours.
/// `coordinates` has one row per chart point, the center first and the
/// neighbours after it in `words` order; columns follow `axes`.
struct LocalChart {
  std::string center;
  std::vector<std::string> words;  // the n-1 neighbours
  std::vector<std::vector<double>> axes;  // min(dimension, n) orthonormal rows
  std::vector<double> eigenvalues;        // non-increasing, >= -1e-10
  std::vector<std::vector<double>> coordinates;
  bool degenerate = false;  // zero covariance: eigenvalues 0, canonical axes
};

LocalChart local_chart_pca(const std::vector<double>& center,
                           const std::vector<std::vector<double>>& neighbors,
                           const ChartOptions& options = {});

LocalChart build_local_chart(const EmbeddingIndex& index,
                             const std::string& word, int n,
                             const ChartOptions& options = {});

/// Words placed along one principal axis, Table-1 style: the k chart words
/// with the largest absolute coordinate on the axis among those the axis
/// dominates (|coord_axis| >= every other |coord|), ordered by signed
/// coordinate; the center appears in place as "(word)". A degenerate or
/// out-of-range axis yields an empty list and an explanatory note. The
/// dominance rule is an interpretation, not a contract from the source data.
struct AxisReport {
  std::vector<std::string> words;
  std::string note;
};

AxisReport axis_report(const LocalChart& chart, int axis, int k);

int edit_distance(const std::string& a, const std::string& b);

}  // namespace ctxnmt
