#pragma once

#include <iosfwd>
#include <vector>

#include "sesim/dataset.hpp"
#include "sesim/matrix.hpp"
#include "sesim/network.hpp"

namespace sesim {

/// Row-wise argmax with ties broken by the lowest index.
std::vector<int> argmax_rows(const Matrix& m);

/// Percentage of test points whose predicted class differs from the label.
double error_rate(const ModelState& state, const Dataset& ds_test);

/// Pairwise same-class scores for a subset of samples, rows/columns sorted
/// by (class, index) so an accurate model shows a block-diagonal pattern.
/// The diagonal is computed like any other pair.
struct SimilarityMatrix {
  Matrix s;                  // m x m, s(i, j) = score for (indices[i], indices[j])
  std::vector<int> indices;  // dataset row of each matrix row
  std::vector<int> labels;   // class of each matrix row (non-decreasing)
};

/// Scores from the live similarity net on ordered latent pairs.
SimilarityMatrix similarity_matrix(const ModelState& state, const Dataset& ds,
                                   std::vector<int> sample_idx);

/// Hard 0/1 comparison matrix from predicted classes: 1 iff the two samples
/// get the same argmax. The baseline the learned scores are judged against.
SimilarityMatrix pseudo_label_matrix(const ModelState& state, const Dataset& ds,
                                     std::vector<int> sample_idx);

/// Mean over all ordered pairs of (s_ij - ideal_ij)^2, where ideal is 1 for
/// same-class pairs and 0 otherwise.
double mse_vs_ideal(const SimilarityMatrix& sm);

enum class QueryMeasure { learned, gaussian };

struct Neighbor {
  int index = -1;
  double score = 0.0;
};

/// k highest-scoring neighbors of the target (target excluded), scores
/// non-increasing, ties broken by lower index. learned scores come from the
/// similarity net on latents; gaussian scores are exp(-beta * ||x_t - x_j||^2)
/// on the raw inputs.
struct QueryResult {
  int target = -1;
  std::vector<Neighbor> neighbors;
};
QueryResult knn_query(const ModelState& state, const Dataset& ds, int target, int k,
                      QueryMeasure measure, double beta);

struct Rect {
  double xmin = -1.5, xmax = 2.5;
  double ymin = -1.0, ymax = 1.5;
};

/// Class posteriors on a resolution x resolution lattice over the rectangle
/// (endpoints included; resolution >= 2). Rows are (x, y, p_0, ..., p_{c-1})
/// with y varying slowest. 2-d input models only.
Matrix decision_grid(const ModelState& state, const Rect& bounds, int resolution);

// Artifact writers.
void write_similarity_csv(const SimilarityMatrix& sm, std::ostream& os);
void write_similarity_meta_json(const SimilarityMatrix& sm, std::ostream& os);
void write_grid_csv(const Matrix& grid, std::ostream& os);
void write_queries_json(const std::vector<QueryResult>& queries, const Dataset& ds,
                        std::ostream& os);

}  // namespace sesim
