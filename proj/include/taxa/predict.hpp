#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taxa/assist.hpp"
#include "taxa/compare.hpp"

namespace taxa {

/// Externally computed class probabilities for one image, keyed by leaf path.
/// Values lie in [0,1] and need not sum to 1.
struct ProbabilityRow {
  std::string uuid;
  std::map<TaxonPath, double> probs;
};

inline constexpr double kZeroShotThreshold = 0.3;

/// Copy the label set of the most cosine-similar labeled image to each
/// target. Ties go to the lexicographically smallest uuid. A target that is
/// itself labeled may match itself; leave-one-out callers exclude it.
/// Throws EmptyLabeledSet or MissingEmbedding.
Labeling similarity_predict(const Labeling& labeled, const EmbeddingTable& embeddings,
                            std::span<const std::string> targets);

/// Argmax leaf plus every leaf with probability >= threshold, closed under
/// ancestors. Argmax ties go to the smallest path. Throws EmptyProbabilityRow.
Labeling zero_shot_predict(std::span<const ProbabilityRow> rows, double threshold = kZeroShotThreshold);

/// The paths plus all their non-empty proper prefixes.
PathSet ancestor_closure(const PathSet& paths);
Labeling ancestor_closure(const Labeling& labels);

/// Exact match ratio and mean per-image Jaccard of `pred` against `gold`,
/// optionally after truncating both to `depth`. Throws ImageSetMismatch.
MetricsReport evaluate(const Labeling& pred, const Labeling& gold, std::optional<int> depth = std::nullopt);

/// Predict every labeled image from all the others (similarity matching).
Labeling loo_predictions(const Labeling& labeled, const EmbeddingTable& embeddings);

/// evaluate(loo_predictions(labeled), labeled, depth). Throws NotEnoughData
/// with fewer than two labeled images.
MetricsReport loo_evaluate(const Labeling& labeled, const EmbeddingTable& embeddings,
                           std::optional<int> depth = std::nullopt);

}  // namespace taxa
