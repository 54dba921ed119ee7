#include "taxa/predict.hpp"

#include "taxa/error.hpp"

namespace taxa {

Labeling similarity_predict(const Labeling& labeled, const EmbeddingTable& embeddings,
                            std::span<const std::string> targets) {
  if (labeled.empty()) throw Error(ErrorCode::EmptyLabeledSet, "no labeled images to match against");
  std::vector<std::string> missing;
  for (const auto& [uuid, paths] : labeled)
    if (!embeddings.contains(uuid)) missing.push_back(uuid);
  for (const auto& uuid : targets)
    if (!embeddings.contains(uuid)) missing.push_back(uuid);
  if (!missing.empty())
    throw Error(ErrorCode::MissingEmbedding, std::to_string(missing.size()) + " image(s) have no embedding",
                std::move(missing));

  Labeling out;
  for (const auto& target : targets) {
    const auto& query = embeddings.at(target);
    const PathSet* best = nullptr;
    double best_sim = 0;
    // `labeled` iterates in uuid order, so strict > keeps the smallest uuid on ties
    for (const auto& [uuid, paths] : labeled) {
      const double sim = cosine(query, embeddings.at(uuid));
      if (!best || sim > best_sim) {
        best = &paths;
        best_sim = sim;
      }
    }
    out[target] = *best;
  }
  return out;
}

PathSet ancestor_closure(const PathSet& paths) {
  PathSet out;
  for (const auto& p : paths)
    for (std::size_t d = 1; d <= p.depth(); ++d) out.insert(p.prefix(d));
  return out;
}

Labeling ancestor_closure(const Labeling& labels) {
  Labeling out;
  for (const auto& [uuid, paths] : labels) out.emplace(uuid, ancestor_closure(paths));
  return out;
}

Labeling zero_shot_predict(std::span<const ProbabilityRow> rows, double threshold) {
  Labeling out;
  for (const auto& row : rows) {
    if (row.probs.empty())
      throw Error(ErrorCode::EmptyProbabilityRow, "probability row for '" + row.uuid + "' is empty", {row.uuid});
    PathSet leaves;
    auto argmax = row.probs.begin();
    // map order is path order, so strict > keeps the smallest path on ties
    for (auto it = row.probs.begin(); it != row.probs.end(); ++it) {
      if (it->second > argmax->second) argmax = it;
      if (it->second >= threshold) leaves.insert(it->first);
    }
    leaves.insert(argmax->first);
    out[row.uuid] = ancestor_closure(leaves);
  }
  return out;
}

MetricsReport evaluate(const Labeling& pred, const Labeling& gold, std::optional<int> depth) {
  std::vector<Labeling> pair;
  if (depth) {
    pair = {truncate_labels(pred, *depth), truncate_labels(gold, *depth)};
  } else {
    pair = {pred, gold};
  }
  MetricsReport r;
  r.exact_match = exact_match_ratio(pair);
  r.jaccard = pairwise_jaccard(pair);
  r.depth = depth;
  r.n_images = gold.size();
  return r;
}

Labeling loo_predictions(const Labeling& labeled, const EmbeddingTable& embeddings) {
  if (labeled.size() < 2) throw Error(ErrorCode::NotEnoughData, "leave-one-out needs at least two labeled images");
  Labeling out;
  Labeling others = labeled;
  for (const auto& [uuid, paths] : labeled) {
    auto node = others.extract(uuid);
    const std::string target[] = {uuid};
    out.merge(similarity_predict(others, embeddings, target));
    others.insert(std::move(node));
  }
  return out;
}

MetricsReport loo_evaluate(const Labeling& labeled, const EmbeddingTable& embeddings, std::optional<int> depth) {
  return evaluate(loo_predictions(labeled, embeddings), labeled, depth);
}

}  // namespace taxa
