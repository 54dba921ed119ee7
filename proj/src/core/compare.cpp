#include "taxa/compare.hpp"

#include <algorithm>
#include <set>

#include "taxa/error.hpp"

namespace taxa {

double to_double(const Rational& r) { return r.convert_to<double>(); }

std::string to_fraction_string(const Rational& r) {
  return numerator(r).str() + "/" + denominator(r).str();
}

namespace {

// Walk every coder's tree in session order and add each accepted path the
// first time it is seen. Parents are always accepted before children.
template <class Accept>
TaxonomyTree first_seen_tree(std::span<const CoderSession> sessions, Accept accept) {
  TaxonomyTree out;
  if (!sessions.empty()) out.root().note = sessions.front().tree().root().note;
  for (const auto& s : sessions) {
    std::vector<std::pair<const TaxonNode*, TaxonPath>> stack{{&s.tree().root(), TaxonPath{}}};
    while (!stack.empty()) {
      auto [node, path] = stack.back();
      stack.pop_back();
      if (!path.is_root() && accept(path) && !out.contains(path)) {
        auto* parent = out.find(path.parent());
        if (!parent) continue;
        parent->children.push_back(TaxonNode{node->name, {}, node->origin, node->note});
      }
      for (auto it = node->children.rbegin(); it != node->children.rend(); ++it)
        stack.emplace_back(&*it, path.child(it->name));
    }
  }
  return out;
}

std::set<TaxonPath> path_set(const TaxonomyTree& tree, std::optional<int> depth = std::nullopt) {
  std::set<TaxonPath> out;
  for (auto& p : tree.paths())
    if (!depth || static_cast<int>(p.depth()) <= *depth) out.insert(std::move(p));
  return out;
}

void require_same_keys(std::span<const Labeling> labelings) {
  for (std::size_t i = 1; i < labelings.size(); ++i) {
    const auto& a = labelings[0];
    const auto& b = labelings[i];
    bool same = a.size() == b.size() &&
                std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) { return x.first == y.first; });
    if (!same) throw Error(ErrorCode::ImageSetMismatch, "labelings cover different image sets");
  }
}

void require_comparable(std::span<const Labeling> labelings) {
  if (labelings.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two labelings");
  require_same_keys(labelings);
  if (labelings[0].empty()) throw Error(ErrorCode::NotEnoughData, "no images to compare");
}

}  // namespace

// ---- union merge -----------------------------------------------------------

AnnotatedMergedTree union_merge(std::span<const CoderSession> sessions) {
  AnnotatedMergedTree out;
  if (sessions.empty()) throw Error(ErrorCode::InvalidArgument, "union merge needs at least one session");
  for (const auto& s : sessions) out.coders.push_back(s.coder_id());
  out.tree = first_seen_tree(sessions, [](const TaxonPath&) { return true; });

  const auto shared = shared_images(sessions);
  for (const auto& s : sessions) {
    if (s.image_order().size() != shared.size()) {
      out.warnings.push_back("sessions do not share the same image corpus; " + std::to_string(shared.size()) +
                             " images are loaded in every session");
      break;
    }
  }

  for (const auto& path : out.tree.paths()) {
    NodeAnnotation ann;
    std::map<std::string, std::size_t> votes;  // uuid -> creators assigning it
    std::vector<std::string> seen_order;
    for (const auto& s : sessions) {
      if (!s.tree().contains(path)) continue;
      ann.creators.push_back(s.coder_id());
      auto& mine = ann.assigned[s.coder_id()];
      for (const auto& uuid : s.query_images(ImageFilter::by_taxon(path))) {
        mine.push_back(uuid);
        if (votes[uuid]++ == 0) seen_order.push_back(uuid);
      }
    }
    for (const auto& uuid : seen_order) {
      if (votes[uuid] == ann.creators.size()) {
        ++ann.consensus_count;
      } else {
        ++ann.partial_count;
        ann.partial_images.push_back(uuid);
      }
    }
    out.nodes.emplace(path, std::move(ann));
  }
  return out;
}

// ---- majority merge --------------------------------------------------------

MajorityMerge majority_merge(std::span<const CoderSession> sessions) {
  if (sessions.empty()) throw Error(ErrorCode::InvalidArgument, "majority merge needs at least one session");
  const std::size_t n = sessions.size();
  auto wins = [n](std::size_t votes) { return 2 * votes > n; };

  MajorityMerge out;
  std::map<TaxonPath, std::size_t> node_votes;
  for (const auto& s : sessions) {
    out.coders.push_back(s.coder_id());
    for (const auto& p : s.tree().paths()) ++node_votes[p];
  }
  out.tree = first_seen_tree(sessions, [&](const TaxonPath& p) { return wins(node_votes[p]); });

  std::map<std::string, std::map<TaxonPath, std::size_t>> label_votes;
  for (const auto& s : sessions) {
    for (const auto& uuid : s.image_order()) {
      auto [it, fresh] = label_votes.try_emplace(uuid);
      if (fresh) out.images.push_back(uuid);
      for (const auto& p : s.label(uuid)->paths) ++it->second[p];
    }
  }
  for (const auto& uuid : out.images) {
    PathSet kept;
    for (const auto& [p, v] : label_votes[uuid])
      if (wins(v)) kept.insert(p);
    out.labels.emplace(uuid, std::move(kept));
  }
  return out;
}

// ---- metrics ---------------------------------------------------------------

Rational jaccard(const PathSet& a, const PathSet& b) {
  if (a.empty() && b.empty()) return Rational(1);
  std::size_t inter = 0;
  for (const auto& p : a) inter += b.count(p);
  const std::size_t uni = a.size() + b.size() - inter;
  return Rational(static_cast<long long>(inter), static_cast<long long>(uni));
}

Rational exact_match_ratio(std::span<const Labeling> labelings) {
  require_comparable(labelings);
  std::size_t matches = 0;
  for (const auto& [uuid, paths] : labelings[0]) {
    bool all = std::all_of(labelings.begin() + 1, labelings.end(),
                           [&](const Labeling& other) { return other.at(uuid) == paths; });
    matches += all;
  }
  return Rational(static_cast<long long>(matches), static_cast<long long>(labelings[0].size()));
}

Rational pairwise_jaccard(std::span<const Labeling> labelings) {
  require_comparable(labelings);
  Rational total = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < labelings.size(); ++i) {
    for (std::size_t j = i + 1; j < labelings.size(); ++j) {
      Rational sum = 0;
      for (const auto& [uuid, paths] : labelings[i]) sum += jaccard(paths, labelings[j].at(uuid));
      total += sum / static_cast<long long>(labelings[i].size());
      ++pairs;
    }
  }
  return total / static_cast<long long>(pairs);
}

Rational node_iou(std::span<const TaxonomyTree> trees, std::optional<int> depth) {
  if (trees.size() < 2) throw Error(ErrorCode::InvalidArgument, "node IoU needs at least two trees");
  std::vector<std::set<TaxonPath>> sets;
  for (const auto& t : trees) sets.push_back(path_set(t, depth));
  Rational total = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      total += jaccard(sets[i], sets[j]);
      ++pairs;
    }
  }
  return total / static_cast<long long>(pairs);
}

std::vector<std::string> shared_images(std::span<const CoderSession> sessions) {
  std::vector<std::string> out;
  if (sessions.empty()) return out;
  for (const auto& uuid : sessions[0].image_order()) {
    if (std::all_of(sessions.begin() + 1, sessions.end(), [&](const CoderSession& s) { return s.has_image(uuid); }))
      out.push_back(uuid);
  }
  return out;
}

Labeling restrict_labeling(const Labeling& labels, const std::vector<std::string>& uuids) {
  Labeling out;
  for (const auto& uuid : uuids) {
    auto it = labels.find(uuid);
    if (it != labels.end()) out.emplace(uuid, it->second);
  }
  return out;
}

std::vector<std::string> dissensus_images(std::span<const CoderSession> sessions) {
  std::vector<std::string> out;
  if (sessions.size() < 2) return out;
  for (const auto& uuid : shared_images(sessions)) {
    const auto& first = sessions[0].label(uuid)->paths;
    if (std::any_of(sessions.begin() + 1, sessions.end(),
                    [&](const CoderSession& s) { return s.label(uuid)->paths != first; }))
      out.push_back(uuid);
  }
  return out;
}

std::vector<std::string> unsure_images(std::span<const CoderSession> sessions) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& s : sessions)
    for (const auto& uuid : s.image_order())
      if (s.label(uuid)->unsure && seen.insert(uuid).second) out.push_back(uuid);
  return out;
}

PathSet truncate_paths(const PathSet& paths, int depth) {
  if (depth < 1) throw Error(ErrorCode::InvalidArgument, "depth must be at least 1");
  PathSet out;
  for (const auto& p : paths) out.insert(p.prefix(static_cast<std::size_t>(depth)));
  return out;
}

Labeling truncate_labels(const Labeling& labels, int depth) {
  Labeling out;
  for (const auto& [uuid, paths] : labels) out.emplace(uuid, truncate_paths(paths, depth));
  return out;
}

MetricsReport agreement_report(std::span<const CoderSession> sessions, std::optional<int> depth,
                               std::vector<std::string>* warnings) {
  if (sessions.size() < 2) throw Error(ErrorCode::InvalidArgument, "agreement needs at least two sessions");
  const auto shared = shared_images(sessions);
  if (warnings) {
    for (const auto& s : sessions) {
      if (s.image_order().size() != shared.size()) {
        warnings->push_back("image corpora differ; metrics restricted to the " + std::to_string(shared.size()) +
                            " shared images");
        break;
      }
    }
  }
  std::vector<Labeling> labelings;
  std::vector<TaxonomyTree> trees;
  for (const auto& s : sessions) {
    auto l = restrict_labeling(s.labeling(), shared);
    labelings.push_back(depth ? truncate_labels(l, *depth) : std::move(l));
    trees.push_back(s.tree());
  }
  MetricsReport r;
  r.exact_match = exact_match_ratio(labelings);
  r.jaccard = pairwise_jaccard(labelings);
  r.node_iou = node_iou(trees, depth);
  r.depth = depth;
  r.n_images = shared.size();
  return r;
}

}  // namespace taxa
