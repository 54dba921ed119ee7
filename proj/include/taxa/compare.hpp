#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taxa/path.hpp"
#include "taxa/session.hpp"
#include "taxa/tree.hpp"

namespace taxa {

using Rational = boost::multiprecision::cpp_rational;

/// uuid -> label path set. Keys are the image set being compared.
using Labeling = std::map<std::string, PathSet>;

double to_double(const Rational& r);
std::string to_fraction_string(const Rational& r);

// ---- union merge -----------------------------------------------------------

struct NodeAnnotation {
  std::vector<std::string> creators;                             // coder ids, session order
  std::map<std::string, std::vector<std::string>> assigned;      // coder id -> uuids, load order
  std::vector<std::string> partial_images;                       // assigned by some but not all creators
  std::size_t consensus_count = 0;                               // assigned by every creator
  std::size_t partial_count = 0;

  bool created_by_all(std::size_t n_coders) const { return creators.size() == n_coders; }
};

/// Union of the coders' trees keyed by path, with creator lists and the
/// per-node assignment discrepancy. `tree` holds the union in first-seen
/// order so it can be rendered directly.
struct AnnotatedMergedTree {
  std::vector<std::string> coders;
  TaxonomyTree tree;
  std::map<TaxonPath, NodeAnnotation> nodes;
  std::vector<std::string> warnings;
};

AnnotatedMergedTree union_merge(std::span<const CoderSession> sessions);

// ---- majority merge --------------------------------------------------------

struct MajorityMerge {
  std::vector<std::string> coders;
  TaxonomyTree tree;
  std::vector<std::string> images;  // union of loaded images, first-seen order
  Labeling labels;                  // may hold empty sets where no label wins
};

/// Keeps nodes and labels present in strictly more than half of the sessions.
MajorityMerge majority_merge(std::span<const CoderSession> sessions);

// ---- agreement metrics -----------------------------------------------------

struct MetricsReport {
  Rational exact_match;
  Rational jaccard;
  std::optional<Rational> node_iou;
  std::optional<int> depth;
  std::size_t n_images = 0;
};

/// |A∩B| / |A∪B|; two empty sets score 1.
Rational jaccard(const PathSet& a, const PathSet& b);

/// Fraction of images whose path sets are identical across every labeling.
Rational exact_match_ratio(std::span<const Labeling> labelings);

/// Mean over unordered labeling pairs of the mean per-image Jaccard.
Rational pairwise_jaccard(std::span<const Labeling> labelings);

/// Mean over unordered tree pairs of the path-set IoU (root excluded).
Rational node_iou(std::span<const TaxonomyTree> trees, std::optional<int> depth = std::nullopt);

/// Images (present in every session) whose path sets differ between any two
/// coders, in the first session's load order.
std::vector<std::string> dissensus_images(std::span<const CoderSession> sessions);

/// Images marked unsure by at least one coder, first-seen order.
std::vector<std::string> unsure_images(std::span<const CoderSession> sessions);

/// Cut every path to its first `depth` segments. Throws InvalidArgument for depth < 1.
Labeling truncate_labels(const Labeling& labels, int depth);
PathSet truncate_paths(const PathSet& paths, int depth);

/// Uuids loaded in every session, in the first session's order.
std::vector<std::string> shared_images(std::span<const CoderSession> sessions);
Labeling restrict_labeling(const Labeling& labels, const std::vector<std::string>& uuids);

/// Match, pairwise Jaccard and Node IoU over the sessions' shared images.
/// Requires at least two sessions. When the corpora differ a warning is
/// appended to `warnings`.
MetricsReport agreement_report(std::span<const CoderSession> sessions, std::optional<int> depth,
                               std::vector<std::string>* warnings = nullptr);

}  // namespace taxa
