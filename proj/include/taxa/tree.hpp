#pragma once

#include <string>
#include <vector>

#include "taxa/path.hpp"

namespace taxa {

enum class NodeOrigin { Manual, MachineCluster };

struct TaxonNode {
  std::string name;
  std::vector<TaxonNode> children;
  NodeOrigin origin = NodeOrigin::Manual;
  std::string note;  // memo, empty when absent

  bool is_leaf() const noexcept { return children.empty(); }
  const TaxonNode* find_child(std::string_view child_name) const noexcept;
  TaxonNode* find_child(std::string_view child_name) noexcept;

  bool operator==(const TaxonNode&) const = default;
};

/// Rooted taxonomy tree. Edges are implicit in the ordered child lists and
/// nodes are addressed by TaxonPath.
class TaxonomyTree {
 public:
  TaxonomyTree() { root_.name = kRootName; }
  explicit TaxonomyTree(TaxonNode root) : root_(std::move(root)) {}

  const TaxonNode& root() const noexcept { return root_; }
  TaxonNode& root() noexcept { return root_; }

  const TaxonNode* find(const TaxonPath& path) const noexcept;
  TaxonNode* find(const TaxonPath& path) noexcept;
  bool contains(const TaxonPath& path) const noexcept { return find(path) != nullptr; }
  bool is_leaf(const TaxonPath& path) const noexcept;

  /// Every node path except root, in preorder.
  std::vector<TaxonPath> paths() const;
  std::vector<TaxonPath> leaf_paths() const;
  std::size_t node_count() const;  // including root

  bool operator==(const TaxonomyTree&) const = default;

 private:
  TaxonNode root_;
};

std::string_view origin_name(NodeOrigin origin) noexcept;

/// Names must be non-empty, free of "/" and control characters, and valid
/// UTF-8. Throws Error(InvalidName).
void validate_taxon_name(std::string_view name);

}  // namespace taxa
