#include "taxa/tree.hpp"

#include <functional>

#include "taxa/error.hpp"

namespace taxa {

const TaxonNode* TaxonNode::find_child(std::string_view child_name) const noexcept {
  for (const auto& c : children)
    if (c.name == child_name) return &c;
  return nullptr;
}

TaxonNode* TaxonNode::find_child(std::string_view child_name) noexcept {
  for (auto& c : children)
    if (c.name == child_name) return &c;
  return nullptr;
}

const TaxonNode* TaxonomyTree::find(const TaxonPath& path) const noexcept {
  const TaxonNode* node = &root_;
  for (const auto& seg : path.segments) {
    node = node->find_child(seg);
    if (!node) return nullptr;
  }
  return node;
}

TaxonNode* TaxonomyTree::find(const TaxonPath& path) noexcept {
  return const_cast<TaxonNode*>(std::as_const(*this).find(path));
}

bool TaxonomyTree::is_leaf(const TaxonPath& path) const noexcept {
  const auto* node = find(path);
  return node && node->is_leaf();
}

namespace {

void collect(const TaxonNode& node, TaxonPath& prefix, bool leaves_only, std::vector<TaxonPath>& out) {
  for (const auto& c : node.children) {
    prefix.segments.push_back(c.name);
    if (!leaves_only || c.is_leaf()) out.push_back(prefix);
    collect(c, prefix, leaves_only, out);
    prefix.segments.pop_back();
  }
}

}  // namespace

std::vector<TaxonPath> TaxonomyTree::paths() const {
  std::vector<TaxonPath> out;
  TaxonPath prefix;
  collect(root_, prefix, false, out);
  return out;
}

std::vector<TaxonPath> TaxonomyTree::leaf_paths() const {
  std::vector<TaxonPath> out;
  TaxonPath prefix;
  collect(root_, prefix, true, out);
  return out;
}

std::size_t TaxonomyTree::node_count() const {
  std::function<std::size_t(const TaxonNode&)> count = [&](const TaxonNode& n) {
    std::size_t total = 1;
    for (const auto& c : n.children) total += count(c);
    return total;
  };
  return count(root_);
}

std::string_view origin_name(NodeOrigin origin) noexcept {
  return origin == NodeOrigin::MachineCluster ? "machine-cluster" : "manual";
}

namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > s.size()) return false;
    std::uint32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
    for (std::size_t k = 1; k < len; ++k) {
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF)
      return false;
    i += len;
  }
  return true;
}

}  // namespace

void validate_taxon_name(std::string_view name) {
  if (name.empty()) throw Error(ErrorCode::InvalidName, "taxon name must not be empty");
  for (char ch : name) {
    if (ch == '/') throw Error(ErrorCode::InvalidName, "taxon name must not contain '/'", {std::string(name)});
    if (static_cast<unsigned char>(ch) < 0x20)
      throw Error(ErrorCode::InvalidName, "taxon name contains a control character", {std::string(name)});
  }
  if (!valid_utf8(name)) throw Error(ErrorCode::InvalidName, "taxon name is not valid UTF-8");
}

}  // namespace taxa
