#pragma once

#include <compare>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace taxa {

/// Identity of a taxon: the names on the way down from (but excluding) root.
/// The empty path denotes root itself and is never a label.
struct TaxonPath {
  std::vector<std::string> segments;

  TaxonPath() = default;
  TaxonPath(std::vector<std::string> segs) : segments(std::move(segs)) {}
  TaxonPath(std::initializer_list<std::string> segs) : segments(segs) {}

  bool is_root() const noexcept { return segments.empty(); }
  std::size_t depth() const noexcept { return segments.size(); }

  TaxonPath child(std::string name) const;
  TaxonPath parent() const;
  TaxonPath prefix(std::size_t n) const;
  const std::string& leaf_name() const { return segments.back(); }

  /// True when `other` equals this path or lies below it.
  bool is_prefix_of(const TaxonPath& other) const noexcept;
  bool is_proper_prefix_of(const TaxonPath& other) const noexcept {
    return segments.size() < other.segments.size() && is_prefix_of(other);
  }

  /// Replace the leading `from` prefix by `to`. Caller guarantees the prefix.
  TaxonPath rebased(const TaxonPath& from, const TaxonPath& to) const;

  /// "/"-joined form used by probability files and the HTTP query string.
  std::string joined() const;
  static TaxonPath parse(std::string_view joined);

  auto operator<=>(const TaxonPath&) const = default;
  bool operator==(const TaxonPath&) const = default;
};

using PathSet = std::set<TaxonPath>;

inline const std::string kUngrouped = "ungrouped";
inline const std::string kRootName = "root";

inline TaxonPath ungrouped_path() { return TaxonPath{kUngrouped}; }

}  // namespace taxa
