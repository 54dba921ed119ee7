#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "taxa/path.hpp"
#include "taxa/tree.hpp"

namespace taxa {

struct ImageRecord {
  std::string uuid;
  std::optional<std::string> display_name;
  std::optional<int> publish_year;
  // Raw JSON text per key, passed through from dataset metadata.
  std::map<std::string, std::string> source_fields;

  bool operator==(const ImageRecord&) const = default;
};

struct LabelAssignment {
  PathSet paths;
  bool unsure = false;

  bool operator==(const LabelAssignment&) const = default;
};

// ---- Operators -------------------------------------------------------------
// Every mutation of a CoderSession is one of these values. They are logged
// verbatim so a session can be rebuilt by replay.

namespace op {

struct LoadBatch {
  std::vector<std::string> uuids;
  bool operator==(const LoadBatch&) const = default;
};
struct CreateTaxon {
  TaxonPath parent;
  std::string name;
  bool operator==(const CreateTaxon&) const = default;
};
struct PartitionPart {
  std::string name;
  std::vector<std::string> members;
  bool operator==(const PartitionPart&) const = default;
};
struct ApplyPartition {
  TaxonPath path;
  std::vector<PartitionPart> parts;
  NodeOrigin origin = NodeOrigin::MachineCluster;
  bool operator==(const ApplyPartition&) const = default;
};
struct FlattenTaxon {
  TaxonPath path;
  bool operator==(const FlattenTaxon&) const = default;
};
struct MergeTaxa {
  TaxonPath source;
  TaxonPath target;
  bool operator==(const MergeTaxa&) const = default;
};
struct MoveTaxon {
  TaxonPath path;
  TaxonPath new_parent;
  bool operator==(const MoveTaxon&) const = default;
};
struct RenameTaxon {
  TaxonPath path;
  std::string new_name;
  bool operator==(const RenameTaxon&) const = default;
};
struct RemoveTaxon {
  TaxonPath path;
  bool operator==(const RemoveTaxon&) const = default;
};
struct LabelImage {
  std::string uuid;
  TaxonPath leaf;
  bool operator==(const LabelImage&) const = default;
};
struct UnlabelImage {
  std::string uuid;
  TaxonPath leaf;
  bool operator==(const UnlabelImage&) const = default;
};
struct SetUnsure {
  std::string uuid;
  bool flag = false;
  bool operator==(const SetUnsure&) const = default;
};
struct SetNote {
  TaxonPath path;
  std::string note;
  bool operator==(const SetNote&) const = default;
};
struct AddMemo {
  std::string text;
  bool operator==(const AddMemo&) const = default;
};

}  // namespace op

using Operation = std::variant<op::LoadBatch, op::CreateTaxon, op::ApplyPartition, op::FlattenTaxon,
                               op::MergeTaxa, op::MoveTaxon, op::RenameTaxon, op::RemoveTaxon,
                               op::LabelImage, op::UnlabelImage, op::SetUnsure, op::SetNote,
                               op::AddMemo>;

/// Wire name of an operator ("create_taxon", "label_image", ...).
std::string_view operation_kind(const Operation& operation) noexcept;

struct LogEntry {
  std::uint64_t version = 0;
  Operation operation;
  bool operator==(const LogEntry&) const = default;
};

struct ImageFilter {
  enum class Kind { Taxon, Keyword, Uuid };
  Kind kind = Kind::Taxon;
  TaxonPath taxon;
  std::string text;  // keyword or uuid

  static ImageFilter by_taxon(TaxonPath path) { return {Kind::Taxon, std::move(path), {}}; }
  static ImageFilter by_keyword(std::string kw) { return {Kind::Keyword, {}, std::move(kw)}; }
  static ImageFilter by_uuid(std::string uuid) { return {Kind::Uuid, {}, std::move(uuid)}; }
};

/// Display names for keyword search, keyed by uuid.
using ImageCatalog = std::map<std::string, ImageRecord>;

/// One coder's taxonomy tree, image labels and operation log.
///
/// All mutation goes through apply(). Each operator validates its
/// preconditions before touching state, so a thrown Error leaves the session
/// unchanged. Sessions are single-writer; concurrent readers need their own
/// copy or external locking.
class CoderSession {
 public:
  static CoderSession create(std::string coder_id, std::string session_id = {});

  /// Rebuild a session from its log. Version numbers must run 1..n and every
  /// operator must succeed, otherwise Error(CorruptLog).
  static CoderSession replay(std::string coder_id, std::string session_id,
                             const std::vector<LogEntry>& log);

  /// Assemble a session from stored state (used by the file loader). The
  /// state is validated with check_invariants(); the log is not replayed.
  static CoderSession from_state(std::string coder_id, std::string session_id, TaxonomyTree tree,
                                 std::vector<std::string> image_order,
                                 std::map<std::string, LabelAssignment> labels,
                                 std::vector<LogEntry> log, std::vector<std::string> memos);

  /// Apply one operator and append it to the log. Returns the new version.
  std::uint64_t apply(const Operation& operation);

  // Convenience wrappers around apply().
  std::uint64_t load_batch(std::vector<std::string> uuids) { return apply(op::LoadBatch{std::move(uuids)}); }
  std::uint64_t create_taxon(TaxonPath parent, std::string name) {
    return apply(op::CreateTaxon{std::move(parent), std::move(name)});
  }
  std::uint64_t apply_partition(TaxonPath path, std::vector<op::PartitionPart> parts,
                                NodeOrigin origin = NodeOrigin::MachineCluster) {
    return apply(op::ApplyPartition{std::move(path), std::move(parts), origin});
  }
  std::uint64_t flatten_taxon(TaxonPath path) { return apply(op::FlattenTaxon{std::move(path)}); }
  std::uint64_t merge_taxa(TaxonPath source, TaxonPath target) {
    return apply(op::MergeTaxa{std::move(source), std::move(target)});
  }
  std::uint64_t move_taxon(TaxonPath path, TaxonPath new_parent) {
    return apply(op::MoveTaxon{std::move(path), std::move(new_parent)});
  }
  std::uint64_t rename_taxon(TaxonPath path, std::string new_name) {
    return apply(op::RenameTaxon{std::move(path), std::move(new_name)});
  }
  std::uint64_t remove_taxon(TaxonPath path) { return apply(op::RemoveTaxon{std::move(path)}); }
  std::uint64_t label_image(std::string uuid, TaxonPath leaf) {
    return apply(op::LabelImage{std::move(uuid), std::move(leaf)});
  }
  std::uint64_t unlabel_image(std::string uuid, TaxonPath leaf) {
    return apply(op::UnlabelImage{std::move(uuid), std::move(leaf)});
  }
  std::uint64_t set_unsure(std::string uuid, bool flag) { return apply(op::SetUnsure{std::move(uuid), flag}); }

  /// Matching uuids in load order. Keyword search needs display names from
  /// `catalog`; images absent from it never match a keyword.
  std::vector<std::string> query_images(const ImageFilter& filter,
                                        const ImageCatalog* catalog = nullptr) const;

  /// Images whose label set contains exactly `path` (load order).
  std::vector<std::string> images_at(const TaxonPath& path) const;

  /// Throws Error(Internal) naming the first broken invariant.
  void check_invariants() const;

  const std::string& session_id() const noexcept { return session_id_; }
  const std::string& coder_id() const noexcept { return coder_id_; }
  const TaxonomyTree& tree() const noexcept { return tree_; }
  const std::vector<std::string>& image_order() const noexcept { return image_order_; }
  const std::map<std::string, LabelAssignment>& labels() const noexcept { return labels_; }
  const LabelAssignment* label(const std::string& uuid) const;
  bool has_image(const std::string& uuid) const { return labels_.count(uuid) != 0; }
  const std::vector<LogEntry>& log() const noexcept { return log_; }
  const std::vector<std::string>& memos() const noexcept { return memos_; }
  std::uint64_t version() const noexcept { return log_.size(); }

  /// uuid -> path set, the shape the comparison metrics work on.
  std::map<std::string, PathSet> labeling() const;

  bool operator==(const CoderSession&) const = default;

 private:
  CoderSession() = default;

  void do_apply(const Operation& operation);
  void ensure_ungrouped();
  void rewrite_prefix(const TaxonPath& from, const TaxonPath& to);
  void park_orphans();
  void give_first_child(TaxonNode& parent, const TaxonPath& parent_path, TaxonNode child);

  void apply_op(const op::LoadBatch&);
  void apply_op(const op::CreateTaxon&);
  void apply_op(const op::ApplyPartition&);
  void apply_op(const op::FlattenTaxon&);
  void apply_op(const op::MergeTaxa&);
  void apply_op(const op::MoveTaxon&);
  void apply_op(const op::RenameTaxon&);
  void apply_op(const op::RemoveTaxon&);
  void apply_op(const op::LabelImage&);
  void apply_op(const op::UnlabelImage&);
  void apply_op(const op::SetUnsure&);
  void apply_op(const op::SetNote&);
  void apply_op(const op::AddMemo&);

  std::string session_id_;
  std::string coder_id_;
  TaxonomyTree tree_;
  std::vector<std::string> image_order_;
  std::map<std::string, LabelAssignment> labels_;
  std::vector<LogEntry> log_;
  std::vector<std::string> memos_;
};

}  // namespace taxa
