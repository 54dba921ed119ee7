#include "taxa/session.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "taxa/error.hpp"

namespace taxa {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void fail(ErrorCode code, const std::string& message, std::vector<std::string> details = {}) {
  throw Error(code, message, std::move(details));
}

bool is_root_ungrouped(const TaxonPath& path) { return path.depth() == 1 && path.segments[0] == kUngrouped; }

std::string show(const TaxonPath& path) { return path.is_root() ? std::string("<root>") : path.joined(); }

const TaxonNode& require_node(const TaxonomyTree& tree, const TaxonPath& path) {
  const auto* node = tree.find(path);
  if (!node) fail(ErrorCode::NoSuchTaxon, "no taxon at '" + show(path) + "'", {path.joined()});
  return *node;
}

void require_not_root(const TaxonPath& path, std::string_view what) {
  if (path.is_root()) fail(ErrorCode::RootOperand, std::string(what) + " cannot target root");
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

}  // namespace

std::string_view operation_kind(const Operation& operation) noexcept {
  return std::visit(overloaded{
                        [](const op::LoadBatch&) { return std::string_view("load_batch"); },
                        [](const op::CreateTaxon&) { return std::string_view("create_taxon"); },
                        [](const op::ApplyPartition&) { return std::string_view("apply_partition"); },
                        [](const op::FlattenTaxon&) { return std::string_view("flatten_taxon"); },
                        [](const op::MergeTaxa&) { return std::string_view("merge_taxa"); },
                        [](const op::MoveTaxon&) { return std::string_view("move_taxon"); },
                        [](const op::RenameTaxon&) { return std::string_view("rename_taxon"); },
                        [](const op::RemoveTaxon&) { return std::string_view("remove_taxon"); },
                        [](const op::LabelImage&) { return std::string_view("label_image"); },
                        [](const op::UnlabelImage&) { return std::string_view("unlabel_image"); },
                        [](const op::SetUnsure&) { return std::string_view("set_unsure"); },
                        [](const op::SetNote&) { return std::string_view("set_note"); },
                        [](const op::AddMemo&) { return std::string_view("add_memo"); },
                    },
                    operation);
}

// ---- construction ----------------------------------------------------------

CoderSession CoderSession::create(std::string coder_id, std::string session_id) {
  if (coder_id.empty()) fail(ErrorCode::EmptyCoderId, "coder id must not be empty");
  CoderSession s;
  s.session_id_ = session_id.empty() ? coder_id : std::move(session_id);
  s.coder_id_ = std::move(coder_id);
  return s;
}

CoderSession CoderSession::replay(std::string coder_id, std::string session_id, const std::vector<LogEntry>& log) {
  auto s = create(std::move(coder_id), std::move(session_id));
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log[i].version != i + 1)
      fail(ErrorCode::CorruptLog, "log entry " + std::to_string(i) + " has version " +
                                      std::to_string(log[i].version) + ", expected " + std::to_string(i + 1));
    try {
      s.apply(log[i].operation);
    } catch (const Error& e) {
      fail(ErrorCode::CorruptLog, "replay failed at version " + std::to_string(i + 1) + ": " + e.what(),
           {std::string(error_code_name(e.code()))});
    }
  }
  return s;
}

CoderSession CoderSession::from_state(std::string coder_id, std::string session_id, TaxonomyTree tree,
                                      std::vector<std::string> image_order,
                                      std::map<std::string, LabelAssignment> labels, std::vector<LogEntry> log,
                                      std::vector<std::string> memos) {
  auto s = create(std::move(coder_id), std::move(session_id));
  s.tree_ = std::move(tree);
  s.image_order_ = std::move(image_order);
  s.labels_ = std::move(labels);
  s.log_ = std::move(log);
  s.memos_ = std::move(memos);
  s.check_invariants();
  return s;
}

// ---- queries ---------------------------------------------------------------

const LabelAssignment* CoderSession::label(const std::string& uuid) const {
  auto it = labels_.find(uuid);
  return it == labels_.end() ? nullptr : &it->second;
}

std::map<std::string, PathSet> CoderSession::labeling() const {
  std::map<std::string, PathSet> out;
  for (const auto& [uuid, a] : labels_) out.emplace(uuid, a.paths);
  return out;
}

std::vector<std::string> CoderSession::images_at(const TaxonPath& path) const {
  std::vector<std::string> out;
  for (const auto& uuid : image_order_)
    if (labels_.at(uuid).paths.count(path)) out.push_back(uuid);
  return out;
}

std::vector<std::string> CoderSession::query_images(const ImageFilter& filter, const ImageCatalog* catalog) const {
  std::vector<std::string> out;
  switch (filter.kind) {
    case ImageFilter::Kind::Taxon: {
      if (!tree_.contains(filter.taxon)) return out;
      for (const auto& uuid : image_order_) {
        const auto& paths = labels_.at(uuid).paths;
        if (std::any_of(paths.begin(), paths.end(), [&](const TaxonPath& p) { return filter.taxon.is_prefix_of(p); }))
          out.push_back(uuid);
      }
      break;
    }
    case ImageFilter::Kind::Keyword: {
      if (!catalog) return out;
      auto needle = lower_ascii(filter.text);
      for (const auto& uuid : image_order_) {
        auto it = catalog->find(uuid);
        if (it == catalog->end() || !it->second.display_name) continue;
        if (lower_ascii(*it->second.display_name).find(needle) != std::string::npos) out.push_back(uuid);
      }
      break;
    }
    case ImageFilter::Kind::Uuid:
      if (labels_.count(filter.text)) out.push_back(filter.text);
      break;
  }
  return out;
}

void CoderSession::check_invariants() const {
  auto broken = [](const std::string& what) { fail(ErrorCode::Internal, "invariant violated: " + what); };
  if (coder_id_.empty()) broken("empty coder id");
  if (tree_.root().name != kRootName) broken("root must be named 'root'");

  std::vector<const TaxonNode*> stack{&tree_.root()};
  while (!stack.empty()) {
    const auto* n = stack.back();
    stack.pop_back();
    std::set<std::string_view> names;
    for (const auto& c : n->children) {
      try {
        validate_taxon_name(c.name);
      } catch (const Error& e) {
        broken(e.what());
      }
      if (!names.insert(c.name).second) broken("duplicate sibling name '" + c.name + "'");
      stack.push_back(&c);
    }
  }
  if (const auto* u = tree_.root().find_child(kUngrouped); u && !u->is_leaf())
    broken("root-level 'ungrouped' must be a leaf");

  if (image_order_.size() != labels_.size()) broken("image order and label table disagree");
  std::set<std::string_view> seen;
  for (const auto& uuid : image_order_) {
    if (!seen.insert(uuid).second) broken("image '" + uuid + "' loaded twice");
    auto it = labels_.find(uuid);
    if (it == labels_.end()) broken("image '" + uuid + "' has no label entry");
    if (it->second.paths.empty()) broken("image '" + uuid + "' has no label");
    for (const auto& p : it->second.paths) {
      if (p.is_root()) broken("image '" + uuid + "' labeled at root");
      const auto* node = tree_.find(p);
      if (!node) broken("image '" + uuid + "' labeled at missing taxon '" + p.joined() + "'");
      if (!node->is_leaf()) broken("image '" + uuid + "' labeled at internal taxon '" + p.joined() + "'");
    }
  }
  for (std::size_t i = 0; i < log_.size(); ++i)
    if (log_[i].version != i + 1) broken("log versions are not 1..n");
}

// ---- mutation --------------------------------------------------------------

std::uint64_t CoderSession::apply(const Operation& operation) {
  do_apply(operation);
  log_.push_back(LogEntry{log_.size() + 1, operation});
  return version();
}

void CoderSession::do_apply(const Operation& operation) {
  std::visit([this](const auto& o) { apply_op(o); }, operation);
}

void CoderSession::ensure_ungrouped() {
  if (!tree_.root().find_child(kUngrouped)) tree_.root().children.push_back(TaxonNode{kUngrouped, {}, {}, {}});
}

void CoderSession::rewrite_prefix(const TaxonPath& from, const TaxonPath& to) {
  for (auto& [uuid, a] : labels_) {
    if (std::none_of(a.paths.begin(), a.paths.end(), [&](const TaxonPath& p) { return from.is_prefix_of(p); }))
      continue;
    PathSet next;
    for (const auto& p : a.paths) next.insert(from.is_prefix_of(p) ? p.rebased(from, to) : p);
    a.paths = std::move(next);
  }
}

void CoderSession::park_orphans() {
  bool any = false;
  for (auto& [uuid, a] : labels_) {
    if (a.paths.empty()) {
      a.paths.insert(ungrouped_path());
      any = true;
    }
  }
  if (any) ensure_ungrouped();
}

// `parent` is currently a leaf. Its images move to parent/ungrouped so labels
// stay on leaves; the "ungrouped" sibling is added unless `child` takes it.
void CoderSession::give_first_child(TaxonNode& parent, const TaxonPath& parent_path, TaxonNode child) {
  const bool child_is_ungrouped = child.name == kUngrouped;
  parent.children.push_back(std::move(child));
  if (!child_is_ungrouped) parent.children.push_back(TaxonNode{kUngrouped, {}, {}, {}});
  if (parent_path.is_root()) return;
  const auto target = parent_path.child(kUngrouped);
  for (auto& [uuid, a] : labels_) {
    if (a.paths.erase(parent_path)) a.paths.insert(target);
  }
}

void CoderSession::apply_op(const op::LoadBatch& o) {
  std::set<std::string_view> batch;
  for (const auto& uuid : o.uuids) {
    if (uuid.empty()) fail(ErrorCode::InvalidArgument, "image uuid must not be empty");
    if (labels_.count(uuid) || !batch.insert(uuid).second)
      fail(ErrorCode::DuplicateImage, "image '" + uuid + "' is already loaded", {uuid});
  }
  ensure_ungrouped();
  for (const auto& uuid : o.uuids) {
    image_order_.push_back(uuid);
    labels_.emplace(uuid, LabelAssignment{PathSet{ungrouped_path()}, false});
  }
}

void CoderSession::apply_op(const op::CreateTaxon& o) {
  const auto& parent = require_node(tree_, o.parent);
  validate_taxon_name(o.name);
  if (is_root_ungrouped(o.parent))
    fail(ErrorCode::ReservedTaxon, "root-level 'ungrouped' cannot have children", {o.parent.joined()});
  if (parent.find_child(o.name))
    fail(ErrorCode::DuplicateSibling, "'" + show(o.parent) + "' already has a child named '" + o.name + "'",
         {o.parent.child(o.name).joined()});

  auto& node = *tree_.find(o.parent);
  TaxonNode fresh{o.name, {}, NodeOrigin::Manual, {}};
  if (node.is_leaf())
    give_first_child(node, o.parent, std::move(fresh));
  else
    node.children.push_back(std::move(fresh));
}

void CoderSession::apply_op(const op::ApplyPartition& o) {
  require_not_root(o.path, "divide");
  const auto& node = require_node(tree_, o.path);
  if (!node.is_leaf()) fail(ErrorCode::NotALeaf, "only a leaf can be divided", {o.path.joined()});
  if (is_root_ungrouped(o.path))
    fail(ErrorCode::ReservedTaxon, "root-level 'ungrouped' cannot be divided; rename it first", {o.path.joined()});
  if (o.parts.empty()) fail(ErrorCode::InvalidPartition, "partition has no parts");

  std::set<std::string_view> names;
  std::set<std::string_view> members;
  for (const auto& part : o.parts) {
    try {
      validate_taxon_name(part.name);
    } catch (const Error& e) {
      fail(ErrorCode::InvalidPartition, std::string("bad part name: ") + e.what(), {part.name});
    }
    if (!names.insert(part.name).second)
      fail(ErrorCode::InvalidPartition, "duplicate part name '" + part.name + "'", {part.name});
    for (const auto& uuid : part.members) {
      if (!members.insert(uuid).second)
        fail(ErrorCode::InvalidPartition, "image '" + uuid + "' appears in two parts", {uuid});
      auto it = labels_.find(uuid);
      if (it == labels_.end() || !it->second.paths.count(o.path))
        fail(ErrorCode::InvalidPartition, "image '" + uuid + "' is not labeled at '" + o.path.joined() + "'", {uuid});
    }
  }
  std::vector<std::string> missing;
  for (const auto& uuid : images_at(o.path))
    if (!members.count(uuid)) missing.push_back(uuid);
  if (!missing.empty())
    fail(ErrorCode::InvalidPartition, "partition does not cover every image at '" + o.path.joined() + "'",
         std::move(missing));

  auto& target = *tree_.find(o.path);
  for (const auto& part : o.parts) {
    target.children.push_back(TaxonNode{part.name, {}, o.origin, {}});
    const auto dest = o.path.child(part.name);
    for (const auto& uuid : part.members) {
      auto& paths = labels_.at(uuid).paths;
      paths.erase(o.path);
      paths.insert(dest);
    }
  }
}

void CoderSession::apply_op(const op::FlattenTaxon& o) {
  require_not_root(o.path, "flatten");
  const auto& node = require_node(tree_, o.path);
  if (node.is_leaf()) fail(ErrorCode::NothingToFlatten, "'" + o.path.joined() + "' has no children", {o.path.joined()});

  for (auto& [uuid, a] : labels_) {
    if (std::none_of(a.paths.begin(), a.paths.end(), [&](const TaxonPath& p) { return o.path.is_proper_prefix_of(p); }))
      continue;
    PathSet next;
    for (const auto& p : a.paths) next.insert(o.path.is_proper_prefix_of(p) ? o.path : p);
    a.paths = std::move(next);
  }
  tree_.find(o.path)->children.clear();
}

void CoderSession::apply_op(const op::MergeTaxa& o) {
  require_not_root(o.source, "merge");
  require_not_root(o.target, "merge");
  const auto& src = require_node(tree_, o.source);
  const auto& dst = require_node(tree_, o.target);
  if (o.source == o.target) fail(ErrorCode::SelfMerge, "cannot merge a taxon into itself", {o.source.joined()});
  if (!src.is_leaf() || !dst.is_leaf())
    fail(ErrorCode::NonLeafMerge, "merge operands must both be leaves", {o.source.joined(), o.target.joined()});

  for (auto& [uuid, a] : labels_)
    if (a.paths.erase(o.source)) a.paths.insert(o.target);
  auto& siblings = tree_.find(o.source.parent())->children;
  std::erase_if(siblings, [&](const TaxonNode& n) { return n.name == o.source.leaf_name(); });
}

void CoderSession::apply_op(const op::MoveTaxon& o) {
  require_not_root(o.path, "move");
  const auto& node = require_node(tree_, o.path);
  const auto& dest = require_node(tree_, o.new_parent);
  if (o.path.is_prefix_of(o.new_parent))
    fail(ErrorCode::CyclicMove, "cannot move '" + o.path.joined() + "' under itself",
         {o.path.joined(), o.new_parent.joined()});
  if (is_root_ungrouped(o.new_parent))
    fail(ErrorCode::ReservedTaxon, "root-level 'ungrouped' cannot have children", {o.new_parent.joined()});

  const auto old_parent = o.path.parent();
  const auto& name = o.path.leaf_name();
  if (old_parent != o.new_parent && dest.find_child(name))
    fail(ErrorCode::DuplicateSibling, "'" + show(o.new_parent) + "' already has a child named '" + name + "'",
         {o.new_parent.child(name).joined()});
  if (o.new_parent.is_root() && name == kUngrouped && !node.is_leaf())
    fail(ErrorCode::ReservedTaxon, "root-level 'ungrouped' must stay a leaf", {o.path.joined()});
  if (dest.is_leaf() && name == kUngrouped && !node.is_leaf() && !images_at(o.new_parent).empty())
    fail(ErrorCode::ReservedTaxon, "images at the new parent would land on an internal 'ungrouped'",
         {o.path.joined()});

  auto& siblings = tree_.find(old_parent)->children;
  auto it = std::find_if(siblings.begin(), siblings.end(), [&](const TaxonNode& n) { return n.name == name; });
  TaxonNode moved = std::move(*it);
  siblings.erase(it);

  // the new parent's path is unaffected by the detach (it is not under o.path)
  auto& parent = *tree_.find(o.new_parent);
  if (old_parent == o.new_parent) {
    parent.children.push_back(std::move(moved));
    return;
  }
  rewrite_prefix(o.path, o.new_parent.child(name));
  if (parent.is_leaf())
    give_first_child(parent, o.new_parent, std::move(moved));
  else
    parent.children.push_back(std::move(moved));
}

void CoderSession::apply_op(const op::RenameTaxon& o) {
  require_not_root(o.path, "rename");
  const auto& node = require_node(tree_, o.path);
  validate_taxon_name(o.new_name);
  if (o.new_name == o.path.leaf_name()) return;
  const auto parent_path = o.path.parent();
  if (tree_.find(parent_path)->find_child(o.new_name))
    fail(ErrorCode::DuplicateSibling, "'" + show(parent_path) + "' already has a child named '" + o.new_name + "'",
         {parent_path.child(o.new_name).joined()});
  if (parent_path.is_root() && o.new_name == kUngrouped && !node.is_leaf())
    fail(ErrorCode::ReservedTaxon, "root-level 'ungrouped' must stay a leaf", {o.path.joined()});

  tree_.find(o.path)->name = o.new_name;
  rewrite_prefix(o.path, parent_path.child(o.new_name));
}

void CoderSession::apply_op(const op::RemoveTaxon& o) {
  if (o.path.is_root()) fail(ErrorCode::CannotRemoveRoot, "root cannot be removed");
  require_node(tree_, o.path);
  if (is_root_ungrouped(o.path) && !images_at(o.path).empty())
    fail(ErrorCode::ReservedTaxon, "root-level 'ungrouped' still holds images", {o.path.joined()});

  for (auto& [uuid, a] : labels_)
    std::erase_if(a.paths, [&](const TaxonPath& p) { return o.path.is_prefix_of(p); });
  auto& siblings = tree_.find(o.path.parent())->children;
  std::erase_if(siblings, [&](const TaxonNode& n) { return n.name == o.path.leaf_name(); });
  park_orphans();
}

void CoderSession::apply_op(const op::LabelImage& o) {
  auto it = labels_.find(o.uuid);
  if (it == labels_.end()) fail(ErrorCode::NoSuchImage, "image '" + o.uuid + "' is not loaded", {o.uuid});
  const auto& node = require_node(tree_, o.leaf);
  if (o.leaf.is_root() || !node.is_leaf())
    fail(ErrorCode::NonLeafLabel, "images can only be labeled at leaves", {show(o.leaf)});

  auto& paths = it->second.paths;
  const auto ungrouped = ungrouped_path();
  if (o.leaf != ungrouped && paths.size() == 1 && *paths.begin() == ungrouped) paths.clear();
  paths.insert(o.leaf);
}

void CoderSession::apply_op(const op::UnlabelImage& o) {
  auto it = labels_.find(o.uuid);
  if (it == labels_.end()) fail(ErrorCode::NoSuchImage, "image '" + o.uuid + "' is not loaded", {o.uuid});
  if (!it->second.paths.erase(o.leaf))
    fail(ErrorCode::NoSuchAssignment, "image '" + o.uuid + "' is not labeled at '" + show(o.leaf) + "'",
         {o.uuid, o.leaf.joined()});
  park_orphans();
}

void CoderSession::apply_op(const op::SetUnsure& o) {
  auto it = labels_.find(o.uuid);
  if (it == labels_.end()) fail(ErrorCode::NoSuchImage, "image '" + o.uuid + "' is not loaded", {o.uuid});
  it->second.unsure = o.flag;
}

void CoderSession::apply_op(const op::SetNote& o) {
  require_node(tree_, o.path);
  tree_.find(o.path)->note = o.note;
}

void CoderSession::apply_op(const op::AddMemo& o) { memos_.push_back(o.text); }

}  // namespace taxa
