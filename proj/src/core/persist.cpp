#include "taxa/persist.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

#include "taxa/error.hpp"

namespace taxa {

namespace {

[[noreturn]] void format_fail(const std::string& why) { throw Error(ErrorCode::FormatError, why); }

const Json& member(const Json& j, const char* key) {
  if (!j.is_object()) format_fail(std::string("expected an object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) format_fail(std::string("missing field '") + key + "'");
  return *it;
}

std::string string_member(const Json& j, const char* key) {
  const auto& v = member(j, key);
  if (!v.is_string()) format_fail(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

const Json& array_member(const Json& j, const char* key) {
  const auto& v = member(j, key);
  if (!v.is_array()) format_fail(std::string("field '") + key + "' must be an array");
  return v;
}

std::vector<std::string> string_list(const Json& j, const char* what) {
  if (!j.is_array()) format_fail(std::string(what) + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& s : j) {
    if (!s.is_string()) format_fail(std::string(what) + " must be an array of strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

NodeOrigin origin_from(const std::string& s) {
  if (s == "manual") return NodeOrigin::Manual;
  if (s == "machine-cluster") return NodeOrigin::MachineCluster;
  format_fail("unknown node origin '" + s + "'");
}

Json node_to_json(const TaxonNode& n) {
  Json j = Json::object();
  j["name"] = n.name;
  j["origin"] = std::string(origin_name(n.origin));
  if (!n.note.empty()) j["note"] = n.note;
  j["children"] = Json::array();
  for (const auto& c : n.children) j["children"].push_back(node_to_json(c));
  return j;
}

TaxonNode node_from_json(const Json& j, int depth) {
  if (depth > 256) format_fail("tree is nested too deeply");
  TaxonNode n;
  n.name = string_member(j, "name");
  n.origin = origin_from(string_member(j, "origin"));
  if (j.contains("note")) n.note = string_member(j, "note");
  for (const auto& c : array_member(j, "children")) n.children.push_back(node_from_json(c, depth + 1));
  return n;
}

template <class F>
auto guarded(F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Json::exception& e) {
    format_fail(std::string("malformed JSON: ") + e.what());
  }
}

template <class F>
void each_line(std::string_view bytes, F&& on_record) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < bytes.size()) {
    auto end = bytes.find('\n', start);
    if (end == std::string_view::npos) end = bytes.size();
    auto line = bytes.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }))
      continue;
    Json rec;
    try {
      rec = Json::parse(line);
    } catch (const Json::exception& e) {
      format_fail("line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      on_record(rec);
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what(), e.details());
    } catch (const Json::exception& e) {
      format_fail("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

std::string dump_canonical(const Json& doc) {
  try {
    return doc.dump(2, ' ', false, Json::error_handler_t::strict) + "\n";
  } catch (const Json::exception& e) {
    format_fail(std::string("cannot encode document: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + file.string() + "'", {file.string()});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& file, std::string_view bytes) {
  static std::atomic<unsigned> counter{0};
  auto tmp = file;
  tmp += ".tmp-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + tmp.string() + "'", {tmp.string()});
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write to '" + tmp.string() + "' failed", {tmp.string()});
  }
  std::error_code ec;
  std::filesystem::rename(tmp, file, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot replace '" + file.string() + "'", {file.string()});
  }
}

// ---- building blocks -------------------------------------------------------

Json path_to_json(const TaxonPath& path) { return Json(path.segments); }

TaxonPath path_from_json(const Json& j) {
  auto segs = string_list(j, "taxon path");
  for (const auto& s : segs)
    if (s.empty()) format_fail("taxon path has an empty segment");
  return TaxonPath(std::move(segs));
}

Json tree_to_json(const TaxonomyTree& tree) { return node_to_json(tree.root()); }

TaxonomyTree tree_from_json(const Json& j) {
  auto root = node_from_json(j, 0);
  if (root.name != kRootName) format_fail("tree root must be named 'root'");
  return TaxonomyTree(std::move(root));
}

namespace {

Json parts_to_json(const std::vector<op::PartitionPart>& parts) {
  Json out = Json::array();
  for (const auto& p : parts) out.push_back(Json{{"name", p.name}, {"members", p.members}});
  return out;
}

}  // namespace

Json operation_to_json(const Operation& operation) {
  Json j = Json::object();
  j["op"] = std::string(operation_kind(operation));
  std::visit(
      [&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, op::LoadBatch>) {
          j["uuids"] = o.uuids;
        } else if constexpr (std::is_same_v<T, op::CreateTaxon>) {
          j["parent"] = path_to_json(o.parent);
          j["name"] = o.name;
        } else if constexpr (std::is_same_v<T, op::ApplyPartition>) {
          j["path"] = path_to_json(o.path);
          j["parts"] = parts_to_json(o.parts);
          j["origin"] = std::string(origin_name(o.origin));
        } else if constexpr (std::is_same_v<T, op::FlattenTaxon> || std::is_same_v<T, op::RemoveTaxon>) {
          j["path"] = path_to_json(o.path);
        } else if constexpr (std::is_same_v<T, op::MergeTaxa>) {
          j["source"] = path_to_json(o.source);
          j["target"] = path_to_json(o.target);
        } else if constexpr (std::is_same_v<T, op::MoveTaxon>) {
          j["path"] = path_to_json(o.path);
          j["new_parent"] = path_to_json(o.new_parent);
        } else if constexpr (std::is_same_v<T, op::RenameTaxon>) {
          j["path"] = path_to_json(o.path);
          j["new_name"] = o.new_name;
        } else if constexpr (std::is_same_v<T, op::LabelImage> || std::is_same_v<T, op::UnlabelImage>) {
          j["uuid"] = o.uuid;
          j["leaf"] = path_to_json(o.leaf);
        } else if constexpr (std::is_same_v<T, op::SetUnsure>) {
          j["uuid"] = o.uuid;
          j["flag"] = o.flag;
        } else if constexpr (std::is_same_v<T, op::SetNote>) {
          j["path"] = path_to_json(o.path);
          j["note"] = o.note;
        } else if constexpr (std::is_same_v<T, op::AddMemo>) {
          j["text"] = o.text;
        }
      },
      operation);
  return j;
}

Operation operation_from_json(const Json& j) {
  const auto kind = string_member(j, "op");
  auto path = [&](const char* key) { return path_from_json(member(j, key)); };
  if (kind == "load_batch") return op::LoadBatch{string_list(member(j, "uuids"), "uuids")};
  if (kind == "create_taxon") return op::CreateTaxon{path("parent"), string_member(j, "name")};
  if (kind == "apply_partition") {
    op::ApplyPartition o;
    o.path = path("path");
    for (const auto& p : array_member(j, "parts"))
      o.parts.push_back(op::PartitionPart{string_member(p, "name"), string_list(member(p, "members"), "members")});
    o.origin = j.contains("origin") ? origin_from(string_member(j, "origin")) : NodeOrigin::MachineCluster;
    return o;
  }
  if (kind == "flatten_taxon") return op::FlattenTaxon{path("path")};
  if (kind == "merge_taxa") return op::MergeTaxa{path("source"), path("target")};
  if (kind == "move_taxon") return op::MoveTaxon{path("path"), path("new_parent")};
  if (kind == "rename_taxon") return op::RenameTaxon{path("path"), string_member(j, "new_name")};
  if (kind == "remove_taxon") return op::RemoveTaxon{path("path")};
  if (kind == "label_image") return op::LabelImage{string_member(j, "uuid"), path("leaf")};
  if (kind == "unlabel_image") return op::UnlabelImage{string_member(j, "uuid"), path("leaf")};
  if (kind == "set_unsure") {
    const auto& flag = member(j, "flag");
    if (!flag.is_boolean()) format_fail("field 'flag' must be a boolean");
    return op::SetUnsure{string_member(j, "uuid"), flag.get<bool>()};
  }
  if (kind == "set_note") return op::SetNote{path("path"), string_member(j, "note")};
  if (kind == "add_memo") return op::AddMemo{string_member(j, "text")};
  format_fail("unknown operator '" + kind + "'");
}

// ---- sessions --------------------------------------------------------------

Json session_to_json(const CoderSession& s) {
  Json doc = Json::object();
  doc["format"] = "taxa-session";
  doc["format_version"] = kFormatVersion;
  doc["session_id"] = s.session_id();
  doc["coder_id"] = s.coder_id();
  doc["version"] = s.version();
  doc["tree"] = tree_to_json(s.tree());
  Json images = Json::array();
  for (const auto& uuid : s.image_order()) {
    const auto& a = *s.label(uuid);
    Json paths = Json::array();
    for (const auto& p : a.paths) paths.push_back(path_to_json(p));
    images.push_back(Json{{"uuid", uuid}, {"paths", std::move(paths)}, {"unsure", a.unsure}});
  }
  doc["images"] = std::move(images);
  Json log = Json::array();
  for (const auto& e : s.log()) {
    auto rec = operation_to_json(e.operation);
    rec["version"] = e.version;
    log.push_back(std::move(rec));
  }
  doc["log"] = std::move(log);
  doc["memos"] = s.memos();
  return doc;
}

CoderSession session_from_json(const Json& doc) {
  return guarded([&] {
    if (string_member(doc, "format") != "taxa-session") format_fail("not a session document");
    const auto& fv = member(doc, "format_version");
    if (!fv.is_number_integer() || fv.get<int>() != kFormatVersion)
      format_fail("unsupported session format version");

    auto tree = tree_from_json(member(doc, "tree"));
    std::vector<std::string> order;
    std::map<std::string, LabelAssignment> labels;
    for (const auto& img : array_member(doc, "images")) {
      auto uuid = string_member(img, "uuid");
      LabelAssignment a;
      for (const auto& p : array_member(img, "paths")) a.paths.insert(path_from_json(p));
      const auto& unsure = member(img, "unsure");
      if (!unsure.is_boolean()) format_fail("field 'unsure' must be a boolean");
      a.unsure = unsure.get<bool>();
      if (!labels.emplace(uuid, std::move(a)).second) format_fail("image '" + uuid + "' listed twice");
      order.push_back(std::move(uuid));
    }
    std::vector<LogEntry> log;
    for (const auto& rec : array_member(doc, "log")) {
      const auto& v = member(rec, "version");
      if (!v.is_number_unsigned()) format_fail("log version must be a non-negative integer");
      log.push_back(LogEntry{v.get<std::uint64_t>(), operation_from_json(rec)});
    }
    const auto& version = member(doc, "version");
    if (!version.is_number_unsigned() || version.get<std::uint64_t>() != log.size())
      format_fail("session version does not match the log length");
    auto memos = doc.contains("memos") ? string_list(doc["memos"], "memos") : std::vector<std::string>{};

    try {
      return CoderSession::from_state(string_member(doc, "coder_id"), string_member(doc, "session_id"),
                                      std::move(tree), std::move(order), std::move(labels), std::move(log),
                                      std::move(memos));
    } catch (const Error& e) {
      format_fail(std::string("invalid session state: ") + e.what());
    }
  });
}

std::string save_session(const CoderSession& session) { return dump_canonical(session_to_json(session)); }

CoderSession load_session(std::string_view bytes) {
  Json doc;
  try {
    doc = Json::parse(bytes);
  } catch (const Json::exception& e) {
    format_fail(std::string("malformed JSON: ") + e.what());
  }
  return session_from_json(doc);
}

void save_session_file(const CoderSession& session, const std::filesystem::path& file) {
  write_file_atomic(file, save_session(session));
}

CoderSession load_session_file(const std::filesystem::path& file) {
  try {
    return load_session(read_file(file));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IoError) throw;
    throw Error(e.code(), file.string() + ": " + e.what(), e.details());
  }
}

// ---- corpus metadata -------------------------------------------------------

std::optional<int> parse_publish_year(std::string_view text) {
  if (text.size() < 4) return std::nullopt;
  int year = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) return std::nullopt;
    year = year * 10 + (text[i] - '0');
  }
  return year;
}

std::vector<ImageRecord> load_dataset(std::string_view bytes) {
  return guarded([&] {
    Json doc = Json::parse(bytes);
    if (!doc.is_array()) format_fail("dataset must be a JSON array of records");
    std::vector<ImageRecord> out;
    std::set<std::string> seen;
    for (const auto& rec : doc) {
      ImageRecord r;
      r.uuid = string_member(rec, "uuid");
      if (r.uuid.empty()) format_fail("record has an empty uuid");
      if (!seen.insert(r.uuid).second)
        throw Error(ErrorCode::DuplicateImage, "dataset lists '" + r.uuid + "' twice", {r.uuid});
      for (const auto& [key, value] : rec.items()) {
        if (key == "uuid") continue;
        r.source_fields.emplace(key, value.dump());
        if ((key == "displayName" || key == "display_name") && value.is_string()) r.display_name = value.get<std::string>();
        if ((key == "publishDate" || key == "publish_date") && value.is_string())
          r.publish_year = parse_publish_year(value.get<std::string>());
      }
      out.push_back(std::move(r));
    }
    return out;
  });
}

std::vector<ImageRecord> load_dataset_file(const std::filesystem::path& file) { return load_dataset(read_file(file)); }

ImageCatalog make_catalog(const std::vector<ImageRecord>& records) {
  ImageCatalog out;
  for (const auto& r : records) out.emplace(r.uuid, r);
  return out;
}

// ---- tables ----------------------------------------------------------------

EmbeddingTable load_embeddings(std::string_view bytes) {
  EmbeddingTable table;
  each_line(bytes, [&](const Json& rec) {
    auto uuid = string_member(rec, "uuid");
    const auto& vec = array_member(rec, "vector");
    Vector v;
    v.reserve(vec.size());
    for (const auto& x : vec) {
      if (!x.is_number()) format_fail("vector components must be numbers");
      v.push_back(x.get<double>());
    }
    table.add(std::move(uuid), std::move(v));
  });
  return table;
}

CaptionTable load_captions(std::string_view bytes) {
  CaptionTable table;
  each_line(bytes, [&](const Json& rec) {
    auto uuid = string_member(rec, "uuid");
    auto caption = string_member(rec, "caption");
    if (!table.text.emplace(uuid, std::move(caption)).second)
      throw Error(ErrorCode::DuplicateImage, "duplicate caption for '" + uuid + "'", {uuid});
    table.ids.push_back(std::move(uuid));
  });
  return table;
}

std::vector<ProbabilityRow> load_probabilities(std::string_view bytes) {
  std::vector<ProbabilityRow> rows;
  std::set<std::string> seen;
  each_line(bytes, [&](const Json& rec) {
    ProbabilityRow row;
    row.uuid = string_member(rec, "uuid");
    if (!seen.insert(row.uuid).second)
      throw Error(ErrorCode::DuplicateImage, "duplicate probability row for '" + row.uuid + "'", {row.uuid});
    const auto& probs = member(rec, "probs");
    if (!probs.is_object()) format_fail("field 'probs' must be an object");
    for (const auto& [key, value] : probs.items()) {
      auto path = TaxonPath::parse(key);
      if (path.is_root() || std::any_of(path.segments.begin(), path.segments.end(), [](auto& s) { return s.empty(); }))
        format_fail("bad leaf path '" + key + "'");
      if (!value.is_number()) format_fail("probability for '" + key + "' must be a number");
      const double p = value.get<double>();
      if (!(p >= 0.0 && p <= 1.0)) format_fail("probability for '" + key + "' is outside [0,1]");
      row.probs.emplace(std::move(path), p);
    }
    rows.push_back(std::move(row));
  });
  return rows;
}

EmbeddingTable load_embeddings_file(const std::filesystem::path& file) { return load_embeddings(read_file(file)); }
CaptionTable load_captions_file(const std::filesystem::path& file) { return load_captions(read_file(file)); }
std::vector<ProbabilityRow> load_probabilities_file(const std::filesystem::path& file) {
  return load_probabilities(read_file(file));
}

std::string save_embeddings(const EmbeddingTable& table) {
  std::string out;
  for (const auto& uuid : table.ids()) {
    Json rec = Json::object();
    rec["uuid"] = uuid;
    rec["vector"] = table.at(uuid);
    out += rec.dump() + "\n";
  }
  return out;
}

// ---- batch sampling --------------------------------------------------------

namespace {

// Unbiased draw from [0, bound] by rejection.
std::uint64_t draw_at_most(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) return 0;
  const std::uint64_t span = bound + 1;
  if (span == 0) return rng();
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
  while (true) {
    const auto x = rng();
    if (x < limit) return x % span;
  }
}

}  // namespace

BatchPlan sample_batches(std::vector<std::string> uuids, std::size_t batch_size, std::size_t n_batches,
                         std::uint64_t seed) {
  if (batch_size == 0 || n_batches == 0)
    throw Error(ErrorCode::InvalidArgument, "batch size and batch count must be positive");
  std::sort(uuids.begin(), uuids.end());
  if (std::adjacent_find(uuids.begin(), uuids.end()) != uuids.end())
    throw Error(ErrorCode::DuplicateImage, "corpus lists a uuid twice");
  if (batch_size * n_batches > uuids.size())
    throw Error(ErrorCode::NotEnoughImages, "corpus has " + std::to_string(uuids.size()) + " images, plan needs " +
                                                std::to_string(batch_size * n_batches));
  std::mt19937_64 rng(seed);
  for (std::size_t i = uuids.size(); i-- > 1;) {
    const auto j = static_cast<std::size_t>(draw_at_most(rng, i));
    std::swap(uuids[i], uuids[j]);
  }
  BatchPlan plan;
  plan.seed = seed;
  plan.batch_size = batch_size;
  for (std::size_t b = 0; b < n_batches; ++b)
    plan.batches.emplace_back(uuids.begin() + static_cast<long>(b * batch_size),
                              uuids.begin() + static_cast<long>((b + 1) * batch_size));
  return plan;
}

Json batch_plan_to_json(const BatchPlan& plan) {
  return Json{{"format", "taxa-batches"},
              {"format_version", kFormatVersion},
              {"seed", plan.seed},
              {"batch_size", plan.batch_size},
              {"batches", plan.batches}};
}

// ---- results ---------------------------------------------------------------

Json labeling_to_json(const Labeling& labels, const std::vector<std::string>& order) {
  Json images = Json::array();
  auto emit = [&](const std::string& uuid, const PathSet& paths) {
    Json ps = Json::array();
    for (const auto& p : paths) ps.push_back(path_to_json(p));
    images.push_back(Json{{"uuid", uuid}, {"paths", std::move(ps)}});
  };
  if (order.empty()) {
    for (const auto& [uuid, paths] : labels) emit(uuid, paths);
  } else {
    for (const auto& uuid : order)
      if (auto it = labels.find(uuid); it != labels.end()) emit(uuid, it->second);
  }
  return Json{{"format", "taxa-labeling"}, {"format_version", kFormatVersion}, {"images", std::move(images)}};
}

Labeling labeling_from_json(const Json& doc) {
  return guarded([&] {
    const auto format = string_member(doc, "format");
    if (format == "taxa-session") return session_from_json(doc).labeling();
    if (format != "taxa-labeling" && format != "taxa-merged") format_fail("not a labeling document: " + format);
    Labeling out;
    for (const auto& img : array_member(doc, "images")) {
      auto uuid = string_member(img, "uuid");
      PathSet paths;
      for (const auto& p : array_member(img, "paths")) {
        auto path = path_from_json(p);
        if (path.is_root()) format_fail("label path must not be empty");
        paths.insert(std::move(path));
      }
      if (!out.emplace(uuid, std::move(paths)).second)
        throw Error(ErrorCode::DuplicateImage, "image '" + uuid + "' listed twice", {uuid});
    }
    return out;
  });
}

Labeling load_labeling_file(const std::filesystem::path& file) {
  const auto text = read_file(file);
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    format_fail(file.string() + ": malformed JSON: " + e.what());
  }
  return labeling_from_json(doc);
}

Json rational_to_json(const Rational& r) { return Json{{"value", to_double(r)}, {"exact", to_fraction_string(r)}}; }

Json report_to_json(const MetricsReport& report) {
  Json j = Json::object();
  j["exact_match"] = rational_to_json(report.exact_match);
  j["jaccard"] = rational_to_json(report.jaccard);
  j["node_iou"] = report.node_iou ? rational_to_json(*report.node_iou) : Json(nullptr);
  j["depth"] = report.depth ? Json(*report.depth) : Json(nullptr);
  j["n_images"] = report.n_images;
  return j;
}

Json majority_to_json(const MajorityMerge& merged) {
  auto doc = labeling_to_json(merged.labels, merged.images);
  doc["format"] = "taxa-merged";
  doc["strategy"] = "majority";
  doc["coders"] = merged.coders;
  doc["tree"] = tree_to_json(merged.tree);
  return doc;
}

Json union_to_json(const AnnotatedMergedTree& merged) {
  Json nodes = Json::array();
  for (const auto& path : merged.tree.paths()) {
    const auto& ann = merged.nodes.at(path);
    nodes.push_back(Json{{"path", path_to_json(path)},
                         {"creators", ann.creators},
                         {"assigned", ann.assigned},
                         {"consensus_count", ann.consensus_count},
                         {"partial_count", ann.partial_count},
                         {"partial_images", ann.partial_images}});
  }
  return Json{{"format", "taxa-union"},
              {"format_version", kFormatVersion},
              {"strategy", "union"},
              {"coders", merged.coders},
              {"tree", tree_to_json(merged.tree)},
              {"nodes", std::move(nodes)},
              {"warnings", merged.warnings}};
}

Json partition_to_json(const ClusterPartition& partition) {
  Json parts = Json::array();
  for (const auto& p : partition.parts)
    parts.push_back(Json{{"name", p.name},
                         {"members", p.members},
                         {"representative", p.representative},
                         {"caption", p.caption}});
  return Json{{"parts", std::move(parts)}};
}

ClusterPartition partition_from_json(const Json& j) {
  return guarded([&] {
    ClusterPartition out;
    for (const auto& p : array_member(j, "parts")) {
      ClusterPart part;
      part.name = string_member(p, "name");
      part.members = string_list(member(p, "members"), "members");
      if (p.contains("representative")) part.representative = string_member(p, "representative");
      if (p.contains("caption")) part.caption = string_member(p, "caption");
      out.parts.push_back(std::move(part));
    }
    return out;
  });
}

}  // namespace taxa
