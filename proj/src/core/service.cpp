#include "taxa/service.hpp"

#include <httplib.h>

#include <iostream>
#include <map>
#include <mutex>
#include <shared_mutex>

#include "taxa/assist.hpp"
#include "taxa/compare.hpp"
#include "taxa/error.hpp"
#include "taxa/persist.hpp"
#include "taxa/predict.hpp"

namespace taxa {

namespace {

struct HttpError {
  int status;
  Json body;
};

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoSuchSession: return 404;
    case ErrorCode::VersionConflict: return 409;
    case ErrorCode::FormatError:
    case ErrorCode::InvalidArgument: return 400;
    case ErrorCode::Internal:
    case ErrorCode::IoError: return 500;
    default: return 422;
  }
}

Json error_body(std::string_view code, const std::string& message, Json details) {
  return Json{{"code", code}, {"message", message}, {"details", std::move(details)}};
}

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    auto j = Json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::FormatError, "request body must be a JSON object");
    return j;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("request body is not valid JSON: ") + e.what());
  }
}

std::optional<int> optional_depth(const Json& body) {
  if (!body.contains("depth") || body["depth"].is_null()) return std::nullopt;
  if (!body["depth"].is_number_integer() || body["depth"].get<int>() < 1)
    throw Error(ErrorCode::InvalidArgument, "depth must be a positive integer");
  return body["depth"].get<int>();
}

std::string content_type_for(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  if (ext == ".ppm" || ext == ".pgm") return "image/x-portable-anymap";
  return "application/octet-stream";
}

}  // namespace

struct Service::Impl {
  struct Entry {
    std::mutex mu;
    CoderSession session;
    explicit Entry(CoderSession s) : session(std::move(s)) {}
  };

  ServiceConfig config;
  httplib::Server server;
  std::shared_mutex store_mu;
  std::map<std::string, std::shared_ptr<Entry>> sessions;
  std::uint64_t next_id = 1;

  std::vector<ImageRecord> dataset;
  ImageCatalog catalog;
  EmbeddingTable embeddings;
  CaptionTable captions;
  std::vector<ProbabilityRow> probabilities;

  explicit Impl(ServiceConfig cfg) : config(std::move(cfg)) {
    std::filesystem::create_directories(config.data_dir);
    for (const auto& entry : std::filesystem::directory_iterator(config.data_dir)) {
      if (entry.path().extension() != ".json") continue;
      auto s = load_session_file(entry.path());
      auto id = s.session_id();
      sessions.emplace(std::move(id), std::make_shared<Entry>(std::move(s)));
    }
    if (config.dataset) {
      dataset = load_dataset_file(*config.dataset);
      catalog = make_catalog(dataset);
    }
    if (config.embeddings) embeddings = load_embeddings_file(*config.embeddings);
    if (config.captions) captions = load_captions_file(*config.captions);
    if (config.probabilities) probabilities = load_probabilities_file(*config.probabilities);
    routes();
  }

  // ---- plumbing ------------------------------------------------------------

  template <class Handler>
  httplib::Server::Handler wrap(Handler handler) {
    return [this, handler](const httplib::Request& req, httplib::Response& res) {
      int status = 200;
      Json body;
      try {
        body = handler(req, res, status);
      } catch (const HttpError& e) {
        status = e.status;
        body = e.body;
      } catch (const Error& e) {
        status = status_for(e.code());
        body = error_body(error_code_name(e.code()), e.what(), e.details());
      } catch (const std::exception& e) {
        status = 500;
        body = error_body("Internal", e.what(), Json::array());
      }
      if (!body.is_null()) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
      }
    };
  }

  std::filesystem::path file_for(const std::string& id) const { return config.data_dir / (id + ".json"); }

  std::shared_ptr<Entry> entry(const std::string& id) {
    std::shared_lock lock(store_mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw Error(ErrorCode::NoSuchSession, "no session '" + id + "'", {id});
    return it->second;
  }

  CoderSession snapshot(const std::string& id) {
    auto e = entry(id);
    std::lock_guard lock(e->mu);
    return e->session;
  }

  // Sessions named by id or given inline, in request order.
  std::vector<CoderSession> gather_sessions(const Json& body) {
    std::vector<CoderSession> out;
    if (body.contains("session_ids")) {
      if (!body["session_ids"].is_array()) throw Error(ErrorCode::FormatError, "session_ids must be an array");
      for (const auto& id : body["session_ids"]) {
        if (!id.is_string()) throw Error(ErrorCode::FormatError, "session_ids must hold strings");
        out.push_back(snapshot(id.get<std::string>()));
      }
    }
    if (body.contains("sessions")) {
      if (!body["sessions"].is_array()) throw Error(ErrorCode::FormatError, "sessions must be an array");
      for (const auto& doc : body["sessions"]) out.push_back(session_from_json(doc));
    }
    if (out.empty()) throw Error(ErrorCode::InvalidArgument, "no sessions given");
    return out;
  }

  // ---- routes --------------------------------------------------------------

  void routes() {
    if (!config.cors_origin.empty()) {
      server.set_default_headers({{"Access-Control-Allow-Origin", config.cors_origin},
                                  {"Access-Control-Allow-Headers", "Content-Type"},
                                  {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
      server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    }
    if (config.static_dir) server.set_mount_point("/", config.static_dir->string());

    server.Get("/api/health", wrap([this](const auto&, auto&, int&) {
      std::shared_lock lock(store_mu);
      return Json{{"status", "ok"}, {"sessions", sessions.size()}};
    }));

    server.Get("/api/sessions", wrap([this](const auto&, auto&, int&) {
      std::vector<std::shared_ptr<Entry>> all;
      {
        std::shared_lock lock(store_mu);
        for (const auto& [id, e] : sessions) all.push_back(e);
      }
      Json list = Json::array();
      for (const auto& e : all) {
        std::lock_guard lock(e->mu);
        list.push_back(Json{{"session_id", e->session.session_id()},
                            {"coder_id", e->session.coder_id()},
                            {"version", e->session.version()}});
      }
      return Json{{"sessions", std::move(list)}};
    }));

    server.Post("/api/sessions", wrap([this](const httplib::Request& req, auto&, int& status) {
      return create_session(parse_body(req), status);
    }));

    server.Get(R"(/api/sessions/([^/]+))", wrap([this](const httplib::Request& req, auto&, int&) {
      return session_to_json(snapshot(req.matches[1]));
    }));

    server.Post(R"(/api/sessions/([^/]+)/ops)", wrap([this](const httplib::Request& req, auto&, int&) {
      return mutate(req.matches[1], parse_body(req));
    }));

    server.Get(R"(/api/sessions/([^/]+)/images)", wrap([this](const httplib::Request& req, auto&, int&) {
      return images(req.matches[1], req);
    }));

    server.Post(R"(/api/sessions/([^/]+)/assist/divide)", wrap([this](const httplib::Request& req, auto&, int&) {
      return divide_preview(req.matches[1], parse_body(req));
    }));

    server.Post("/api/compare", wrap([this](const httplib::Request& req, auto&, int&) {
      return compare(parse_body(req));
    }));

    server.Post("/api/merge/majority", wrap([this](const httplib::Request& req, auto&, int&) {
      auto all = gather_sessions(parse_body(req));
      return majority_to_json(majority_merge(all));
    }));

    server.Post("/api/predict", wrap([this](const httplib::Request& req, auto&, int&) {
      return predict(parse_body(req));
    }));

    server.Get(R"(/api/images/([^/]+)/file)", wrap([this](const httplib::Request& req, httplib::Response& res, int&) {
      return image_file(req.matches[1], res);
    }));
  }

  Json create_session(const Json& body, int& status) {
    if (!body.contains("coder_id") || !body["coder_id"].is_string())
      throw Error(ErrorCode::FormatError, "coder_id must be a string");
    auto coder = body["coder_id"].get<std::string>();
    std::string id;
    if (body.contains("session_id")) {
      if (!body["session_id"].is_string()) throw Error(ErrorCode::FormatError, "session_id must be a string");
      id = body["session_id"].get<std::string>();
      if (!valid_session_id(id))
        throw Error(ErrorCode::InvalidArgument, "session id may only use letters, digits, '-', '_' and '.'", {id});
    }
    auto session = CoderSession::create(coder, id.empty() ? std::string("pending") : id);
    if (body.contains("uuids")) {
      if (!body["uuids"].is_array()) throw Error(ErrorCode::FormatError, "uuids must be an array");
      std::vector<std::string> uuids;
      for (const auto& u : body["uuids"]) {
        if (!u.is_string()) throw Error(ErrorCode::FormatError, "uuids must hold strings");
        uuids.push_back(u.get<std::string>());
      }
      if (!uuids.empty()) session.load_batch(std::move(uuids));
    }

    std::unique_lock lock(store_mu);
    if (id.empty()) {
      do {
        id = "session-" + std::to_string(next_id++);
      } while (sessions.count(id));
      session = CoderSession::replay(coder, id, session.log());
    } else if (sessions.count(id)) {
      throw HttpError{409, error_body("InvalidArgument", "session '" + id + "' already exists", Json::array({id}))};
    }
    save_session_file(session, file_for(id));
    auto doc = session_to_json(session);
    sessions.emplace(id, std::make_shared<Entry>(std::move(session)));
    status = 201;
    return doc;
  }

  Json mutate(const std::string& id, const Json& envelope) {
    auto e = entry(id);
    if (!envelope.contains("expected_version") || !envelope["expected_version"].is_number_unsigned())
      throw Error(ErrorCode::FormatError, "expected_version must be a non-negative integer");
    const auto expected = envelope["expected_version"].get<std::uint64_t>();
    const auto operation = operation_from_json(envelope);

    std::lock_guard lock(e->mu);
    const auto current = e->session.version();
    if (expected != current) {
      throw HttpError{409, error_body("VersionConflict",
                                      "session '" + id + "' is at version " + std::to_string(current) +
                                          ", request expected " + std::to_string(expected),
                                      Json{{"session_id", id},
                                           {"current_version", current},
                                           {"expected_version", expected},
                                           {"images", e->session.image_order().size()},
                                           {"nodes", e->session.tree().node_count() - 1}})};
    }
    auto next = e->session;
    next.apply(operation);
    save_session_file(next, file_for(id));

    Json changed = Json::array();
    for (const auto& uuid : next.image_order()) {
      const auto* before = e->session.label(uuid);
      const auto& after = *next.label(uuid);
      if (before && *before == after) continue;
      Json paths = Json::array();
      for (const auto& p : after.paths) paths.push_back(path_to_json(p));
      changed.push_back(Json{{"uuid", uuid}, {"paths", std::move(paths)}, {"unsure", after.unsure}});
    }
    e->session = std::move(next);
    return Json{{"session_id", id},
                {"version", e->session.version()},
                {"op", operation_to_json(operation)},
                {"tree", tree_to_json(e->session.tree())},
                {"changed", std::move(changed)}};
  }

  Json images(const std::string& id, const httplib::Request& req) {
    const auto s = snapshot(id);
    std::vector<std::string> uuids;
    if (req.has_param("uuid")) {
      uuids = s.query_images(ImageFilter::by_uuid(req.get_param_value("uuid")));
    } else if (req.has_param("q")) {
      uuids = s.query_images(ImageFilter::by_keyword(req.get_param_value("q")), &catalog);
    } else {
      auto taxon = req.has_param("taxon") ? TaxonPath::parse(req.get_param_value("taxon")) : TaxonPath{};
      uuids = s.query_images(ImageFilter::by_taxon(std::move(taxon)));
    }
    Json list = Json::array();
    for (const auto& uuid : uuids) {
      const auto& a = *s.label(uuid);
      Json paths = Json::array();
      for (const auto& p : a.paths) paths.push_back(path_to_json(p));
      Json item{{"uuid", uuid}, {"paths", std::move(paths)}, {"unsure", a.unsure}};
      if (auto it = catalog.find(uuid); it != catalog.end() && it->second.display_name)
        item["display_name"] = *it->second.display_name;
      list.push_back(std::move(item));
    }
    return Json{{"session_id", id}, {"version", s.version()}, {"images", std::move(list)}};
  }

  Json divide_preview(const std::string& id, const Json& body) {
    if (!body.contains("path")) throw Error(ErrorCode::FormatError, "missing field 'path'");
    const auto path = path_from_json(body["path"]);
    std::uint64_t seed = 0;
    if (body.contains("seed")) {
      if (!body["seed"].is_number_unsigned()) throw Error(ErrorCode::FormatError, "seed must be a non-negative integer");
      seed = body["seed"].get<std::uint64_t>();
    }
    const auto s = snapshot(id);
    auto partition = cluster_taxon(s, path, embeddings, captions, seed);
    return Json{{"session_id", id},
                {"version", s.version()},
                {"path", path_to_json(path)},
                {"seed", seed},
                {"partition", partition_to_json(partition)}};
  }

  Json compare(const Json& body) {
    auto all = gather_sessions(body);
    const auto depth = optional_depth(body);
    auto merged = union_merge(all);
    std::vector<std::string> warnings = merged.warnings;
    Json metrics = nullptr;
    if (all.size() >= 2) {
      if (shared_images(all).empty()) {
        warnings.push_back("sessions share no images; metrics omitted");
      } else {
        std::vector<std::string> metric_warnings;
        metrics = report_to_json(agreement_report(all, depth, &metric_warnings));
        warnings.insert(warnings.end(), metric_warnings.begin(), metric_warnings.end());
      }
    }
    Json coders = Json::array();
    for (const auto& s : all) coders.push_back(Json{{"session_id", s.session_id()}, {"coder_id", s.coder_id()}, {"version", s.version()}});
    return Json{{"sessions", std::move(coders)},
                {"union", union_to_json(merged)},
                {"majority", majority_to_json(majority_merge(all))},
                {"metrics", std::move(metrics)},
                {"dissensus", dissensus_images(all)},
                {"unsure", unsure_images(all)},
                {"warnings", std::move(warnings)}};
  }

  Json predict(const Json& body) {
    const auto method = body.value("method", std::string("similarity"));
    if (method == "similarity") {
      Labeling labeled;
      if (body.contains("session_id")) {
        if (!body["session_id"].is_string()) throw Error(ErrorCode::FormatError, "session_id must be a string");
        labeled = snapshot(body["session_id"].get<std::string>()).labeling();
      } else if (body.contains("labels")) {
        labeled = labeling_from_json(body["labels"]);
      } else {
        throw Error(ErrorCode::InvalidArgument, "similarity prediction needs session_id or labels");
      }
      std::vector<std::string> targets;
      if (body.contains("targets")) {
        if (!body["targets"].is_array()) throw Error(ErrorCode::FormatError, "targets must be an array");
        for (const auto& t : body["targets"]) {
          if (!t.is_string()) throw Error(ErrorCode::FormatError, "targets must hold strings");
          targets.push_back(t.get<std::string>());
        }
      } else {
        for (const auto& uuid : embeddings.ids())
          if (!labeled.count(uuid)) targets.push_back(uuid);
      }
      return labeling_to_json(similarity_predict(labeled, embeddings, targets), targets);
    }
    if (method == "zeroshot") {
      double threshold = kZeroShotThreshold;
      if (body.contains("threshold")) {
        if (!body["threshold"].is_number()) throw Error(ErrorCode::FormatError, "threshold must be a number");
        threshold = body["threshold"].get<double>();
      }
      std::vector<ProbabilityRow> rows;
      if (body.contains("rows")) {
        std::string jsonl;
        for (const auto& r : body["rows"]) jsonl += r.dump() + "\n";
        rows = load_probabilities(jsonl);
      } else {
        rows = probabilities;
      }
      std::vector<std::string> order;
      for (const auto& r : rows) order.push_back(r.uuid);
      return labeling_to_json(zero_shot_predict(rows, threshold), order);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown prediction method '" + method + "'");
  }

  Json image_file(const std::string& uuid, httplib::Response& res) {
    auto it = catalog.find(uuid);
    if (it == catalog.end()) throw HttpError{404, error_body("NoSuchImage", "no image '" + uuid + "'", Json::array({uuid}))};
    const auto& fields = it->second.source_fields;
    auto field = [&](const char* key) -> std::optional<std::string> {
      auto f = fields.find(key);
      if (f == fields.end()) return std::nullopt;
      auto v = Json::parse(f->second);
      if (!v.is_string()) return std::nullopt;
      return v.get<std::string>();
    };
    for (const char* key : {"path", "localPath", "file"}) {
      if (auto local = field(key)) {
        std::filesystem::path p = *local;
        if (p.is_relative() && config.dataset) p = config.dataset->parent_path() / p;
        const auto bytes = read_file(p);
        res.status = 200;
        res.set_content(bytes, content_type_for(p));
        return nullptr;
      }
    }
    for (const char* key : {"downloadUrl", "url", "viewUrl"}) {
      if (auto url = field(key)) {
        res.set_redirect(*url);
        return nullptr;
      }
    }
    throw HttpError{404, error_body("NoSuchImage", "image '" + uuid + "' has no file or URL", Json::array({uuid}))};
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
Service::~Service() { stop(); }

int Service::bind() {
  auto& cfg = impl_->config;
  if (cfg.worker_threads > 0) {
    const auto n = static_cast<std::size_t>(cfg.worker_threads);
    impl_->server.new_task_queue = [n] { return new httplib::ThreadPool(n); };
  }
  int port = cfg.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(cfg.host);
  } else if (!impl_->server.bind_to_port(cfg.host, port)) {
    port = -1;
  }
  if (port < 0) throw Error(ErrorCode::IoError, "cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
  return port;
}

void Service::run() { impl_->server.listen_after_bind(); }
void Service::stop() {
  if (impl_) impl_->server.stop();
}
bool Service::running() const { return impl_->server.is_running(); }

}  // namespace taxa
