#include "taxa/taxa.h"

#include <cstdlib>
#include <cstring>

#include "taxa/assist.hpp"
#include "taxa/compare.hpp"
#include "taxa/error.hpp"
#include "taxa/persist.hpp"
#include "taxa/predict.hpp"
#include "taxa/report.hpp"
#include "taxa/service.hpp"

struct taxa_session {
  taxa::CoderSession session;
};

struct taxa_server {
  std::unique_ptr<taxa::Service> service;
};

namespace {

using taxa::Error;
using taxa::ErrorCode;
using taxa::Json;

thread_local std::string g_last_error;
thread_local std::string g_last_details = "[]";

taxa_status fail(ErrorCode code, const std::string& message, const std::vector<std::string>& details = {}) {
  g_last_error = message;
  g_last_details = Json(details).dump();
  return static_cast<taxa_status>(code);
}

template <class F>
taxa_status guard(F&& f) noexcept {
  try {
    f();
    return TAXA_OK;
  } catch (const Error& e) {
    return fail(e.code(), e.what(), e.details());
  } catch (const Json::exception& e) {
    return fail(ErrorCode::FormatError, e.what());
  } catch (const std::bad_alloc&) {
    return fail(ErrorCode::Internal, "out of memory");
  } catch (const std::exception& e) {
    return fail(ErrorCode::Internal, e.what());
  } catch (...) {
    return fail(ErrorCode::Internal, "unknown failure");
  }
}

void need(const void* p, const char* what) {
  if (!p) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  need(out, "output pointer");
  *out = dup_string(s);
}

Json parse_json(const char* text, const char* what) {
  need(text, what);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string(what) + " is not valid JSON: " + e.what());
  }
}

std::vector<taxa::CoderSession> gather(const taxa_session* const* sessions, std::size_t n) {
  if (n > 0) need(sessions, "sessions");
  std::vector<taxa::CoderSession> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    need(sessions[i], "session");
    out.push_back(sessions[i]->session);
  }
  return out;
}

std::optional<int> depth_arg(int depth) { return depth > 0 ? std::optional<int>(depth) : std::nullopt; }

taxa::Rational rational_from_json(const Json& j) {
  if (j.is_object() && j.contains("exact")) return taxa::Rational(j.at("exact").get<std::string>());
  if (j.is_number()) return taxa::Rational(j.get<double>());
  throw Error(ErrorCode::FormatError, "metric value must be {value, exact} or a number");
}

std::string embeddings_jsonl(const std::vector<std::string>& uuids, const std::vector<std::filesystem::path>& files) {
  taxa::EmbeddingTable table;
  for (std::size_t i = 0; i < uuids.size(); ++i) {
    auto vec = taxa::fallback_embed(taxa::decode_image_file(files[i]));
    table.add(uuids[i], std::move(vec));
  }
  return taxa::save_embeddings(table);
}

}  // namespace

extern "C" {

const char* taxa_version_string(void) { return "0.1.0"; }

const char* taxa_status_name(taxa_status status) {
  static thread_local std::string name;
  name = std::string(taxa::error_code_name(static_cast<ErrorCode>(status)));
  return name.c_str();
}

const char* taxa_last_error(void) { return g_last_error.c_str(); }
const char* taxa_last_error_details(void) { return g_last_details.c_str(); }

void taxa_string_free(char* s) { std::free(s); }

taxa_status taxa_session_create(const char* coder_id, const char* session_id, taxa_session** out) {
  return guard([&] {
    need(coder_id, "coder_id");
    need(out, "output pointer");
    auto s = taxa::CoderSession::create(coder_id, session_id ? session_id : "");
    *out = new taxa_session{std::move(s)};
  });
}

taxa_status taxa_session_load(const char* bytes, size_t len, taxa_session** out) {
  return guard([&] {
    need(bytes, "bytes");
    need(out, "output pointer");
    *out = new taxa_session{taxa::load_session(std::string_view(bytes, len))};
  });
}

taxa_status taxa_session_load_file(const char* path, taxa_session** out) {
  return guard([&] {
    need(path, "path");
    need(out, "output pointer");
    *out = new taxa_session{taxa::load_session_file(path)};
  });
}

taxa_status taxa_session_clone(const taxa_session* session, taxa_session** out) {
  return guard([&] {
    need(session, "session");
    need(out, "output pointer");
    *out = new taxa_session{session->session};
  });
}

void taxa_session_free(taxa_session* session) { delete session; }

taxa_status taxa_session_save(const taxa_session* session, char** out_json) {
  return guard([&] {
    need(session, "session");
    put(out_json, taxa::save_session(session->session));
  });
}

taxa_status taxa_session_save_file(const taxa_session* session, const char* path) {
  return guard([&] {
    need(session, "session");
    need(path, "path");
    taxa::save_session_file(session->session, path);
  });
}

taxa_status taxa_session_apply(taxa_session* session, const char* op_json, uint64_t* out_version) {
  return guard([&] {
    need(session, "session");
    const auto operation = taxa::operation_from_json(parse_json(op_json, "op_json"));
    const auto v = session->session.apply(operation);
    if (out_version) *out_version = v;
  });
}

uint64_t taxa_session_version(const taxa_session* session) { return session ? session->session.version() : 0; }

taxa_status taxa_session_query(const taxa_session* session, const char* filter_json, char** out_json) {
  return guard([&] {
    need(session, "session");
    const auto f = parse_json(filter_json, "filter_json");
    taxa::ImageFilter filter;
    if (f.contains("uuid"))
      filter = taxa::ImageFilter::by_uuid(f.at("uuid").get<std::string>());
    else if (f.contains("q"))
      filter = taxa::ImageFilter::by_keyword(f.at("q").get<std::string>());
    else
      filter = taxa::ImageFilter::by_taxon(f.contains("taxon") ? taxa::path_from_json(f.at("taxon")) : taxa::TaxonPath{});
    put(out_json, Json(session->session.query_images(filter)).dump());
  });
}

taxa_status taxa_session_labels(const taxa_session* session, char** out_json) {
  return guard([&] {
    need(session, "session");
    Json out = Json::object();
    for (const auto& [uuid, a] : session->session.labels()) {
      Json paths = Json::array();
      for (const auto& p : a.paths) paths.push_back(taxa::path_to_json(p));
      out[uuid] = Json{{"paths", std::move(paths)}, {"unsure", a.unsure}};
    }
    put(out_json, out.dump());
  });
}

taxa_status taxa_merge(const taxa_session* const* sessions, size_t n, const char* strategy, char** out_json) {
  return guard([&] {
    need(strategy, "strategy");
    const auto all = gather(sessions, n);
    const std::string s = strategy;
    if (s == "union")
      put(out_json, taxa::dump_canonical(taxa::union_to_json(taxa::union_merge(all))));
    else if (s == "majority")
      put(out_json, taxa::dump_canonical(taxa::majority_to_json(taxa::majority_merge(all))));
    else
      throw Error(ErrorCode::InvalidArgument, "unknown merge strategy '" + s + "'", {s});
  });
}

taxa_status taxa_diff(const taxa_session* const* sessions, size_t n, char** out_text) {
  return guard([&] { put(out_text, taxa::render_union_tree(taxa::union_merge(gather(sessions, n)))); });
}

taxa_status taxa_metrics(const taxa_session* const* sessions, size_t n, int depth, char** out_json) {
  return guard([&] {
    const auto all = gather(sessions, n);
    std::vector<std::string> warnings;
    auto doc = taxa::report_to_json(taxa::agreement_report(all, depth_arg(depth), &warnings));
    doc["warnings"] = warnings;
    put(out_json, taxa::dump_canonical(doc));
  });
}

taxa_status taxa_render_report(const char* report_json, char** out_text) {
  return guard([&] {
    const auto j = parse_json(report_json, "report_json");
    taxa::MetricsReport r;
    r.exact_match = rational_from_json(j.at("exact_match"));
    r.jaccard = rational_from_json(j.at("jaccard"));
    if (j.contains("node_iou") && !j.at("node_iou").is_null()) r.node_iou = rational_from_json(j.at("node_iou"));
    if (j.contains("depth") && !j.at("depth").is_null()) r.depth = j.at("depth").get<int>();
    r.n_images = j.value("n_images", std::size_t{0});
    put(out_text, taxa::render_report(r));
  });
}

taxa_status taxa_dissensus(const taxa_session* const* sessions, size_t n, char** out_json) {
  return guard([&] {
    const auto all = gather(sessions, n);
    put(out_json, Json{{"dissensus", taxa::dissensus_images(all)}, {"unsure", taxa::unsure_images(all)}}.dump());
  });
}

taxa_status taxa_sample(const char* dataset_path, size_t batch_size, size_t n_batches, uint64_t seed,
                        char** out_json) {
  return guard([&] {
    need(dataset_path, "dataset_path");
    std::vector<std::string> uuids;
    for (const auto& r : taxa::load_dataset_file(dataset_path)) uuids.push_back(r.uuid);
    const auto plan = taxa::sample_batches(std::move(uuids), batch_size, n_batches, seed);
    put(out_json, taxa::dump_canonical(taxa::batch_plan_to_json(plan)));
  });
}

taxa_status taxa_cluster(const taxa_session* session, const char* path_json, const char* embeddings_path,
                         const char* captions_path, uint64_t seed, char** out_json) {
  return guard([&] {
    need(session, "session");
    need(embeddings_path, "embeddings_path");
    const auto path = taxa::path_from_json(parse_json(path_json, "path_json"));
    const auto emb = taxa::load_embeddings_file(embeddings_path);
    const auto caps = captions_path ? taxa::load_captions_file(captions_path) : taxa::CaptionTable{};
    auto doc = taxa::partition_to_json(taxa::cluster_taxon(session->session, path, emb, caps, seed));
    doc["path"] = taxa::path_to_json(path);
    doc["seed"] = seed;
    put(out_json, taxa::dump_canonical(doc));
  });
}

taxa_status taxa_predict_similarity(const char* labels_path, const char* embeddings_path, const char* targets_json,
                                    char** out_json) {
  return guard([&] {
    need(labels_path, "labels_path");
    need(embeddings_path, "embeddings_path");
    const auto labeled = taxa::load_labeling_file(labels_path);
    const auto emb = taxa::load_embeddings_file(embeddings_path);
    std::vector<std::string> targets;
    if (targets_json) {
      targets = parse_json(targets_json, "targets_json").get<std::vector<std::string>>();
    } else {
      for (const auto& uuid : emb.ids())
        if (!labeled.count(uuid)) targets.push_back(uuid);
    }
    put(out_json, taxa::dump_canonical(taxa::labeling_to_json(taxa::similarity_predict(labeled, emb, targets), targets)));
  });
}

taxa_status taxa_predict_zeroshot(const char* probs_path, double threshold, char** out_json) {
  return guard([&] {
    need(probs_path, "probs_path");
    const auto rows = taxa::load_probabilities_file(probs_path);
    std::vector<std::string> order;
    for (const auto& r : rows) order.push_back(r.uuid);
    put(out_json, taxa::dump_canonical(taxa::labeling_to_json(taxa::zero_shot_predict(rows, threshold), order)));
  });
}

taxa_status taxa_evaluate(const char* pred_path, const char* gold_path, int depth, char** out_json) {
  return guard([&] {
    need(pred_path, "pred_path");
    need(gold_path, "gold_path");
    const auto report =
        taxa::evaluate(taxa::load_labeling_file(pred_path), taxa::load_labeling_file(gold_path), depth_arg(depth));
    put(out_json, taxa::dump_canonical(taxa::report_to_json(report)));
  });
}

taxa_status taxa_evaluate_loo(const char* labels_path, const char* embeddings_path, int depth, char** out_json) {
  return guard([&] {
    need(labels_path, "labels_path");
    need(embeddings_path, "embeddings_path");
    const auto report = taxa::loo_evaluate(taxa::load_labeling_file(labels_path),
                                           taxa::load_embeddings_file(embeddings_path), depth_arg(depth));
    put(out_json, taxa::dump_canonical(taxa::report_to_json(report)));
  });
}

taxa_status taxa_embed_file(const char* image_path, double* out, size_t out_len) {
  return guard([&] {
    need(image_path, "image_path");
    need(out, "out");
    if (out_len < taxa::kFallbackDim)
      throw Error(ErrorCode::InvalidArgument, "output buffer needs " + std::to_string(taxa::kFallbackDim) + " slots");
    const auto v = taxa::fallback_embed(taxa::decode_image_file(image_path));
    std::copy(v.begin(), v.end(), out);
  });
}

taxa_status taxa_embed_files(const char* const* uuids, const char* const* paths, size_t n, char** out_jsonl) {
  return guard([&] {
    if (n > 0) {
      need(uuids, "uuids");
      need(paths, "paths");
    }
    std::vector<std::string> ids;
    std::vector<std::filesystem::path> files;
    for (std::size_t i = 0; i < n; ++i) {
      need(uuids[i], "uuid");
      need(paths[i], "path");
      ids.emplace_back(uuids[i]);
      files.emplace_back(paths[i]);
    }
    put(out_jsonl, embeddings_jsonl(ids, files));
  });
}

taxa_status taxa_embed_dataset(const char* dataset_path, char** out_jsonl) {
  return guard([&] {
    need(dataset_path, "dataset_path");
    const std::filesystem::path base = std::filesystem::path(dataset_path).parent_path();
    std::vector<std::string> ids;
    std::vector<std::filesystem::path> files;
    for (const auto& r : taxa::load_dataset_file(dataset_path)) {
      for (const char* key : {"path", "localPath", "file"}) {
        auto it = r.source_fields.find(key);
        if (it == r.source_fields.end()) continue;
        const auto v = Json::parse(it->second);
        if (!v.is_string()) continue;
        std::filesystem::path p = v.get<std::string>();
        ids.push_back(r.uuid);
        files.push_back(p.is_relative() ? base / p : p);
        break;
      }
    }
    put(out_jsonl, embeddings_jsonl(ids, files));
  });
}

taxa_status taxa_server_create(const char* config_json, taxa_server** out) {
  return guard([&] {
    need(out, "output pointer");
    taxa::ServiceConfig cfg;
    const auto j = config_json ? parse_json(config_json, "config_json") : Json::object();
    auto opt_path = [&](const char* key, std::optional<std::filesystem::path>& slot) {
      if (j.contains(key) && !j.at(key).is_null()) slot = j.at(key).get<std::string>();
    };
    if (j.contains("host")) cfg.host = j.at("host").get<std::string>();
    if (j.contains("port")) cfg.port = j.at("port").get<int>();
    if (j.contains("data_dir")) cfg.data_dir = j.at("data_dir").get<std::string>();
    if (j.contains("cors_origin")) cfg.cors_origin = j.at("cors_origin").get<std::string>();
    if (j.contains("worker_threads")) cfg.worker_threads = j.at("worker_threads").get<int>();
    opt_path("dataset", cfg.dataset);
    opt_path("embeddings", cfg.embeddings);
    opt_path("captions", cfg.captions);
    opt_path("probabilities", cfg.probabilities);
    opt_path("static_dir", cfg.static_dir);
    *out = new taxa_server{std::make_unique<taxa::Service>(std::move(cfg))};
  });
}

taxa_status taxa_server_bind(taxa_server* server, int* out_port) {
  return guard([&] {
    need(server, "server");
    const int port = server->service->bind();
    if (out_port) *out_port = port;
  });
}

taxa_status taxa_server_run(taxa_server* server) {
  return guard([&] {
    need(server, "server");
    server->service->run();
  });
}

void taxa_server_stop(taxa_server* server) {
  if (server) server->service->stop();
}

void taxa_server_free(taxa_server* server) { delete server; }

}  // extern "C"
