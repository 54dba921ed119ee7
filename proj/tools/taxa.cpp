#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "taxa/taxa.h"

namespace {

struct Failure {
  taxa_status status;
};

void check(taxa_status s) {
  if (s != TAXA_OK) throw Failure{s};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  taxa_string_free(s);
  return out;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + out_path);
}

class Sessions {
 public:
  explicit Sessions(const std::vector<std::string>& files) {
    for (const auto& f : files) {
      taxa_session* s = nullptr;
      check(taxa_session_load_file(f.c_str(), &s));
      handles_.push_back(s);
    }
  }
  ~Sessions() {
    for (auto* s : handles_) taxa_session_free(s);
  }
  Sessions(const Sessions&) = delete;
  Sessions& operator=(const Sessions&) = delete;

  const taxa_session* const* data() const { return handles_.data(); }
  std::size_t size() const { return handles_.size(); }

 private:
  std::vector<taxa_session*> handles_;
};

std::string path_json(const std::string& joined) {
  nlohmann::json segs = nlohmann::json::array();
  std::size_t start = 0;
  while (!joined.empty()) {
    auto slash = joined.find('/', start);
    segs.push_back(joined.substr(start, slash - start));
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
  return segs.dump();
}

taxa_server* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) taxa_server_stop(g_server);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative image taxonomy workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", taxa_version_string());

  std::string out;
  auto add_out = [&](CLI::App* sub) { sub->add_option("-o,--output", out, "Output file (default stdout)"); };

  // sample
  auto* sample = app.add_subcommand("sample", "Draw disjoint random batches from a dataset");
  std::string dataset;
  std::size_t batch_size = 100, n_batches = 1;
  std::uint64_t seed = 0;
  sample->add_option("dataset", dataset, "Dataset metadata JSON")->required()->check(CLI::ExistingFile);
  sample->add_option("--batch-size", batch_size, "Images per batch")->check(CLI::PositiveNumber);
  sample->add_option("--batches", n_batches, "Number of batches")->check(CLI::PositiveNumber);
  sample->add_option("--seed", seed, "PRNG seed");
  add_out(sample);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string host = "127.0.0.1", data_dir = "taxa-data", serve_embeddings, serve_captions, serve_probs, static_dir,
              cors;
  int port = 8080;
  int threads = 8;
  serve->add_option("--host", host)->envname("TAXA_HOST");
  serve->add_option("--port", port)->envname("TAXA_PORT")->check(CLI::Range(0, 65535));
  serve->add_option("--data-dir", data_dir, "Session storage directory")->envname("TAXA_DATA_DIR");
  serve->add_option("--dataset", dataset)->envname("TAXA_DATASET")->check(CLI::ExistingFile);
  serve->add_option("--embeddings", serve_embeddings)->envname("TAXA_EMBEDDINGS")->check(CLI::ExistingFile);
  serve->add_option("--captions", serve_captions)->envname("TAXA_CAPTIONS")->check(CLI::ExistingFile);
  serve->add_option("--probs", serve_probs)->envname("TAXA_PROBS")->check(CLI::ExistingFile);
  serve->add_option("--static", static_dir, "Directory of web assets")->envname("TAXA_STATIC")->check(CLI::ExistingDirectory);
  serve->add_option("--cors-origin", cors)->envname("TAXA_CORS_ORIGIN");
  serve->add_option("--threads", threads)->check(CLI::PositiveNumber);

  // merge
  auto* merge = app.add_subcommand("merge", "Merge coder sessions");
  std::vector<std::string> inputs;
  std::string strategy = "majority";
  merge->add_option("sessions", inputs, "Session files")->required()->check(CLI::ExistingFile);
  merge->add_option("--strategy", strategy)->check(CLI::IsMember({"union", "majority"}));
  add_out(merge);

  // diff
  auto* diff = app.add_subcommand("diff", "Show the union merge as an annotated tree");
  diff->add_option("sessions", inputs, "Session files")->required()->check(CLI::ExistingFile);
  add_out(diff);

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Agreement between coder sessions");
  int depth = 0;
  bool as_json = false;
  metrics->add_option("sessions", inputs, "Session files")->required()->check(CLI::ExistingFile);
  metrics->add_option("--depth", depth, "Truncate paths to this depth")->check(CLI::PositiveNumber);
  metrics->add_flag("--json", as_json, "Emit JSON instead of a table");
  add_out(metrics);

  // cluster
  auto* cluster = app.add_subcommand("cluster", "Preview an automatic division of a leaf taxon");
  std::string session_file, taxon, embeddings, captions;
  cluster->add_option("session", session_file)->required()->check(CLI::ExistingFile);
  cluster->add_option("--taxon", taxon, "Leaf path, '/'-separated")->required();
  cluster->add_option("--embeddings", embeddings)->required()->check(CLI::ExistingFile);
  cluster->add_option("--captions", captions)->check(CLI::ExistingFile);
  cluster->add_option("--seed", seed);
  add_out(cluster);

  // predict
  auto* predict = app.add_subcommand("predict", "Predict labels for uncoded images");
  std::string method = "similarity", labels, probs;
  std::vector<std::string> targets;
  double threshold = 0.3;
  predict->add_option("--method", method)->check(CLI::IsMember({"similarity", "zeroshot"}));
  predict->add_option("--labels", labels, "Labeled set (session, merged or labeling file)")->check(CLI::ExistingFile);
  predict->add_option("--embeddings", embeddings)->check(CLI::ExistingFile);
  predict->add_option("--target", targets, "Image to predict (default: all unlabeled embedded images)");
  predict->add_option("--probs", probs, "Probability rows (JSON Lines)")->check(CLI::ExistingFile);
  predict->add_option("--threshold", threshold)->check(CLI::Range(0.0, 1.0));
  add_out(predict);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold labels");
  std::string pred, gold;
  bool loo = false;
  evaluate->add_option("--pred", pred, "Predicted labeling")->check(CLI::ExistingFile);
  evaluate->add_option("--gold", gold, "Gold labeling")->check(CLI::ExistingFile);
  evaluate->add_flag("--loo", loo, "Leave-one-out similarity matching over --labels");
  evaluate->add_option("--labels", labels)->check(CLI::ExistingFile);
  evaluate->add_option("--embeddings", embeddings)->check(CLI::ExistingFile);
  evaluate->add_option("--depth", depth)->check(CLI::PositiveNumber);
  evaluate->add_flag("--json", as_json);
  add_out(evaluate);

  // embed
  auto* embed = app.add_subcommand("embed", "Compute fallback embeddings");
  std::vector<std::string> images;
  embed->add_option("images", images, "Image files; uuid is the file stem")->check(CLI::ExistingFile);
  embed->add_option("--dataset", dataset, "Embed every dataset record with a local file")->check(CLI::ExistingFile);
  add_out(embed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  auto usage = [](const std::string& msg) {
    std::cerr << "taxa: " << msg << "\n";
    return 2;
  };

  try {
    char* text = nullptr;
    if (*sample) {
      check(taxa_sample(dataset.c_str(), batch_size, n_batches, seed, &text));
      emit(take(text), out);
    } else if (*serve) {
      nlohmann::json cfg{{"host", host}, {"port", port}, {"data_dir", data_dir}, {"cors_origin", cors},
                         {"worker_threads", threads}};
      if (!dataset.empty()) cfg["dataset"] = dataset;
      if (!serve_embeddings.empty()) cfg["embeddings"] = serve_embeddings;
      if (!serve_captions.empty()) cfg["captions"] = serve_captions;
      if (!serve_probs.empty()) cfg["probabilities"] = serve_probs;
      if (!static_dir.empty()) cfg["static_dir"] = static_dir;
      check(taxa_server_create(cfg.dump().c_str(), &g_server));
      int bound = 0;
      auto status = taxa_server_bind(g_server, &bound);
      if (status == TAXA_OK) {
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        std::cerr << "taxa: listening on http://" << host << ":" << bound << "\n";
        status = taxa_server_run(g_server);
      }
      taxa_server_free(g_server);
      g_server = nullptr;
      check(status);
    } else if (*merge) {
      Sessions s(inputs);
      check(taxa_merge(s.data(), s.size(), strategy.c_str(), &text));
      emit(take(text), out);
    } else if (*diff) {
      Sessions s(inputs);
      check(taxa_diff(s.data(), s.size(), &text));
      emit(take(text), out);
    } else if (*metrics) {
      Sessions s(inputs);
      check(taxa_metrics(s.data(), s.size(), depth, &text));
      auto report = take(text);
      for (const auto& w : nlohmann::json::parse(report)["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
      if (!as_json) {
        check(taxa_render_report(report.c_str(), &text));
        report = take(text);
      }
      emit(report, out);
    } else if (*cluster) {
      Sessions s({session_file});
      check(taxa_cluster(s.data()[0], path_json(taxon).c_str(), embeddings.c_str(),
                         captions.empty() ? nullptr : captions.c_str(), seed, &text));
      emit(take(text), out);
    } else if (*predict) {
      if (method == "similarity") {
        if (labels.empty() || embeddings.empty()) return usage("similarity prediction needs --labels and --embeddings");
        const std::string t = nlohmann::json(targets).dump();
        check(taxa_predict_similarity(labels.c_str(), embeddings.c_str(), targets.empty() ? nullptr : t.c_str(), &text));
      } else {
        if (probs.empty()) return usage("zero-shot prediction needs --probs");
        check(taxa_predict_zeroshot(probs.c_str(), threshold, &text));
      }
      emit(take(text), out);
    } else if (*evaluate) {
      if (loo) {
        if (labels.empty() || embeddings.empty()) return usage("--loo needs --labels and --embeddings");
        check(taxa_evaluate_loo(labels.c_str(), embeddings.c_str(), depth, &text));
      } else {
        if (pred.empty() || gold.empty()) return usage("evaluate needs --pred and --gold (or --loo)");
        check(taxa_evaluate(pred.c_str(), gold.c_str(), depth, &text));
      }
      auto report = take(text);
      if (!as_json) {
        check(taxa_render_report(report.c_str(), &text));
        report = take(text);
      }
      emit(report, out);
    } else if (*embed) {
      if (images.empty() == dataset.empty()) return usage("embed takes image files or --dataset, not both");
      if (!dataset.empty()) {
        check(taxa_embed_dataset(dataset.c_str(), &text));
      } else {
        std::vector<std::string> ids;
        std::vector<const char*> id_ptrs, path_ptrs;
        for (const auto& f : images) ids.push_back(std::filesystem::path(f).stem().string());
        for (std::size_t i = 0; i < images.size(); ++i) {
          id_ptrs.push_back(ids[i].c_str());
          path_ptrs.push_back(images[i].c_str());
        }
        check(taxa_embed_files(id_ptrs.data(), path_ptrs.data(), images.size(), &text));
      }
      emit(take(text), out);
    }
  } catch (const Failure& f) {
    std::cerr << "taxa: " << taxa_status_name(f.status) << ": " << taxa_last_error() << "\n";
    const std::string details = taxa_last_error_details();
    if (details != "[]") std::cerr << "  details: " << details << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "taxa: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
