#include <doctest.h>

#include <filesystem>
#include <set>

#include "taxa/error.hpp"
#include "taxa/persist.hpp"
#include "testkit.hpp"

using namespace taxa;
using testkit::P;

namespace {

const std::filesystem::path kFixtures = TAXA_FIXTURES;

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Ok;
}

using testkit::TempDir;

}  // namespace

TEST_SUITE("session files") {
  TEST_CASE("golden fixture") {
    const auto bytes = read_file(kFixtures / "session.json");
    const auto golden = testkit::golden_session();
    CHECK(save_session(golden) == bytes);
    auto loaded = load_session(bytes);
    CHECK(loaded == golden);
    CHECK(save_session(loaded) == bytes);
    CHECK(loaded.label("1b2e")->unsure);
    CHECK(loaded.memos() == std::vector<std::string>{"revisit the table images"});
    CHECK(loaded.tree().find(P({"map"}))->note == "Geographic base layer");
    CHECK(loaded.tree().find(P({"chart", "line graph"})) != nullptr);
  }

  TEST_CASE("canonical layout") {
    const auto text = save_session(CoderSession::create("bob", "s1"));
    CHECK(text.back() == '\n');
    CHECK(text.find('\r') == std::string::npos);
    CHECK(text.find("\n  \"coder_id\": \"bob\"") != std::string::npos);
    auto doc = Json::parse(text);
    CHECK(doc["format"] == "taxa-session");
    CHECK(doc["format_version"] == 1);
    CHECK(doc["tree"]["name"] == "root");
    CHECK(doc["images"].empty());
    CHECK(doc["log"].empty());
    // keys are sorted
    std::vector<std::string> keys;
    for (const auto& [k, v] : doc.items()) keys.push_back(k);
    CHECK(std::is_sorted(keys.begin(), keys.end()));
    CHECK(text.find("\"coder_id\"") < text.find("\"format\""));
  }

  TEST_CASE("random round trips") {
    testkit::Rng rng(21);
    testkit::OpGen gen{testkit::image_ids(12), {"a", "b", "c", "map", "chart"}};
    for (int round = 0; round < 100; ++round) {
      auto s = testkit::random_session(rng, "coder", gen, 25);
      const auto once = save_session(s);
      auto back = load_session(once);
      CHECK(back == s);
      CHECK(save_session(back) == once);
    }
  }

  TEST_CASE("corrupt files") {
    for (const char* name : {"session_truncated.json", "session_bad_version.json", "session_internal_label.json",
                             "session_version_mismatch.json", "session_not_json.json"}) {
      INFO(name);
      CHECK(code_of([&] { load_session_file(kFixtures / "corrupt" / name); }) == ErrorCode::FormatError);
    }
    CHECK(code_of([] { load_session("{}"); }) == ErrorCode::FormatError);
    CHECK(code_of([] { load_session("[]"); }) == ErrorCode::FormatError);
    CHECK(code_of([] { load_session_file(kFixtures / "absent.json"); }) == ErrorCode::IoError);
  }

  TEST_CASE("atomic write") {
    TempDir dir;
    const auto file = dir.path / "s.json";
    save_session_file(testkit::golden_session(), file);
    CHECK(load_session_file(file) == testkit::golden_session());
    save_session_file(CoderSession::create("x"), file);
    CHECK(load_session_file(file).coder_id() == "x");
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path)) ++entries;
    CHECK(entries == 1);
  }

  TEST_CASE("operations") {
    for (const Json& j : {Json{{"op", "create_taxon"}, {"parent", Json::array()}, {"name", "x"}},
                          Json{{"op", "label_image"}, {"uuid", "u"}, {"leaf", {"a", "b"}}},
                          Json{{"op", "set_unsure"}, {"uuid", "u"}, {"flag", true}}}) {
      CHECK(operation_to_json(operation_from_json(j)) == j);
    }
    CHECK(code_of([] { operation_from_json(Json{{"op", "explode"}}); }) == ErrorCode::FormatError);
    CHECK(code_of([] { operation_from_json(Json{{"op", "create_taxon"}, {"name", "x"}}); }) == ErrorCode::FormatError);
    CHECK(code_of([] { operation_from_json(Json{{"op", "label_image"}, {"uuid", "u"}, {"leaf", "a/b"}}); }) ==
          ErrorCode::FormatError);
  }
}

TEST_SUITE("dataset") {
  TEST_CASE("fixture") {
    auto recs = load_dataset_file(kFixtures / "dataset.json");
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].uuid == "0a1f");
    CHECK(recs[1].uuid == "1b2e");
    CHECK(recs[2].uuid == "2c3d");
    CHECK(recs[0].display_name == "Chart of the Mediterranean");
    CHECK(recs[0].publish_year == 1852);
    CHECK_FALSE(recs[1].publish_year.has_value());
    CHECK(recs[2].publish_year == 1899);
    CHECK(recs[0].source_fields.count("authors") == 1);
    CHECK(Json::parse(recs[0].source_fields.at("source"))["name"] == "Atlas collection");
    CHECK(recs[1].source_fields.at("viewUrl") == "\"https://example.org/view/1b2e\"");
    auto cat = make_catalog(recs);
    CHECK(cat.size() == 3);
  }

  TEST_CASE("year parsing") {
    CHECK(parse_publish_year("1852-03-01") == 1852);
    CHECK(parse_publish_year("1899") == 1899);
    CHECK_FALSE(parse_publish_year("c. 1820").has_value());
    CHECK_FALSE(parse_publish_year("185").has_value());
    CHECK_FALSE(parse_publish_year("").has_value());
  }

  TEST_CASE("bad datasets") {
    CHECK(code_of([] { load_dataset_file(kFixtures / "corrupt" / "dataset_missing_uuid.json"); }) ==
          ErrorCode::FormatError);
    CHECK(code_of([] { load_dataset_file(kFixtures / "corrupt" / "dataset_duplicate.json"); }) ==
          ErrorCode::DuplicateImage);
    CHECK(code_of([] { load_dataset("{\"uuid\": \"a\"}"); }) == ErrorCode::FormatError);
    CHECK(code_of([] { load_dataset("[{\"uuid\": 3}]"); }) == ErrorCode::FormatError);
    CHECK(code_of([] { load_dataset("[{\"uuid\": \"a\""); }) == ErrorCode::FormatError);
  }
}

TEST_SUITE("tables") {
  TEST_CASE("embeddings") {
    auto t = load_embeddings_file(kFixtures / "embeddings.jsonl");
    CHECK(t.size() == 3);
    CHECK(t.dim() == 4);
    CHECK(t.ids() == std::vector<std::string>{"0a1f", "1b2e", "2c3d"});
    CHECK(t.at("1b2e")[2] == 0.25);
    CHECK(load_embeddings(save_embeddings(t)).ids() == t.ids());
    CHECK(code_of([] { load_embeddings_file(kFixtures / "corrupt" / "embeddings_dim.jsonl"); }) ==
          ErrorCode::DimMismatch);
    CHECK(code_of([] { load_embeddings_file(kFixtures / "corrupt" / "embeddings_duplicate.jsonl"); }) ==
          ErrorCode::DuplicateImage);
    CHECK(code_of([] { load_embeddings("{\"uuid\": \"a\", \"vector\": [1, \"x\"]}\n"); }) == ErrorCode::FormatError);
    CHECK(load_embeddings("\n{\"uuid\": \"a\", \"vector\": [1]}\n\n").size() == 1);
  }

  TEST_CASE("captions") {
    auto c = load_captions_file(kFixtures / "captions.jsonl");
    CHECK(c.ids.size() == 3);
    REQUIRE(c.find("1b2e") != nullptr);
    CHECK(c.find("1b2e")->empty());
    CHECK(*c.find("0a1f") == "it is a map of the sea");
  }

  TEST_CASE("probabilities") {
    auto rows = load_probabilities_file(kFixtures / "probs.jsonl");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].probs.at(P({"chart", "bar"})) == 0.3);
    auto pred = zero_shot_predict(rows);
    CHECK(pred.at("0a1f") == PathSet{P({"map"}), P({"chart"}), P({"chart", "bar"})});
    CHECK(pred.at("1b2e") == PathSet{P({"table"})});
    CHECK(pred.at("2c3d") == PathSet{P({"chart"}), P({"chart", "bar"}), P({"table"})});
    CHECK(code_of([] { load_probabilities_file(kFixtures / "corrupt" / "probs_range.jsonl"); }) ==
          ErrorCode::FormatError);
    CHECK(code_of([] { load_probabilities("{\"uuid\": \"a\", \"probs\": {\"\": 0.1}}\n"); }) ==
          ErrorCode::FormatError);
  }
}

TEST_SUITE("batches") {
  TEST_CASE("disjoint and deterministic") {
    const auto ids = testkit::image_ids(450, "v");
    auto a = sample_batches(ids, 100, 4, 7);
    auto b = sample_batches(ids, 100, 4, 7);
    CHECK(a.batches == b.batches);
    REQUIRE(a.batches.size() == 4);
    std::set<std::string> seen;
    for (const auto& batch : a.batches) {
      CHECK(batch.size() == 100);
      for (const auto& u : batch) CHECK(seen.insert(u).second);
    }
    for (const auto& u : seen) CHECK(std::find(ids.begin(), ids.end(), u) != ids.end());
    CHECK(sample_batches(ids, 100, 4, 8).batches != a.batches);
  }

  TEST_CASE("input order does not matter") {
    auto ids = testkit::image_ids(30);
    auto rev = ids;
    std::reverse(rev.begin(), rev.end());
    CHECK(sample_batches(ids, 5, 3, 1).batches == sample_batches(rev, 5, 3, 1).batches);
  }

  TEST_CASE("too small") {
    CHECK(code_of([] { sample_batches(testkit::image_ids(10), 4, 3, 0); }) == ErrorCode::NotEnoughImages);
    CHECK(sample_batches(testkit::image_ids(12), 4, 3, 0).batches.size() == 3);
  }

  TEST_CASE("json shape") {
    auto j = batch_plan_to_json(sample_batches(testkit::image_ids(6), 2, 2, 3));
    CHECK(j["seed"] == 3);
    CHECK(j["batch_size"] == 2);
    CHECK(j["batches"].size() == 2);
  }
}

TEST_SUITE("result documents") {
  TEST_CASE("labeling round trip") {
    Labeling l{{"x", {P({"a"}), P({"b", "c"})}}, {"y", {P({"a"})}}};
    auto doc = labeling_to_json(l, {"y", "x"});
    CHECK(labeling_from_json(doc) == l);
    CHECK(labeling_from_json(session_to_json(testkit::golden_session())) == testkit::golden_session().labeling());
  }

  TEST_CASE("rationals") {
    auto j = rational_to_json(Rational(2, 6));
    CHECK(j["exact"] == "1/3");
    CHECK(j["value"].get<double>() == doctest::Approx(1.0 / 3));
  }

  TEST_CASE("partitions") {
    ClusterPartition part{{{"cluster-0", {"a", "b"}, "a", "bar chart"}, {"cluster-1", {"c"}, "c", "unknown"}}};
    auto back = partition_from_json(partition_to_json(part));
    REQUIRE(back.parts.size() == 2);
    CHECK(back.parts[0].members == std::vector<std::string>{"a", "b"});
    CHECK(back.parts[1].caption == "unknown");
  }
}
