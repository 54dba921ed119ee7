#include <doctest.h>

#include <cmath>

#include "taxa/error.hpp"
#include "taxa/predict.hpp"
#include "testkit.hpp"

using namespace taxa;
using testkit::P;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Ok;
}

std::string frac(const Rational& r) { return to_fraction_string(r); }

ProbabilityRow row(std::string uuid, std::initializer_list<std::pair<TaxonPath, double>> probs) {
  ProbabilityRow r{std::move(uuid), {}};
  for (const auto& [p, v] : probs) r.probs[p] = v;
  return r;
}

double naive_cos(const Vector& a, const Vector& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return (aa == 0 || bb == 0) ? 0 : ab / std::sqrt(aa * bb);
}

}  // namespace

TEST_SUITE("similarity") {
  TEST_CASE("nearest label set is copied") {
    Labeling labeled{{"u1", {P({"map"})}}, {"u2", {P({"table"})}}};
    EmbeddingTable emb;
    emb.add("u1", {1, 0});
    emb.add("u2", {0, 1});
    emb.add("t1", {0.9, 0.1});
    emb.add("t2", {0, 1});
    const std::vector<std::string> targets{"t1", "t2"};
    auto out = similarity_predict(labeled, emb, targets);
    CHECK(out.at("t1") == PathSet{P({"map"})});
    CHECK(out.at("t2") == PathSet{P({"table"})});
  }

  TEST_CASE("ties go to the smaller uuid") {
    Labeling labeled{{"b", {P({"table"})}}, {"a", {P({"map"})}}};
    EmbeddingTable emb;
    emb.add("b", {1, 0});
    emb.add("a", {0, 1});
    emb.add("t", {1, 1});
    const std::vector<std::string> targets{"t"};
    CHECK(similarity_predict(labeled, emb, targets).at("t") == PathSet{P({"map"})});
  }

  TEST_CASE("labeled target may match itself") {
    Labeling labeled{{"a", {P({"map"})}}, {"b", {P({"table"})}}};
    EmbeddingTable emb;
    emb.add("a", {1, 0});
    emb.add("b", {0.9, 0.1});
    const std::vector<std::string> targets{"b"};
    CHECK(similarity_predict(labeled, emb, targets).at("b") == PathSet{P({"table"})});
  }

  TEST_CASE("errors") {
    EmbeddingTable emb;
    emb.add("a", {1, 0});
    const std::vector<std::string> targets{"a", "x"};
    CHECK(code_of([&] { similarity_predict({}, emb, targets); }) == ErrorCode::EmptyLabeledSet);
    Labeling labeled{{"a", {P({"map"})}}, {"y", {P({"map"})}}};
    try {
      similarity_predict(labeled, emb, targets);
      FAIL("expected MissingEmbedding");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingEmbedding);
      CHECK(e.details() == std::vector<std::string>{"y", "x"});
    }
  }

  TEST_CASE("outputs are copies of input sets") {
    testkit::Rng rng(11);
    std::normal_distribution<double> g;
    const std::vector<TaxonPath> pool{P({"a"}), P({"a", "x"}), P({"b"}), P({"c", "d"})};
    for (int round = 0; round < 50; ++round) {
      Labeling labeled;
      EmbeddingTable emb;
      for (int i = 0; i < 8; ++i) {
        PathSet s;
        for (const auto& p : pool)
          if (testkit::coin(rng)) s.insert(p);
        if (s.empty()) s.insert(pool[0]);
        labeled["l" + std::to_string(i)] = s;
        emb.add("l" + std::to_string(i), {g(rng), g(rng), g(rng)});
      }
      std::vector<std::string> targets;
      for (int i = 0; i < 5; ++i) {
        targets.push_back("t" + std::to_string(i));
        emb.add(targets.back(), {g(rng), g(rng), g(rng)});
      }
      auto out = similarity_predict(labeled, emb, targets);
      for (const auto& t : targets) {
        bool found = false;
        for (const auto& [u, s] : labeled) found = found || s == out.at(t);
        CHECK(found);
      }
    }
  }
}

TEST_SUITE("zero-shot") {
  TEST_CASE("threshold is inclusive") {
    const std::vector<ProbabilityRow> rows{row("i", {{P({"A"}), 0.5}, {P({"B"}), 0.3}, {P({"C"}), 0.2}})};
    CHECK(zero_shot_predict(rows).at("i") == PathSet{P({"A"}), P({"B"})});
  }

  TEST_CASE("argmax always kept") {
    const std::vector<ProbabilityRow> rows{row("i", {{P({"A"}), 0.1}, {P({"B"}), 0.05}})};
    CHECK(zero_shot_predict(rows).at("i") == PathSet{P({"A"})});
  }

  TEST_CASE("ancestors are added") {
    const std::vector<ProbabilityRow> rows{row("i", {{P({"map", "cartogram"}), 0.9}, {P({"table"}), 0.1}})};
    CHECK(zero_shot_predict(rows).at("i") == PathSet{P({"map"}), P({"map", "cartogram"})});
  }

  TEST_CASE("argmax ties go to the smaller path") {
    const std::vector<ProbabilityRow> rows{row("i", {{P({"b"}), 0.2}, {P({"a"}), 0.2}})};
    CHECK(zero_shot_predict(rows).at("i") == PathSet{P({"a"})});
  }

  TEST_CASE("custom threshold and empty rows") {
    const std::vector<ProbabilityRow> rows{row("i", {{P({"A"}), 0.5}, {P({"B"}), 0.3}})};
    CHECK(zero_shot_predict(rows, 0.31).at("i") == PathSet{P({"A"})});
    const std::vector<ProbabilityRow> empty{ProbabilityRow{"e", {}}};
    CHECK(code_of([&] { zero_shot_predict(empty); }) == ErrorCode::EmptyProbabilityRow);
  }

  TEST_CASE("closure") {
    CHECK(ancestor_closure(PathSet{P({"a", "b", "c"})}) == PathSet{P({"a"}), P({"a", "b"}), P({"a", "b", "c"})});
    const PathSet closed{P({"a"}), P({"a", "b"})};
    CHECK(ancestor_closure(closed) == closed);
    CHECK(ancestor_closure(PathSet{}).empty());
    CHECK(ancestor_closure(PathSet{TaxonPath{}}).empty());
  }
}

TEST_SUITE("evaluate") {
  TEST_CASE("identical labelings") {
    Labeling l{{"x", {P({"a"})}}, {"y", {P({"b"}), P({"c"})}}};
    auto r = evaluate(l, l);
    CHECK(frac(r.exact_match) == "1/1");
    CHECK(frac(r.jaccard) == "1/1");
    CHECK(r.n_images == 2);
  }

  TEST_CASE("one third") {
    Labeling pred{{"x", {P({"a"}), P({"b"})}}};
    Labeling gold{{"x", {P({"b"}), P({"c"})}}};
    auto r = evaluate(pred, gold);
    CHECK(frac(r.exact_match) == "0/1");
    CHECK(frac(r.jaccard) == "1/3");
  }

  TEST_CASE("depth truncation") {
    Labeling pred{{"x", {P({"a"}), P({"a", "x"})}}};
    Labeling gold{{"x", {P({"a"}), P({"a", "y"})}}};
    CHECK(frac(evaluate(pred, gold).exact_match) == "0/1");
    auto r = evaluate(pred, gold, 1);
    CHECK(frac(r.exact_match) == "1/1");
    CHECK(r.depth == 1);
  }

  TEST_CASE("jaccard can drop under truncation even when closed") {
    // the extra top-level taxon weighs more once the shared sub-taxon is gone
    Labeling pred{{"x", {P({"a"}), P({"a", "x"})}}};
    Labeling gold{{"x", {P({"a"}), P({"a", "x"}), P({"c"})}}};
    CHECK(frac(evaluate(pred, gold).jaccard) == "2/3");
    CHECK(frac(evaluate(pred, gold, 1).jaccard) == "1/2");
  }

  TEST_CASE("symmetry and exact-match monotonicity on closed labelings") {
    testkit::Rng rng(5);
    const std::vector<TaxonPath> leaves{P({"a", "x"}), P({"a", "y"}), P({"b"}), P({"c", "d", "e"}), P({"c", "f"})};
    for (int round = 0; round < 200; ++round) {
      Labeling pred, gold;
      for (int i = 0; i < 6; ++i) {
        PathSet p, q;
        for (const auto& l : leaves) {
          if (testkit::coin(rng, 0.35)) p.insert(l);
          if (testkit::coin(rng, 0.35)) q.insert(l);
        }
        if (p.empty()) p.insert(leaves[testkit::pick(rng, leaves.size())]);
        if (q.empty()) q.insert(leaves[testkit::pick(rng, leaves.size())]);
        pred["i" + std::to_string(i)] = testkit::closure(p);
        gold["i" + std::to_string(i)] = testkit::closure(q);
      }
      auto ab = evaluate(pred, gold);
      auto ba = evaluate(gold, pred);
      CHECK(ab.exact_match == ba.exact_match);
      CHECK(ab.jaccard == ba.jaccard);
      CHECK(evaluate(pred, gold, 1).exact_match >= ab.exact_match);
      CHECK(frac(ab.jaccard) == testkit::oracle_jaccard({pred, gold}).str());
    }
  }

  TEST_CASE("image sets must match") {
    Labeling a{{"x", {P({"a"})}}};
    Labeling b{{"y", {P({"a"})}}};
    CHECK(code_of([&] { evaluate(a, b); }) == ErrorCode::ImageSetMismatch);
  }
}

TEST_SUITE("leave-one-out") {
  TEST_CASE("twins") {
    Labeling labeled;
    EmbeddingTable emb;
    for (int i = 0; i < 4; ++i) {
      const PathSet s{P({i % 2 ? "map" : "chart"}), TaxonPath{{"t" + std::to_string(i)}}};
      for (const char* side : {"a", "b"}) {
        const auto id = "p" + std::to_string(i) + side;
        labeled[id] = s;
        emb.add(id, {std::cos(i * 0.7), std::sin(i * 0.7)});
      }
    }
    auto r = loo_evaluate(labeled, emb);
    CHECK(frac(r.exact_match) == "1/1");
    CHECK(frac(r.jaccard) == "1/1");
  }

  TEST_CASE("orthogonal pair") {
    Labeling labeled{{"a", {P({"map"})}}, {"b", {P({"table"})}}};
    EmbeddingTable emb;
    emb.add("a", {1, 0});
    emb.add("b", {0, 1});
    auto r = loo_evaluate(labeled, emb);
    CHECK(frac(r.exact_match) == "0/1");
    CHECK(frac(r.jaccard) == "0/1");
  }

  TEST_CASE("six images against a per-image recomputation") {
    Labeling labeled{
        {"i1", {P({"map"})}},
        {"i2", {P({"map"}), P({"chart", "bar"})}},
        {"i3", {P({"chart", "bar"})}},
        {"i4", {P({"chart", "line"})}},
        {"i5", {P({"table"})}},
        {"i6", {P({"table"}), P({"map"})}},
    };
    std::map<std::string, Vector> vec{
        {"i1", {1.0, 0.0, 0.2}}, {"i2", {0.8, 0.3, 0.1}}, {"i3", {0.1, 1.0, 0.0}},
        {"i4", {0.0, 0.9, 0.5}}, {"i5", {0.2, 0.0, 1.0}}, {"i6", {0.6, 0.0, 0.7}},
    };
    EmbeddingTable emb;
    for (const auto& [u, v] : vec) emb.add(u, v);

    Labeling expected;
    for (const auto& [u, v] : vec) {
      std::string best;
      double best_sim = -2;
      for (const auto& [w, x] : vec) {
        if (w == u) continue;
        const double s = naive_cos(v, x);
        if (s > best_sim) best = w, best_sim = s;
      }
      expected[u] = labeled.at(best);
    }
    CHECK(loo_predictions(labeled, emb) == expected);
    auto r = loo_evaluate(labeled, emb);
    CHECK(frac(r.exact_match) == testkit::oracle_exact({expected, labeled}).str());
    CHECK(frac(r.jaccard) == testkit::oracle_jaccard({expected, labeled}).str());
    auto r1 = loo_evaluate(labeled, emb, 1);
    CHECK(frac(r1.exact_match) ==
          testkit::oracle_exact({truncate_labels(expected, 1), truncate_labels(labeled, 1)}).str());
  }

  TEST_CASE("too few images") {
    Labeling labeled{{"a", {P({"map"})}}};
    EmbeddingTable emb;
    emb.add("a", {1, 0});
    CHECK(code_of([&] { loo_evaluate(labeled, emb); }) == ErrorCode::NotEnoughData);
  }
}
