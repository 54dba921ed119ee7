#include <doctest.h>

#include "taxa/compare.hpp"
#include "taxa/error.hpp"
#include "taxa/report.hpp"
#include "testkit.hpp"

using namespace taxa;
using testkit::P;

namespace {

CoderSession coder(const std::string& id, const std::vector<TaxonPath>& tree_paths,
                   const std::map<std::string, PathSet>& labels, const std::set<std::string>& unsure = {}) {
  std::vector<std::string> order;
  std::map<std::string, LabelAssignment> table;
  for (const auto& [uuid, paths] : labels) {
    order.push_back(uuid);
    table[uuid] = LabelAssignment{paths, unsure.count(uuid) != 0};
  }
  return CoderSession::from_state(id, id, testkit::tree_of(tree_paths), order, table, {}, {});
}

Rational R(long long n, long long d) { return Rational(n, d); }

}  // namespace

TEST_SUITE("union merge") {
  TEST_CASE("creators and partial assignment") {
    std::vector<CoderSession> s{
        coder("A", {P({"map"})}, {{"u1", {P({"map"})}}, {"u2", {P({"map"})}}}),
        coder("B", {P({"map"}), P({"map", "cartogram"}), P({"table"})},
              {{"u1", {P({"map", "cartogram"})}}, {"u2", {P({"table"})}}}),
    };
    auto m = union_merge(s);
    CHECK(m.coders == std::vector<std::string>{"A", "B"});
    CHECK(testkit::path_set(m.tree) == std::set<TaxonPath>{P({"map"}), P({"map", "cartogram"}), P({"table"})});
    CHECK(m.nodes.at(P({"map"})).creators == std::vector<std::string>{"A", "B"});
    CHECK(m.nodes.at(P({"map", "cartogram"})).creators == std::vector<std::string>{"B"});
    const auto& map = m.nodes.at(P({"map"}));
    CHECK(map.consensus_count == 1);
    CHECK(map.partial_count == 1);
    CHECK(map.partial_images == std::vector<std::string>{"u2"});
    CHECK(m.nodes.at(P({"map", "cartogram"})).partial_count == 0);
    CHECK(m.warnings.empty());

    auto text = render_union_tree(m);
    CHECK(text == "coders: A B\n"
                  "root\n"
                  "  map  partial 1/2\n"
                  "    cartogram  [B]  1\n"
                  "  table  [B]  1\n");
  }

  TEST_CASE("identical trees have no highlights") {
    std::vector<CoderSession> s{coder("A", {P({"a"}), P({"b"})}, {{"u1", {P({"a"})}}}),
                                coder("B", {P({"a"}), P({"b"})}, {{"u1", {P({"a"})}}})};
    auto m = union_merge(s);
    for (const auto& [path, ann] : m.nodes) {
      CHECK(ann.created_by_all(2));
      CHECK(ann.partial_count == 0);
    }
  }

  TEST_CASE("differing corpora warn") {
    std::vector<CoderSession> s{coder("A", {P({"a"})}, {{"u1", {P({"a"})}}, {"u2", {P({"a"})}}}),
                                coder("B", {P({"a"})}, {{"u1", {P({"a"})}}})};
    CHECK(union_merge(s).warnings.size() == 1);
  }

  TEST_CASE("union contains every input node") {
    testkit::Rng rng(3);
    testkit::OpGen gen{testkit::image_ids(8)};
    for (int i = 0; i < 50; ++i) {
      std::vector<CoderSession> s;
      for (int c = 0; c < 3; ++c) s.push_back(testkit::random_session(rng, "C" + std::to_string(c), gen, 25));
      auto u = testkit::path_set(union_merge(s).tree);
      auto maj = testkit::path_set(majority_merge(s).tree);
      for (const auto& x : s)
        for (const auto& p : testkit::path_set(x.tree())) CHECK(u.count(p));
      for (const auto& p : maj) CHECK(u.count(p));
    }
  }
}

TEST_SUITE("majority merge") {
  TEST_CASE("strict majority of three") {
    std::vector<CoderSession> s{
        coder("C1", {P({"map"}), P({"bar"})}, {{"u1", {P({"map"})}}}),
        coder("C2", {P({"map"}), P({"table"})}, {{"u1", {P({"map"})}}}),
        coder("C3", {P({"table"}), P({"map"})}, {{"u1", {P({"table"})}}}),
    };
    auto m = majority_merge(s);
    std::vector<std::string> names;
    for (const auto& c : m.tree.root().children) names.push_back(c.name);
    CHECK(names == std::vector<std::string>{"map", "table"});
    CHECK(m.labels.at("u1") == PathSet{P({"map"})});
  }

  TEST_CASE("two coders need both") {
    std::vector<CoderSession> s{coder("A", {P({"a"}), P({"b"})}, {{"u1", {P({"a"})}}}),
                                coder("B", {P({"a"})}, {{"u1", {P({"a"})}}})};
    auto m = majority_merge(s);
    CHECK(testkit::path_set(m.tree) == std::set<TaxonPath>{P({"a"})});
  }

  TEST_CASE("one coder is reproduced") {
    testkit::Rng rng(11);
    testkit::OpGen gen{testkit::image_ids(10)};
    for (int i = 0; i < 30; ++i) {
      auto one = testkit::random_session(rng, "solo", gen, 30);
      std::vector<CoderSession> s{one};
      auto m = majority_merge(s);
      CHECK(m.tree == one.tree());
      CHECK(m.labels == one.labeling());
      CHECK(m.images == one.image_order());
    }
  }

  TEST_CASE("matches the brute-force voter on random sessions") {
    testkit::Rng rng(5);
    testkit::OpGen gen{testkit::image_ids(6)};
    for (int i = 0; i < 100; ++i) {
      std::vector<CoderSession> s;
      const auto n = 1 + testkit::pick(rng, 5);
      for (std::size_t c = 0; c < n; ++c) s.push_back(testkit::random_session(rng, "C" + std::to_string(c), gen, 20));
      auto m = majority_merge(s);
      auto oracle = testkit::brute_force_vote(s);
      REQUIRE(testkit::path_set(m.tree) == oracle.nodes);
      REQUIRE(m.labels == oracle.labels);
      for (const auto& [uuid, paths] : m.labels)
        for (const auto& p : paths) REQUIRE(m.tree.is_leaf(p));
    }
  }
}

TEST_SUITE("metrics") {
  TEST_CASE("jaccard definition") {
    CHECK(jaccard({P({"a"}), P({"b"})}, {P({"b"}), P({"c"})}) == R(1, 3));
    CHECK(jaccard({P({"a"})}, {P({"a"})}) == 1);
    CHECK(jaccard({P({"a"})}, {P({"b"})}) == 0);
    CHECK(jaccard({}, {}) == 1);
  }

  TEST_CASE("exact match ratio") {
    Labeling a{{"1", {P({"x"})}}, {"2", {P({"y"})}}, {"3", {P({"x"})}}, {"4", {P({"y"})}}};
    Labeling b{{"1", {P({"x"})}}, {"2", {P({"y"})}}, {"3", {P({"y"})}}, {"4", {P({"x"})}}};
    std::vector<Labeling> two{a, b};
    CHECK(exact_match_ratio(two) == R(1, 2));
    std::vector<Labeling> same{a, a};
    CHECK(exact_match_ratio(same) == 1);

    Labeling c = a;
    c["1"] = {P({"z"})};
    std::vector<Labeling> three{a, a, c};
    CHECK(exact_match_ratio(three) == R(3, 4));

    Labeling missing{{"1", {P({"x"})}}};
    std::vector<Labeling> bad{a, missing};
    CHECK_THROWS_AS(exact_match_ratio(bad), Error);
    try {
      exact_match_ratio(bad);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ImageSetMismatch);
    }
  }

  TEST_CASE("pairwise jaccard on a hand-computed fixture") {
    Labeling a{{"1", {P({"a"}), P({"b"})}}, {"2", {P({"a"})}}, {"3", {P({"c"})}}, {"4", {P({"d"})}}};
    Labeling b{{"1", {P({"b"}), P({"c"})}}, {"2", {P({"a"})}}, {"3", {P({"c"}), P({"d"})}}, {"4", {P({"e"})}}};
    Labeling c{{"1", {P({"a"}), P({"b"})}}, {"2", {P({"b"})}}, {"3", {P({"c"})}}, {"4", {P({"d"})}}};
    std::vector<Labeling> ls{a, b, c};
    // pairs: ab = (1/3 + 1 + 1/2 + 0)/4, ac = (1 + 0 + 1 + 1)/4, bc = (1/3 + 0 + 1/2 + 0)/4
    Rational expected = ((R(1, 3) + 1 + R(1, 2)) / 4 + Rational(3) / 4 + (R(1, 3) + R(1, 2)) / 4) / 3;
    CHECK(pairwise_jaccard(ls) == expected);
    CHECK(to_fraction_string(pairwise_jaccard(ls)) == testkit::oracle_jaccard(ls).str());
  }

  TEST_CASE("node iou") {
    std::vector<TaxonomyTree> t{testkit::tree_of({P({"map"}), P({"bar"})}), testkit::tree_of({P({"map"})})};
    CHECK(node_iou(t) == R(1, 2));
    std::vector<TaxonomyTree> same{t[0], t[0]};
    CHECK(node_iou(same) == 1);
    std::vector<TaxonomyTree> disjoint{testkit::tree_of({P({"a"})}), testkit::tree_of({P({"b"})})};
    CHECK(node_iou(disjoint) == 0);
    std::vector<TaxonomyTree> deep{testkit::tree_of({P({"a"}), P({"a", "x"})}), testkit::tree_of({P({"a"}), P({"a", "y"})})};
    CHECK(node_iou(deep) == R(1, 3));
    CHECK(node_iou(deep, 1) == 1);
  }

  TEST_CASE("metrics are invariant under coder order") {
    testkit::Rng rng(9);
    for (int i = 0; i < 100; ++i) {
      std::vector<Labeling> ls(3);
      for (int img = 0; img < 4; ++img)
        for (auto& l : ls) {
          PathSet s;
          for (int k = 0; k < 3; ++k)
            if (testkit::coin(rng)) s.insert(P({std::string(1, static_cast<char>('a' + k)).c_str()}));
          l[std::to_string(img)] = s;
        }
      auto j = pairwise_jaccard(ls);
      auto e = exact_match_ratio(ls);
      std::vector<Labeling> rev{ls[2], ls[0], ls[1]};
      CHECK(pairwise_jaccard(rev) == j);
      CHECK(exact_match_ratio(rev) == e);
      CHECK(e <= j);
    }
  }

  TEST_CASE("agreement report restricts to shared images") {
    std::vector<CoderSession> s{
        coder("A", {P({"a"}), P({"b"})}, {{"u1", {P({"a"})}}, {"u2", {P({"b"})}}, {"u3", {P({"a"})}}}),
        coder("B", {P({"a"}), P({"b"})}, {{"u1", {P({"a"})}}, {"u2", {P({"a"})}}}),
    };
    std::vector<std::string> warnings;
    auto r = agreement_report(s, std::nullopt, &warnings);
    CHECK(r.n_images == 2);
    CHECK(r.exact_match == R(1, 2));
    CHECK(r.jaccard == R(1, 2));
    CHECK(r.node_iou == Rational(1));
    CHECK(warnings.size() == 1);
  }

  TEST_CASE("empty comparisons are rejected") {
    std::vector<Labeling> none{{}, {}};
    try {
      pairwise_jaccard(none);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotEnoughData);
    }
    std::vector<Labeling> one{{{"u", {P({"a"})}}}};
    CHECK_THROWS_AS(exact_match_ratio(one), Error);
  }
}

TEST_SUITE("selectors") {
  TEST_CASE("dissensus and unsure") {
    std::vector<CoderSession> s{
        coder("A", {P({"a"}), P({"b"})}, {{"u1", {P({"a"})}}, {"u2", {P({"a"})}}, {"u3", {P({"b"})}}}),
        coder("B", {P({"a"}), P({"b"})}, {{"u1", {P({"a"})}}, {"u2", {P({"b"})}}, {"u3", {P({"b"})}}}, {"u3"}),
    };
    CHECK(dissensus_images(s) == std::vector<std::string>{"u2"});
    CHECK(unsure_images(s) == std::vector<std::string>{"u3"});
    std::vector<CoderSession> one{s[0]};
    CHECK(dissensus_images(one).empty());
  }

  TEST_CASE("truncate labels") {
    Labeling l{{"u", {P({"map", "cartogram"}), P({"bar chart", "stacked"})}}};
    auto t = truncate_labels(l, 1);
    CHECK(t.at("u") == PathSet{P({"map"}), P({"bar chart"})});
    CHECK(truncate_labels(l, 5) == l);
    CHECK(truncate_labels(t, 1) == t);
    CHECK_THROWS_AS(truncate_labels(l, 0), Error);
  }
}

TEST_SUITE("report") {
  TEST_CASE("render") {
    MetricsReport r;
    r.exact_match = R(1, 2);
    r.jaccard = R(1, 3);
    r.n_images = 4;
    CHECK(render_report(r) == "Metric    Value\nMatch     0.500\nJaccard   0.333\nImages    4\n");
    r.node_iou = R(2, 3);
    r.depth = 1;
    CHECK(render_report(r) ==
          "Metric    Value  (D=1)\nMatch     0.500\nJaccard   0.333\nNode IoU  0.667\nImages    4\n");
  }
}
