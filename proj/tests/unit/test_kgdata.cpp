#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "jmac/kgdata.hpp"

using namespace jmac;
using jmac::testing::TempDir;

namespace {

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string numbered_seeds(int n, const std::string& a, const std::string& b) {
  std::string s;
  for (int i = 0; i < n; ++i) s += a + std::to_string(i) + "\t" + b + std::to_string(i) + "\n";
  return s;
}

Vocabulary labels(const std::string& prefix, int n) {
  Vocabulary v;
  for (int i = 0; i < n; ++i) v.intern(prefix + std::to_string(i));
  return v;
}

}  // namespace

TEST(ParseTriples, SingleSelfLoop) {
  Vocabulary rels;
  auto p = parse_triples_text("a\tr\ta\n", "x", rels);
  EXPECT_EQ(p.kg.entity_count(), 1u);
  EXPECT_EQ(rels.size(), 1u);
  ASSERT_EQ(p.kg.triples().size(), 1u);
  EXPECT_EQ(p.kg.triples()[0].head, p.kg.triples()[0].tail);
}

TEST(ParseTriples, DuplicateLineCounted) {
  Vocabulary rels;
  auto p = parse_triples_text("a\tr\tb\na\tr\tb\n", "x", rels);
  EXPECT_EQ(p.kg.triples().size(), 1u);
  EXPECT_EQ(p.duplicates, 1u);
}

TEST(ParseTriples, MalformedLineNamesLineNumber) {
  Vocabulary rels;
  try {
    parse_triples_text("a\tr\tb\nc\td\n", "x", rels);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(ParseTriples, EmptyFile) {
  Vocabulary rels;
  try {
    parse_triples_text("", "x", rels);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "empty triple file");
  }
}

TEST(ParseTriples, IdsInFirstSeenOrder) {
  Vocabulary rels;
  auto p = parse_triples_text("c\tr2\ta\na\tr1\tb\n", "x", rels);
  EXPECT_EQ(p.kg.entities().labels(), (std::vector<std::string>{"c", "a", "b"}));
  EXPECT_EQ(rels.labels(), (std::vector<std::string>{"r2", "r1"}));
}

TEST(ParseTriples, RoundTrip) {
  TempDir dir("roundtrip");
  Vocabulary rels;
  auto p = parse_triples_text("a\tr\tb\nb\ts\tc\nc\tr\ta\na\ts\ta\n", "x", rels);
  write_triples(dir.path() / "t.tsv", p.kg, rels);
  Vocabulary rels2;
  auto q = parse_triples(dir.path() / "t.tsv", "x", rels2);
  EXPECT_EQ(q.kg.entities().labels(), p.kg.entities().labels());
  EXPECT_EQ(rels2.labels(), rels.labels());
  ASSERT_EQ(q.kg.triples().size(), p.kg.triples().size());
  for (std::size_t i = 0; i < p.kg.triples().size(); ++i) EXPECT_TRUE(q.kg.triples()[i].same_fact(p.kg.triples()[i]));
}

TEST(Kg, NeighborIndexMatchesDefinition) {
  Vocabulary rels;
  auto kg = parse_triples_text("a\tr\tb\nb\tr\ta\nb\ts\tc\nc\tr\tc\nd\ts\ta\n", "x", rels).kg;
  for (std::uint32_t e = 0; e < kg.entity_count(); ++e) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> expected;
    for (const auto& t : kg.triples()) {
      if (t.head.value == e) expected.insert({t.tail.value, t.relation.value});
      if (t.tail.value == e) expected.insert({t.head.value, t.relation.value});
    }
    std::set<std::pair<std::uint32_t, std::uint32_t>> got;
    for (const auto& n : kg.neighbors(EntityId{e})) {
      EXPECT_TRUE(got.insert({n.entity.value, n.relation.value}).second);
      const bool out = kg.contains(EntityId{e}, n.relation, n.entity);
      const bool in = kg.contains(n.entity, n.relation, EntityId{e});
      EXPECT_EQ((n.direction & kOutgoing) != 0, out);
      EXPECT_EQ((n.direction & kIncoming) != 0, in);
    }
    EXPECT_EQ(got, expected) << "entity " << e;
  }
}

TEST(Kg, RebuildReproducesIndex) {
  Vocabulary rels;
  auto kg = parse_triples_text("a\tr\tb\nb\ts\tc\nc\tr\ta\n", "x", rels).kg;
  const auto offsets = kg.neighbor_offsets();
  const auto entries = kg.neighbor_entries();
  kg.rebuild_neighbor_index();
  EXPECT_EQ(kg.neighbor_offsets(), offsets);
  EXPECT_EQ(kg.neighbor_entries(), entries);
}

TEST(Kg, TransferredTriplesJoinNeighborsButNotLoaded) {
  Vocabulary rels;
  auto kg = parse_triples_text("a\tr\tb\nc\tr\tb\n", "x", rels).kg;
  const Triple t{EntityId{0}, RelationId{0}, EntityId{2}, TripleOrigin::kTransferred};
  kg.set_transferred_from(1, {t, kg.triples()[0]});
  ASSERT_EQ(kg.transferred().size(), 1u);
  EXPECT_TRUE(kg.contains(t.head, t.relation, t.tail));
  EXPECT_FALSE(kg.contains_loaded(t.head, t.relation, t.tail));
  EXPECT_EQ(kg.neighbors(EntityId{0}).size(), 2u);
  kg.set_transferred_from(1, {});
  EXPECT_TRUE(kg.transferred().empty());
  EXPECT_EQ(kg.neighbors(EntityId{0}).size(), 1u);
}

TEST(ParseSeeds, AllResolvable) {
  auto p = parse_seeds_text(numbered_seeds(10, "e", "f"), 0, 1, labels("e", 10), labels("f", 10));
  EXPECT_EQ(p.seeds.pairs.size(), 10u);
  EXPECT_EQ(p.skipped, 0u);
  EXPECT_EQ(p.seeds.given_count(), 10u);
}

TEST(ParseSeeds, UnknownLabelSkipped) {
  auto p = parse_seeds_text("e0\tf0\ne1\tnope\n", 0, 1, labels("e", 2), labels("f", 2));
  EXPECT_EQ(p.seeds.pairs.size(), 1u);
  EXPECT_EQ(p.skipped, 1u);
}

TEST(ParseSeeds, RepeatedEntityIsAnError) {
  EXPECT_THROW(parse_seeds_text("e0\tf0\ne0\tf1\n", 0, 1, labels("e", 2), labels("f", 2)), DataError);
  EXPECT_THROW(parse_seeds_text("e0\tf0\ne1\tf0\n", 0, 1, labels("e", 2), labels("f", 2)), DataError);
}

TEST(SplitSeeds, HalfOfHundred) {
  auto p = parse_seeds_text(numbered_seeds(100, "e", "f"), 0, 1, labels("e", 100), labels("f", 100));
  auto [train, test] = split_seeds(p.seeds, 0.5, 42);
  EXPECT_EQ(train.pairs.size(), 50u);
  EXPECT_EQ(test.pairs.size(), 50u);
  std::set<std::uint32_t> all;
  for (const auto* s : {&train, &test})
    for (const auto& pr : s->pairs) EXPECT_TRUE(all.insert(pr.source.value).second);
  EXPECT_EQ(all.size(), 100u);
}

TEST(SplitSeeds, FloorOnTrainSide) {
  auto p = parse_seeds_text(numbered_seeds(7, "e", "f"), 0, 1, labels("e", 7), labels("f", 7));
  auto [train, test] = split_seeds(p.seeds, 0.5, 1);
  EXPECT_EQ(train.pairs.size(), 3u);
  EXPECT_EQ(test.pairs.size(), 4u);
}

TEST(SplitSeeds, Deterministic) {
  auto p = parse_seeds_text(numbered_seeds(30, "e", "f"), 0, 1, labels("e", 30), labels("f", 30));
  EXPECT_EQ(split_seeds(p.seeds, 0.5, 9).first.pairs, split_seeds(p.seeds, 0.5, 9).first.pairs);
  EXPECT_NE(split_seeds(p.seeds, 0.5, 9).first.pairs, split_seeds(p.seeds, 0.5, 10).first.pairs);
}

TEST(SplitSeeds, Errors) {
  auto p = parse_seeds_text(numbered_seeds(1, "e", "f"), 0, 1, labels("e", 1), labels("f", 1));
  EXPECT_THROW(split_seeds(p.seeds, 0.5, 0), DataError);
  auto q = parse_seeds_text(numbered_seeds(4, "e", "f"), 0, 1, labels("e", 4), labels("f", 4));
  EXPECT_THROW(split_seeds(q.seeds, 1.0, 0), DataError);
  EXPECT_THROW(split_seeds(q.seeds, 0.0, 0), DataError);
}

TEST(InitialVectors, FullAndPartialCoverage) {
  TempDir dir("vectors");
  auto m = jmac::testing::build_multikg({{"x", "a\tr\tb\n"}});
  write(dir.path() / "v.tsv", "a 1 2 3\nb 4 5 6\nr 0 0 1\n");
  auto rep = load_initial_vectors(dir.path() / "v.tsv", m);
  EXPECT_EQ(rep.dim, 3u);
  EXPECT_EQ(rep.matched_entities, 2u);
  EXPECT_EQ(rep.random_entities, 0u);
  EXPECT_EQ(rep.matched_relations, 1u);

  write(dir.path() / "v2.tsv", "a 1 2 3\n");
  rep = load_initial_vectors(dir.path() / "v2.tsv", m);
  EXPECT_EQ(rep.matched_entities, 1u);
  EXPECT_EQ(rep.random_entities, 1u);
  EXPECT_FALSE(m.initial_vectors->entities[0][1].has_value());
}

TEST(InitialVectors, DimensionMismatch) {
  TempDir dir("vectors_bad");
  auto m = jmac::testing::build_multikg({{"x", "a\tr\tb\n"}});
  write(dir.path() / "v.tsv", "a 1 2 3\nb 4 5\n");
  EXPECT_THROW(load_initial_vectors(dir.path() / "v.tsv", m), DataError);
}

TEST(LoadDataset, SeedsSplitWhenNoGroundTruthFile) {
  TempDir dir("dataset");
  write(dir.path() / "triples_en.tsv", "a\tr\tb\nb\tr\tc\nc\ts\td\n");
  write(dir.path() / "triples_fr.tsv", "A\tr\tB\nB\tr\tC\nC\ts\tD\n");
  write(dir.path() / "seeds_en_fr.tsv", "a\tA\nb\tB\nc\tC\nd\tD\n");
  auto m = load_dataset(dir.path(), {0.5, 3});
  ASSERT_EQ(m.kgs.size(), 2u);
  EXPECT_EQ(m.kgs[0].id(), "en");
  EXPECT_EQ(m.relations.size(), 2u);
  ASSERT_EQ(m.alignments.size(), 1u);
  EXPECT_EQ(m.alignments[0].train.pairs.size() + m.alignments[0].test.pairs.size(), 4u);
  EXPECT_EQ(m.alignments[0].train.pairs.size(), 2u);
  EXPECT_EQ(m.entity_offsets(), (std::vector<std::size_t>{0, 4}));
}

TEST(LoadDataset, EvaluationTripleInTrainIsRejected) {
  TempDir dir("dataset_leak");
  write(dir.path() / "kgc_train_en.tsv", "a\tr\tb\nb\tr\tc\n");
  write(dir.path() / "kgc_test_en.tsv", "a\tr\tb\n");
  EXPECT_THROW(load_dataset(dir.path(), {}), DataError);
}
