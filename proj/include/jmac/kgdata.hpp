// Multilingual knowledge-graph data model and file ingestion.
#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace jmac {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Tag>
struct DenseId {
  std::uint32_t value = 0;
  constexpr auto operator<=>(const DenseId&) const = default;
  constexpr std::size_t index() const { return value; }
};

using EntityId = DenseId<struct EntityTag>;
using RelationId = DenseId<struct RelationTag>;

// Bijection between string labels and contiguous indices 0..size().
class Vocabulary {
 public:
  std::uint32_t intern(std::string_view label);
  std::optional<std::uint32_t> find(std::string_view label) const;
  const std::string& label(std::uint32_t id) const { return labels_.at(id); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

enum class TripleOrigin : std::uint8_t { kLoaded, kTransferred };

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;
  TripleOrigin origin = TripleOrigin::kLoaded;

  bool same_fact(const Triple& o) const {
    return head == o.head && relation == o.relation && tail == o.tail;
  }
};

std::uint64_t triple_key(EntityId head, RelationId relation, EntityId tail);
inline std::uint64_t triple_key(const Triple& t) { return triple_key(t.head, t.relation, t.tail); }

// Bit flags: 1 when a triple (e, r, e') exists, 2 when (e', r, e) exists.
enum Direction : std::uint8_t { kOutgoing = 1, kIncoming = 2 };

struct Neighbor {
  EntityId entity;
  RelationId relation;
  std::uint8_t direction = 0;
  bool operator==(const Neighbor&) const = default;
};

// One language's graph. Loaded triples are fixed after construction; the
// transferred set is replaced between epochs by the triple-transfer step.
class Kg {
 public:
  Kg() = default;
  Kg(std::string id, Vocabulary entities, std::vector<Triple> triples);

  const std::string& id() const { return id_; }
  std::size_t entity_count() const { return entities_.size(); }
  const Vocabulary& entities() const { return entities_; }
  const std::vector<Triple>& triples() const { return triples_; }
  const std::vector<Triple>& transferred() const { return transferred_; }

  bool contains(EntityId h, RelationId r, EntityId t) const;
  bool contains_loaded(EntityId h, RelationId r, EntityId t) const;

  // Replaces the transferred triples that came from `source_kg`; entries that
  // duplicate loaded triples are dropped. Rebuilds the neighbor index.
  void set_transferred_from(std::size_t source_kg, std::vector<Triple> transferred);
  const std::map<std::size_t, std::vector<Triple>>& transferred_groups() const {
    return transferred_groups_;
  }

  std::span<const Neighbor> neighbors(EntityId e) const;
  void rebuild_neighbor_index();
  const std::vector<std::size_t>& neighbor_offsets() const { return offsets_; }
  const std::vector<Neighbor>& neighbor_entries() const { return entries_; }

 private:
  std::string id_;
  Vocabulary entities_;
  std::vector<Triple> triples_;
  std::map<std::size_t, std::vector<Triple>> transferred_groups_;
  std::vector<Triple> transferred_;
  std::unordered_set<std::uint64_t> loaded_keys_;
  std::unordered_set<std::uint64_t> transferred_keys_;
  std::vector<std::size_t> offsets_;
  std::vector<Neighbor> entries_;
};

struct ParsedTriples {
  Kg kg;
  std::size_t duplicates = 0;
};

// head<TAB>relation<TAB>tail per line. Entity ids are assigned in first-seen
// order; relation labels are interned into the shared `relations` table.
ParsedTriples parse_triples(const std::filesystem::path& path, const std::string& kg_id,
                            Vocabulary& relations);
ParsedTriples parse_triples_text(std::string_view text, const std::string& kg_id,
                                 Vocabulary& relations);

// Resolves triple lines against an existing entity table. Unknown labels are
// an error; duplicates are dropped.
std::vector<Triple> parse_triples_against(const std::filesystem::path& path,
                                          const Vocabulary& entities,
                                          const Vocabulary& relations);

void write_triples(const std::filesystem::path& path, const Kg& kg, const Vocabulary& relations);

enum class SeedProvenance : std::uint8_t { kGiven, kEnlarged };

struct SeedPair {
  EntityId source;
  EntityId target;
  SeedProvenance provenance = SeedProvenance::kGiven;
  bool operator==(const SeedPair&) const = default;
};

struct SeedSet {
  std::size_t source_kg = 0;
  std::size_t target_kg = 0;
  std::vector<SeedPair> pairs;

  std::size_t given_count() const;
  // Throws when an entity occurs in more than one pair on either side.
  void check_one_to_one() const;
};

struct ParsedSeeds {
  SeedSet seeds;
  std::size_t skipped = 0;
};

ParsedSeeds parse_seeds(const std::filesystem::path& path, std::size_t source_kg,
                        std::size_t target_kg, const Vocabulary& source_entities,
                        const Vocabulary& target_entities);
ParsedSeeds parse_seeds_text(std::string_view text, std::size_t source_kg,
                             std::size_t target_kg, const Vocabulary& source_entities,
                             const Vocabulary& target_entities);

// Deterministic shuffle-then-cut; the train side gets floor(fraction * size).
std::pair<SeedSet, SeedSet> split_seeds(const SeedSet& seeds, double train_fraction,
                                        std::uint64_t rng_seed);

struct KgcSplit {
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
};

// Seeds for one KG pair: training pairs (given + enlarged) and held-out test pairs.
struct AlignmentTask {
  SeedSet train;
  SeedSet test;
};

struct InitialVectors {
  std::size_t dim = 0;
  // Row per entity (per KG) / relation; empty optional means random init.
  std::vector<std::vector<std::optional<std::vector<double>>>> entities;
  std::vector<std::optional<std::vector<double>>> relations;
};

struct MultiKg {
  std::vector<Kg> kgs;
  Vocabulary relations;
  std::vector<AlignmentTask> alignments;
  std::vector<KgcSplit> splits;
  std::optional<InitialVectors> initial_vectors;

  std::size_t total_entities() const;
  // Offset of each KG's entities in the stacked entity table.
  std::vector<std::size_t> entity_offsets() const;
  std::size_t kg_index(std::string_view id) const;
};

struct VectorLoadReport {
  std::size_t dim = 0;
  std::size_t matched_entities = 0;
  std::size_t matched_relations = 0;
  std::size_t random_entities = 0;
  std::size_t random_relations = 0;
};

// Attaches "label f1 f2 ... fn" vectors by exact label match.
VectorLoadReport load_initial_vectors(const std::filesystem::path& path, MultiKg& multikg);

struct DatasetOptions {
  double seed_train_fraction = 0.5;
  std::uint64_t split_seed = 0;
};

// Reads a data directory laid out as triples_<kg>.tsv, kgc_{train,valid,test}_<kg>.tsv,
// seeds_<a>_<b>.tsv, optional alignment_<a>_<b>.tsv and vectors.tsv.
MultiKg load_dataset(const std::filesystem::path& dir, const DatasetOptions& options);

std::vector<std::string> split_tabs(std::string_view line);

}  // namespace jmac
