#include "jmac/kgdata.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace jmac {

namespace fs = std::filesystem;

std::uint32_t Vocabulary::intern(std::string_view label) {
  auto it = index_.find(std::string(label));
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(labels_.size());
  labels_.emplace_back(label);
  index_.emplace(labels_.back(), id);
  return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t triple_key(EntityId head, RelationId relation, EntityId tail) {
  // 24 bits per entity, 16 bits per relation.
  return (static_cast<std::uint64_t>(head.value) << 40) |
         (static_cast<std::uint64_t>(relation.value) << 24) |
         static_cast<std::uint64_t>(tail.value);
}

Kg::Kg(std::string id, Vocabulary entities, std::vector<Triple> triples)
    : id_(std::move(id)), entities_(std::move(entities)) {
  if (entities_.size() >= (1u << 24)) throw DataError("too many entities in KG " + id_);
  for (const auto& t : triples)
    if (t.relation.value >= (1u << 16)) throw DataError("relation id out of range in KG " + id_);
  triples_.reserve(triples.size());
  for (auto& t : triples) {
    if (t.head.index() >= entities_.size() || t.tail.index() >= entities_.size()) {
      throw DataError("triple references an entity outside KG " + id_);
    }
    t.origin = TripleOrigin::kLoaded;
    if (loaded_keys_.insert(triple_key(t)).second) triples_.push_back(t);
  }
  rebuild_neighbor_index();
}

bool Kg::contains(EntityId h, RelationId r, EntityId t) const {
  const auto key = triple_key(h, r, t);
  return loaded_keys_.contains(key) || transferred_keys_.contains(key);
}

bool Kg::contains_loaded(EntityId h, RelationId r, EntityId t) const {
  return loaded_keys_.contains(triple_key(h, r, t));
}

void Kg::set_transferred_from(std::size_t source_kg, std::vector<Triple> transferred) {
  std::vector<Triple> kept;
  std::unordered_set<std::uint64_t> keys;
  for (auto& t : transferred) {
    if (t.head.index() >= entities_.size() || t.tail.index() >= entities_.size()) {
      throw DataError("transferred triple references an entity outside KG " + id_);
    }
    t.origin = TripleOrigin::kTransferred;
    const auto key = triple_key(t);
    if (loaded_keys_.contains(key)) continue;
    if (keys.insert(key).second) kept.push_back(t);
  }
  if (kept.empty()) {
    transferred_groups_.erase(source_kg);
  } else {
    transferred_groups_[source_kg] = std::move(kept);
  }
  transferred_.clear();
  transferred_keys_.clear();
  for (const auto& [src, group] : transferred_groups_)
    for (const auto& t : group)
      if (transferred_keys_.insert(triple_key(t)).second) transferred_.push_back(t);
  rebuild_neighbor_index();
}

std::span<const Neighbor> Kg::neighbors(EntityId e) const {
  const std::size_t b = offsets_.at(e.index()), end = offsets_.at(e.index() + 1);
  return {entries_.data() + b, end - b};
}

void Kg::rebuild_neighbor_index() {
  const std::size_t n = entities_.size();
  std::vector<std::vector<Neighbor>> lists(n);
  auto add = [&](const Triple& t) {
    lists[t.head.index()].push_back({t.tail, t.relation, kOutgoing});
    lists[t.tail.index()].push_back({t.head, t.relation, kIncoming});
  };
  for (const auto& t : triples_) add(t);
  for (const auto& t : transferred_) add(t);

  offsets_.assign(n + 1, 0);
  entries_.clear();
  for (std::size_t e = 0; e < n; ++e) {
    auto& list = lists[e];
    std::sort(list.begin(), list.end(), [](const Neighbor& a, const Neighbor& b) {
      return std::tie(a.entity, a.relation) < std::tie(b.entity, b.relation);
    });
    // N(e) is a set of (e', r); both directions collapse into one entry.
    for (const auto& nb : list) {
      if (entries_.size() > offsets_[e] && entries_.back().entity == nb.entity &&
          entries_.back().relation == nb.relation) {
        entries_.back().direction |= nb.direction;
      } else {
        entries_.push_back(nb);
      }
    }
    offsets_[e + 1] = entries_.size();
  }
}

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Calls fn(line_number, line) for every non-empty line; strips a trailing CR.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) fn(line_no, line);
    start = end + 1;
  }
}

std::vector<std::string> triple_fields(std::size_t line_no, std::string_view line,
                                       const std::string& where) {
  auto fields = split_tabs(line);
  if (fields.size() != 3) {
    throw DataError(where + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                    std::to_string(fields.size()));
  }
  return fields;
}

}  // namespace

ParsedTriples parse_triples_text(std::string_view text, const std::string& kg_id,
                                 Vocabulary& relations) {
  Vocabulary entities;
  std::vector<Triple> triples;
  std::unordered_set<std::uint64_t> seen;
  std::size_t duplicates = 0;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    auto f = triple_fields(line_no, line, kg_id);
    Triple t{EntityId{entities.intern(f[0])}, RelationId{relations.intern(f[1])},
             EntityId{entities.intern(f[2])}};
    if (seen.insert(triple_key(t)).second) {
      triples.push_back(t);
    } else {
      ++duplicates;
    }
  });
  if (triples.empty()) throw DataError("empty triple file");
  return {Kg(kg_id, std::move(entities), std::move(triples)), duplicates};
}

ParsedTriples parse_triples(const fs::path& path, const std::string& kg_id, Vocabulary& relations) {
  return parse_triples_text(read_file(path), kg_id, relations);
}

std::vector<Triple> parse_triples_against(const fs::path& path, const Vocabulary& entities,
                                          const Vocabulary& relations) {
  std::vector<Triple> out;
  std::unordered_set<std::uint64_t> seen;
  const std::string where = path.filename().string();
  for_each_line(read_file(path), [&](std::size_t line_no, std::string_view line) {
    auto f = triple_fields(line_no, line, where);
    auto h = entities.find(f[0]);
    auto r = relations.find(f[1]);
    auto t = entities.find(f[2]);
    if (!h || !r || !t) {
      throw DataError(where + ":" + std::to_string(line_no) + ": unknown label in triple");
    }
    Triple tr{EntityId{*h}, RelationId{*r}, EntityId{*t}};
    if (seen.insert(triple_key(tr)).second) out.push_back(tr);
  });
  return out;
}

void write_triples(const fs::path& path, const Kg& kg, const Vocabulary& relations) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& t : kg.triples()) {
    out << kg.entities().label(t.head.value) << '\t' << relations.label(t.relation.value) << '\t'
        << kg.entities().label(t.tail.value) << '\n';
  }
}

std::size_t SeedSet::given_count() const {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [](const SeedPair& p) {
    return p.provenance == SeedProvenance::kGiven;
  }));
}

void SeedSet::check_one_to_one() const {
  std::unordered_set<std::uint32_t> src, tgt;
  for (const auto& p : pairs) {
    if (!src.insert(p.source.value).second || !tgt.insert(p.target.value).second) {
      throw DataError("seed set is not one-to-one");
    }
  }
}

ParsedSeeds parse_seeds_text(std::string_view text, std::size_t source_kg, std::size_t target_kg,
                             const Vocabulary& source_entities, const Vocabulary& target_entities) {
  ParsedSeeds result;
  result.seeds.source_kg = source_kg;
  result.seeds.target_kg = target_kg;
  std::unordered_map<std::uint32_t, std::uint32_t> src_used, tgt_used;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    auto f = split_tabs(line);
    if (f.size() != 2) {
      throw DataError("seed line " + std::to_string(line_no) + ": expected 2 tab-separated fields");
    }
    auto e = source_entities.find(f[0]);
    auto es = target_entities.find(f[1]);
    if (!e || !es) {
      ++result.skipped;
      return;
    }
    auto s_it = src_used.find(*e);
    auto t_it = tgt_used.find(*es);
    if (s_it != src_used.end() && t_it != tgt_used.end() && s_it->second == *es) return;
    if (s_it != src_used.end() || t_it != tgt_used.end()) {
      throw DataError("seed line " + std::to_string(line_no) +
                      ": entity repeated across alignment pairs");
    }
    src_used.emplace(*e, *es);
    tgt_used.emplace(*es, *e);
    result.seeds.pairs.push_back({EntityId{*e}, EntityId{*es}, SeedProvenance::kGiven});
  });
  return result;
}

ParsedSeeds parse_seeds(const fs::path& path, std::size_t source_kg, std::size_t target_kg,
                        const Vocabulary& source_entities, const Vocabulary& target_entities) {
  return parse_seeds_text(read_file(path), source_kg, target_kg, source_entities, target_entities);
}

std::pair<SeedSet, SeedSet> split_seeds(const SeedSet& seeds, double train_fraction,
                                        std::uint64_t rng_seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DataError("train fraction must lie strictly between 0 and 1");
  }
  if (seeds.pairs.size() < 2) throw DataError("cannot split fewer than 2 seed pairs");
  std::vector<SeedPair> shuffled = seeds.pairs;
  std::mt19937_64 rng(rng_seed);
  // Fisher-Yates with explicit index draws.
  for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(shuffled[i], shuffled[j]);
  }
  const auto n_train =
      static_cast<std::size_t>(train_fraction * static_cast<double>(shuffled.size()));
  SeedSet train{seeds.source_kg, seeds.target_kg, {}};
  SeedSet test{seeds.source_kg, seeds.target_kg, {}};
  train.pairs.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
  test.pairs.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
  return {std::move(train), std::move(test)};
}

std::size_t MultiKg::total_entities() const {
  std::size_t n = 0;
  for (const auto& kg : kgs) n += kg.entity_count();
  return n;
}

std::vector<std::size_t> MultiKg::entity_offsets() const {
  std::vector<std::size_t> out;
  std::size_t acc = 0;
  for (const auto& kg : kgs) {
    out.push_back(acc);
    acc += kg.entity_count();
  }
  return out;
}

std::size_t MultiKg::kg_index(std::string_view id) const {
  for (std::size_t i = 0; i < kgs.size(); ++i)
    if (kgs[i].id() == id) return i;
  throw DataError("unknown KG id " + std::string(id));
}

namespace {

std::vector<double> parse_floats(std::string_view text, std::size_t line_no) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\t') ++j;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + j, v);
    if (ec != std::errc() || ptr != text.data() + j) {
      throw DataError("vector line " + std::to_string(line_no) + ": bad number");
    }
    out.push_back(v);
    i = j;
  }
  return out;
}

}  // namespace

VectorLoadReport load_initial_vectors(const fs::path& path, MultiKg& multikg) {
  const std::string text = read_file(path);
  InitialVectors iv;
  iv.entities.resize(multikg.kgs.size());
  for (std::size_t k = 0; k < multikg.kgs.size(); ++k)
    iv.entities[k].resize(multikg.kgs[k].entity_count());
  iv.relations.resize(multikg.relations.size());

  VectorLoadReport report;
  bool have_dim = false;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    std::size_t cut = line.find('\t');
    if (cut == std::string_view::npos) cut = line.find(' ');
    if (cut == std::string_view::npos) throw DataError("vector line " + std::to_string(line_no) + ": no values");
    const std::string_view label = line.substr(0, cut);
    auto values = parse_floats(line.substr(cut + 1), line_no);
    if (!have_dim) {
      iv.dim = values.size();
      have_dim = true;
    } else if (values.size() != iv.dim) {
      throw DataError("vector line " + std::to_string(line_no) + ": dimension mismatch (" +
                      std::to_string(values.size()) + " vs " + std::to_string(iv.dim) + ")");
    }
    for (std::size_t k = 0; k < multikg.kgs.size(); ++k) {
      if (auto id = multikg.kgs[k].entities().find(label)) iv.entities[k][*id] = values;
    }
    if (auto id = multikg.relations.find(label)) iv.relations[*id] = values;
  });
  if (iv.dim == 0) throw DataError("vector file has no vectors");
  report.dim = iv.dim;
  for (const auto& kg_vecs : iv.entities)
    for (const auto& v : kg_vecs) (v ? report.matched_entities : report.random_entities)++;
  for (const auto& v : iv.relations) (v ? report.matched_relations : report.random_relations)++;
  multikg.initial_vectors = std::move(iv);
  return report;
}

MultiKg load_dataset(const fs::path& dir, const DatasetOptions& options) {
  if (!fs::is_directory(dir)) throw DataError("data directory not found: " + dir.string());
  std::set<std::string> names;
  auto strip = [](const std::string& file, const std::string& prefix) -> std::optional<std::string> {
    if (file.size() > prefix.size() + 4 && file.starts_with(prefix) && file.ends_with(".tsv"))
      return file.substr(prefix.size(), file.size() - prefix.size() - 4);
    return std::nullopt;
  };
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string file = entry.path().filename().string();
    if (auto n = strip(file, "triples_")) names.insert(*n);
    if (auto n = strip(file, "kgc_train_")) names.insert(*n);
  }
  if (names.empty()) throw DataError("no triples_<kg>.tsv or kgc_train_<kg>.tsv in " + dir.string());

  MultiKg mkg;
  for (const auto& name : names) {
    const fs::path full = dir / ("triples_" + name + ".tsv");
    const fs::path train = dir / ("kgc_train_" + name + ".tsv");
    const fs::path valid = dir / ("kgc_valid_" + name + ".tsv");
    const fs::path test = dir / ("kgc_test_" + name + ".tsv");
    Kg all;
    if (fs::exists(full)) {
      all = parse_triples(full, name, mkg.relations).kg;
    } else {
      std::string text = read_file(train);
      for (const auto& p : {valid, test})
        if (fs::exists(p)) text += "\n" + read_file(p);
      all = parse_triples_text(text, name, mkg.relations).kg;
    }
    KgcSplit split;
    if (fs::exists(train)) {
      split.train = parse_triples_against(train, all.entities(), mkg.relations);
      if (fs::exists(valid)) split.valid = parse_triples_against(valid, all.entities(), mkg.relations);
      if (fs::exists(test)) split.test = parse_triples_against(test, all.entities(), mkg.relations);
    } else {
      split.train = all.triples();
    }
    std::unordered_set<std::uint64_t> train_keys;
    for (const auto& t : split.train) train_keys.insert(triple_key(t));
    for (const auto* part : {&split.valid, &split.test})
      for (const auto& t : *part)
        if (train_keys.contains(triple_key(t)))
          throw DataError("KG " + name + ": evaluation triple also present in train split");
    mkg.kgs.emplace_back(name, all.entities(), split.train);
    mkg.splits.push_back(std::move(split));
  }

  for (std::size_t a = 0; a < mkg.kgs.size(); ++a) {
    for (std::size_t b = 0; b < mkg.kgs.size(); ++b) {
      if (a == b) continue;
      const std::string pair = mkg.kgs[a].id() + "_" + mkg.kgs[b].id();
      const fs::path seeds_path = dir / ("seeds_" + pair + ".tsv");
      if (!fs::exists(seeds_path)) continue;
      auto seeds = parse_seeds(seeds_path, a, b, mkg.kgs[a].entities(), mkg.kgs[b].entities()).seeds;
      const fs::path truth_path = dir / ("alignment_" + pair + ".tsv");
      AlignmentTask task;
      if (fs::exists(truth_path)) {
        // Seeds are all training pairs; the rest of the ground truth is test.
        auto truth = parse_seeds(truth_path, a, b, mkg.kgs[a].entities(), mkg.kgs[b].entities()).seeds;
        std::unordered_set<std::uint32_t> src, tgt;
        for (const auto& p : seeds.pairs) {
          src.insert(p.source.value);
          tgt.insert(p.target.value);
        }
        task.train = seeds;
        task.test = SeedSet{a, b, {}};
        for (const auto& p : truth.pairs)
          if (!src.contains(p.source.value) && !tgt.contains(p.target.value)) task.test.pairs.push_back(p);
      } else {
        auto [tr, te] = split_seeds(seeds, options.seed_train_fraction, options.split_seed);
        task.train = std::move(tr);
        task.test = std::move(te);
      }
      mkg.alignments.push_back(std::move(task));
    }
  }

  const fs::path vectors = dir / "vectors.tsv";
  if (fs::exists(vectors)) load_initial_vectors(vectors, mkg);
  return mkg;
}

}  // namespace jmac
