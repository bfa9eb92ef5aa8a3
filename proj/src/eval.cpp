#include "jmac/eval.hpp"

#include <cmath>

#include "jmac/alignment.hpp"

namespace jmac::eval {

namespace {
std::uint64_t head_relation_key(EntityId h, RelationId r) {
  return (static_cast<std::uint64_t>(h.value) << 32) | r.value;
}
}  // namespace

void FilterIndex::add(const Triple& t) {
  auto& list = tails_[head_relation_key(t.head, t.relation)];
  for (auto x : list)
    if (x == t.tail.value) return;
  list.push_back(t.tail.value);
}

void FilterIndex::add_all(std::span<const Triple> triples) {
  for (const auto& t : triples) add(t);
}

const std::vector<std::uint32_t>& FilterIndex::tails(EntityId head, RelationId relation) const {
  static const std::vector<std::uint32_t> kEmpty;
  auto it = tails_.find(head_relation_key(head, relation));
  return it == tails_.end() ? kEmpty : it->second;
}

RankResult kgc_rank(const Triple& test, std::span<const double> tail_scores,
                    const FilterIndex& known, std::size_t query) {
  const std::size_t n = tail_scores.size();
  if (test.tail.index() >= n) throw EvalError("kgc_rank: test tail outside candidate range");
  std::vector<bool> filtered(n, false);
  for (auto t : known.tails(test.head, test.relation))
    if (t != test.tail.value && t < n) filtered[t] = true;
  const double target = tail_scores[test.tail.index()];
  std::size_t higher = 0, candidates = 0;
  for (std::size_t c = 0; c < n; ++c) {
    if (filtered[c]) continue;
    ++candidates;
    if (c != test.tail.index() && tail_scores[c] >= target) ++higher;
  }
  return {query, higher + 1, candidates};
}

std::vector<double> tail_scores(const Triple& query, std::size_t entity_offset,
                                std::size_t entity_count, const rgnn::LayerEmbeddings& layers) {
  std::vector<double> out(entity_count, 0.0);
  for (std::size_t k = 0; k < layers.depth(); ++k) {
    const auto& e = layers.entities[k].value();
    const auto& r = layers.relations[k].value();
    const std::size_t n = e.cols();
    std::vector<double> hr(n);
    auto h = e.row_span(entity_offset + query.head.index());
    auto rel = r.row_span(query.relation.index());
    for (std::size_t c = 0; c < n; ++c) hr[c] = h[c] + rel[c];
    for (std::size_t t = 0; t < entity_count; ++t) {
      auto tv = e.row_span(entity_offset + t);
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) s += std::abs(hr[c] - tv[c]);
      out[t] -= s;
    }
  }
  return out;
}

RankResult kga_rank(std::span<const double> source_vec, const diff::Matrix& target_final,
                    std::size_t true_target, std::size_t query) {
  if (true_target >= target_final.rows()) throw EvalError("kga_rank: true target out of range");
  std::vector<double> sims(target_final.rows());
  for (std::size_t j = 0; j < target_final.rows(); ++j)
    sims[j] = 1.0 - diff::cosine_distance(source_vec, target_final.row_span(j));
  std::size_t higher = 0;
  for (std::size_t j = 0; j < sims.size(); ++j)
    if (j != true_target && sims[j] >= sims[true_target]) ++higher;
  return {query, higher + 1, target_final.rows()};
}

Metrics aggregate(std::span<const RankResult> ranks, std::span<const std::size_t> ks) {
  if (ranks.empty()) throw EvalError("aggregate: empty rank list");
  Metrics m;
  m.count = ranks.size();
  for (auto k : ks) m.hits[k] = 0.0;
  for (const auto& r : ranks) {
    m.mrr += 1.0 / static_cast<double>(r.rank);
    for (auto k : ks)
      if (r.rank <= k) m.hits[k] += 1.0;
  }
  const double n = static_cast<double>(ranks.size());
  m.mrr /= n;
  for (auto& [k, v] : m.hits) v /= n;
  return m;
}

FilterIndex make_filter(const KgcSplit& split) {
  FilterIndex f;
  f.add_all(split.train);
  f.add_all(split.valid);
  f.add_all(split.test);
  return f;
}

std::vector<RankResult> evaluate_kgc(const MultiKg& multikg, std::size_t kg,
                                     std::span<const Triple> queries,
                                     const rgnn::LayerEmbeddings& completion) {
  const auto filter = make_filter(multikg.splits.at(kg));
  const std::size_t offset = multikg.entity_offsets()[kg];
  const std::size_t count = multikg.kgs[kg].entity_count();
  std::vector<RankResult> out;
  out.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto scores = tail_scores(queries[i], offset, count, completion);
    out.push_back(kgc_rank(queries[i], scores, filter, i));
  }
  return out;
}

std::vector<RankResult> evaluate_kga(const MultiKg& multikg, const SeedSet& test_pairs,
                                     const diff::Matrix& entity_final) {
  const auto offsets = multikg.entity_offsets();
  const diff::Matrix target = alignment::take_rows(
      entity_final, offsets[test_pairs.target_kg], multikg.kgs[test_pairs.target_kg].entity_count());
  std::vector<RankResult> out;
  out.reserve(test_pairs.pairs.size());
  for (std::size_t i = 0; i < test_pairs.pairs.size(); ++i) {
    const auto& p = test_pairs.pairs[i];
    out.push_back(kga_rank(entity_final.row_span(offsets[test_pairs.source_kg] + p.source.index()),
                           target, p.target.index(), i));
  }
  return out;
}

}  // namespace jmac::eval
