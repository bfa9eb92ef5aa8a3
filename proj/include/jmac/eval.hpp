// Filtered tail-ranking for completion, target ranking for alignment, and
// MRR / Hits@k aggregation. Ties count against the query (pessimistic rank).
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "jmac/diff.hpp"
#include "jmac/kgdata.hpp"
#include "jmac/rgnn.hpp"

namespace jmac::eval {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RankResult {
  std::size_t query = 0;
  std::size_t rank = 0;
  std::size_t candidates = 0;
};

// Known true tails per (head, relation), built from loaded split triples only.
class FilterIndex {
 public:
  void add(const Triple& t);
  void add_all(std::span<const Triple> triples);
  const std::vector<std::uint32_t>& tails(EntityId head, RelationId relation) const;

 private:
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> tails_;
};

// `tail_scores[c]` is the score of (h, r, c) for every entity c of the KG.
RankResult kgc_rank(const Triple& test, std::span<const double> tail_scores,
                    const FilterIndex& known, std::size_t query = 0);

// Scores of (h, r, c) for all tails c using layer-summed TransE over completion embeddings.
std::vector<double> tail_scores(const Triple& query, std::size_t entity_offset,
                                std::size_t entity_count, const rgnn::LayerEmbeddings& layers);

// Ranks the true target among all rows of `target_final` by cosine similarity.
RankResult kga_rank(std::span<const double> source_vec, const diff::Matrix& target_final,
                    std::size_t true_target, std::size_t query = 0);

struct Metrics {
  double mrr = 0.0;
  std::map<std::size_t, double> hits;
  std::size_t count = 0;
};

Metrics aggregate(std::span<const RankResult> ranks, std::span<const std::size_t> ks);

// Filter set for one KG: train, valid and test splits (never transferred triples).
FilterIndex make_filter(const KgcSplit& split);

std::vector<RankResult> evaluate_kgc(const MultiKg& multikg, std::size_t kg,
                                     std::span<const Triple> queries,
                                     const rgnn::LayerEmbeddings& completion);

std::vector<RankResult> evaluate_kga(const MultiKg& multikg, const SeedSet& test_pairs,
                                     const diff::Matrix& entity_final);

}  // namespace jmac::eval
