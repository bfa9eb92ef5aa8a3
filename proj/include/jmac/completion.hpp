// Completion component: layer-summed TransE scores, margin ranking loss and
// the cosine alignment constraint on completion embeddings.
#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "jmac/diff.hpp"
#include "jmac/kgdata.hpp"
#include "jmac/rgnn.hpp"

namespace jmac::completion {

using diff::Tensor;
using rgnn::LayerEmbeddings;

// -||h + r - t||_1
double score_layer(std::span<const double> head, std::span<const double> relation,
                   std::span<const double> tail);

// Sum of score_layer over every layer 0..K; entity rows are stacked-table rows.
double score(std::size_t head_row, std::size_t relation, std::size_t tail_row,
             const LayerEmbeddings& layers);

struct ScoredTriple {
  std::size_t head_row = 0;
  std::size_t relation = 0;
  std::size_t tail_row = 0;
  std::vector<double> layer_scores;
  double total = 0.0;
};

ScoredTriple score_triple(std::size_t head_row, std::size_t relation, std::size_t tail_row,
                          const LayerEmbeddings& layers);

// Parallel index arrays for a batch of triples in stacked-row coordinates.
struct TripleRows {
  std::vector<std::size_t> head;
  std::vector<std::size_t> relation;
  std::vector<std::size_t> tail;

  std::size_t size() const { return head.size(); }
  void push(std::size_t h, std::size_t r, std::size_t t);
  void push(const Triple& t, std::size_t entity_offset);
};

// negatives[i * per_positive + j] corrupts positives[i].
struct NegativeBatch {
  std::vector<Triple> positives;
  std::vector<Triple> negatives;
  std::size_t per_positive = 0;
};

// Corrupts head or tail (fair coin) with a uniformly drawn entity; corruptions
// that are known triples of `kg` are redrawn up to `max_retries` times.
NegativeBatch sample_negatives(std::span<const Triple> positives, const Kg& kg, std::size_t m,
                               std::mt19937_64& rng, std::size_t max_retries = 1000);

// Sum over layers of the mean hinge max(0, gamma - f^k(pos) + f^k(neg)).
Tensor ranking_loss(const TripleRows& positives, const TripleRows& negatives, double margin,
                    const LayerEmbeddings& layers);

// Sum over layers of the mean cosine distance between paired entity rows.
Tensor alignment_constraint_loss(std::span<const std::size_t> source_rows,
                                 std::span<const std::size_t> target_rows,
                                 const LayerEmbeddings& layers);

Tensor completion_loss(const Tensor& ranking, const Tensor& constraint);

}  // namespace jmac::completion
