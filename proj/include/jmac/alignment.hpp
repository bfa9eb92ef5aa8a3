// Alignment component: per-layer fusion of completion embeddings into the
// alignment encoder, final embedding heads, similarity matrix, nearest-entity
// negatives, margin loss and greedy one-to-one matching.
#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "jmac/diff.hpp"
#include "jmac/kgdata.hpp"
#include "jmac/rgnn.hpp"

namespace jmac::alignment {

using diff::Matrix;
using diff::Mlp;
using diff::Tensor;
using rgnn::LayerEmbeddings;

// One entity and one relation fusion MLP (2n -> n) per layer 0..K.
struct FusionParams {
  std::vector<Mlp> entity;
  std::vector<Mlp> relation;

  std::vector<Tensor> parameters() const;
};

// (K+1)n -> n heads over the concatenated layer stack.
struct HeadParams {
  Mlp entity;
  Mlp relation;

  std::vector<Tensor> parameters() const;
};

FusionParams make_fusion(std::size_t layers, std::size_t dim, std::mt19937_64& rng);
HeadParams make_heads(std::size_t layers, std::size_t dim, std::mt19937_64& rng);

// Returns (MLP_a1(c_e ++ a_e), MLP_a2(c_r ++ a_r)). The completion tables are
// detached, so no gradient reaches the completion encoder.
std::pair<Tensor, Tensor> sir_fuse(const Tensor& completion_entities,
                                   const Tensor& completion_relations,
                                   const Tensor& alignment_entities,
                                   const Tensor& alignment_relations, const FusionParams& fusion,
                                   std::size_t layer);

// Fusion hook for rgnn::encode reading the completion layer stack.
rgnn::FusionHook make_sir_hook(const LayerEmbeddings& completion, const FusionParams& fusion);

struct FinalEmbeddings {
  Tensor entities;
  Tensor relations;
};

FinalEmbeddings final_embeddings(const LayerEmbeddings& layers, const HeadParams& heads);

// Entries are 1 - cosine distance between source row i and target row j.
struct AlignmentMatrix {
  std::size_t source_kg = 0;
  std::size_t target_kg = 0;
  Matrix values;
};

Matrix similarity_matrix(const Matrix& source, const Matrix& target);

// Rows [offset, offset + count) of a stacked table.
Matrix take_rows(const Matrix& table, std::size_t offset, std::size_t count);

AlignmentMatrix build_alignment_matrix(const Matrix& entity_final, const MultiKg& multikg,
                                       std::size_t source_kg, std::size_t target_kg);

struct NegativePair {
  std::size_t positive = 0;  // index into the seed list
  EntityId source;
  EntityId target;
};

// For each seed pair, k nearest same-KG neighbors of e (paired with e*) and of e*
// (paired with e) by cosine similarity; ties go to the lower entity id.
std::vector<NegativePair> nearest_negatives(std::span<const SeedPair> seeds,
                                            const Matrix& source_final,
                                            const Matrix& target_final, std::size_t k);

// Mean over pos-neg pairs of max(0, gamma + d(pos) - d(neg)).
Tensor alignment_loss(std::span<const std::size_t> pos_source, std::span<const std::size_t> pos_target,
                      std::span<const std::size_t> neg_source, std::span<const std::size_t> neg_target,
                      std::span<const std::size_t> neg_positive, double margin,
                      const Tensor& entity_final);

struct Match {
  std::size_t row = 0;
  std::size_t col = 0;
  double score = 0.0;
  bool operator==(const Match&) const = default;
};

// Repeatedly takes the largest remaining entry (ties by row, then column).
std::vector<Match> greedy_match(const Matrix& scores);

}  // namespace jmac::alignment
