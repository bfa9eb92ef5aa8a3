// Relation-aware graph neural network encoder.
//
// Layer update for every entity e with neighbor set N(e):
//   m(e', r)   = a_e' - MLP_comp(a_r)
//   alpha      = softmax over N(e) of MLP_att(a_e ++ m(e', r))
//   a_e^{k+1}  = g( sum alpha * m + a_e^k ),  g = linear + tanh
//   a_r^{k+1}  = MLP_rel(a_r^k)
// All KGs share one stacked entity table and one relation table; no edge
// connects entities of different KGs.
#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "jmac/diff.hpp"
#include "jmac/kgdata.hpp"

namespace jmac::rgnn {

using diff::Matrix;
using diff::Mlp;
using diff::Tensor;

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LayerBlock {
  Mlp composition;  // n -> n -> n, LeakyReLU between
  Mlp relation;     // n -> n
  Mlp attention;    // 2n -> 1
  Mlp update;       // g: n -> n, tanh
};

struct EncoderParams {
  std::size_t layers = 0;
  std::size_t dim = 0;
  Tensor entity_table;    // |E_total| x n
  Tensor relation_table;  // |R| x n
  std::vector<LayerBlock> blocks;

  std::vector<Tensor> parameters() const;
};

// Uniform [-1/sqrt(n), 1/sqrt(n)] tables, overwritten row by row by any
// initial vectors attached to the dataset.
EncoderParams make_encoder(const MultiKg& multikg, std::size_t layers, std::size_t dim,
                           std::mt19937_64& rng);

struct LayerEmbeddings {
  std::vector<Tensor> entities;   // layers 0..K
  std::vector<Tensor> relations;  // layers 0..K
  std::size_t depth() const { return entities.size(); }
};

// Flattened neighbor lists of every KG in stacked-row coordinates, grouped by center.
struct GraphIndex {
  std::size_t entity_count = 0;
  std::vector<std::size_t> center;
  std::vector<std::size_t> neighbor;
  std::vector<std::size_t> relation;
  std::vector<std::size_t> degree;  // per entity

  static GraphIndex build(const MultiKg& multikg);
};

struct EncoderOptions {
  // false: bare neighbor messages with uniform weights.
  bool relation_aware = true;
};

// Row-batched message: neighbor rows minus MLP_comp of the paired relation rows.
Tensor message(const Tensor& neighbor_vecs, const Tensor& relation_vecs, const LayerBlock& block);

// Attention weights of messages for a single center entity (1 x n).
Tensor attention(const Tensor& center_vec, const Tensor& messages, const LayerBlock& block);

std::pair<Tensor, Tensor> layer_forward(const GraphIndex& graph, const Tensor& entities,
                                        const Tensor& relations, const LayerBlock& block,
                                        const EncoderOptions& options);

// Receives layer k's tables and returns the tables that feed layer k + 1.
using FusionHook = std::function<std::pair<Tensor, Tensor>(std::size_t layer, const Tensor& entities,
                                                           const Tensor& relations)>;

LayerEmbeddings encode(const GraphIndex& graph, const EncoderParams& params,
                       const EncoderOptions& options, const FusionHook& fusion = {});

// Same layer stack with all values detached.
LayerEmbeddings detach(const LayerEmbeddings& layers);

}  // namespace jmac::rgnn
