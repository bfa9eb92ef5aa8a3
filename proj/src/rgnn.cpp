#include "jmac/rgnn.hpp"

#include <cmath>

namespace jmac::rgnn {

using diff::Activation;

std::vector<Tensor> EncoderParams::parameters() const {
  std::vector<Tensor> out{entity_table, relation_table};
  for (const auto& b : blocks) {
    for (const Mlp* m : {&b.composition, &b.relation, &b.attention, &b.update}) {
      auto p = m->parameters();
      out.insert(out.end(), p.begin(), p.end());
    }
  }
  return out;
}

EncoderParams make_encoder(const MultiKg& multikg, std::size_t layers, std::size_t dim,
                           std::mt19937_64& rng) {
  if (dim == 0) throw ModelError("embedding dimension must be positive");
  EncoderParams p;
  p.layers = layers;
  p.dim = dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::uniform_real_distribution<double> dist(-bound, bound);

  Matrix ent(multikg.total_entities(), dim);
  for (double& x : ent.data()) x = dist(rng);
  Matrix rel(multikg.relations.size(), dim);
  for (double& x : rel.data()) x = dist(rng);

  if (const auto& iv = multikg.initial_vectors) {
    if (iv->dim != dim) {
      throw ModelError("initial vector dimension " + std::to_string(iv->dim) +
                       " does not match model dimension " + std::to_string(dim));
    }
    const auto offsets = multikg.entity_offsets();
    for (std::size_t k = 0; k < iv->entities.size(); ++k)
      for (std::size_t e = 0; e < iv->entities[k].size(); ++e)
        if (const auto& v = iv->entities[k][e])
          for (std::size_t c = 0; c < dim; ++c) ent(offsets[k] + e, c) = (*v)[c];
    for (std::size_t r = 0; r < iv->relations.size(); ++r)
      if (const auto& v = iv->relations[r])
        for (std::size_t c = 0; c < dim; ++c) rel(r, c) = (*v)[c];
  }
  p.entity_table = Tensor::parameter(std::move(ent));
  p.relation_table = Tensor::parameter(std::move(rel));

  for (std::size_t k = 0; k < layers; ++k) {
    LayerBlock b;
    b.composition = Mlp({dim, dim, dim}, {Activation::kLeakyRelu, Activation::kIdentity}, rng);
    b.relation = Mlp({dim, dim}, {Activation::kIdentity}, rng);
    b.attention = Mlp({2 * dim, 1}, {Activation::kIdentity}, rng);
    b.update = Mlp({dim, dim}, {Activation::kTanh}, rng);
    p.blocks.push_back(std::move(b));
  }
  return p;
}

GraphIndex GraphIndex::build(const MultiKg& multikg) {
  GraphIndex g;
  g.entity_count = multikg.total_entities();
  g.degree.assign(g.entity_count, 0);
  const auto offsets = multikg.entity_offsets();
  for (std::size_t k = 0; k < multikg.kgs.size(); ++k) {
    const Kg& kg = multikg.kgs[k];
    for (std::size_t e = 0; e < kg.entity_count(); ++e) {
      for (const auto& nb : kg.neighbors(EntityId{static_cast<std::uint32_t>(e)})) {
        g.center.push_back(offsets[k] + e);
        g.neighbor.push_back(offsets[k] + nb.entity.index());
        g.relation.push_back(nb.relation.index());
        ++g.degree[offsets[k] + e];
      }
    }
  }
  return g;
}

Tensor message(const Tensor& neighbor_vecs, const Tensor& relation_vecs, const LayerBlock& block) {
  return diff::sub(neighbor_vecs, block.composition.forward(relation_vecs));
}

Tensor attention(const Tensor& center_vec, const Tensor& messages, const LayerBlock& block) {
  if (messages.rows() == 0) throw ModelError("attention over an empty neighbor set");
  std::vector<std::size_t> zeros(messages.rows(), 0);
  Tensor centers = diff::gather_rows(center_vec, zeros);
  Tensor logits = block.attention.forward(diff::concat_cols({centers, messages}));
  return diff::segment_softmax(logits, zeros, 1);
}

std::pair<Tensor, Tensor> layer_forward(const GraphIndex& graph, const Tensor& entities,
                                        const Tensor& relations, const LayerBlock& block,
                                        const EncoderOptions& options) {
  if (entities.rows() != graph.entity_count) {
    throw ModelError("entity table rows do not match the graph");
  }
  Tensor aggregated;
  if (graph.center.empty()) {
    aggregated = Tensor::constant(Matrix(entities.rows(), entities.cols()));
  } else if (options.relation_aware) {
    Tensor neighbors = diff::gather_rows(entities, graph.neighbor);
    Tensor msgs = message(neighbors, diff::gather_rows(relations, graph.relation), block);
    Tensor centers = diff::gather_rows(entities, graph.center);
    Tensor logits = block.attention.forward(diff::concat_cols({centers, msgs}));
    Tensor alpha = diff::segment_softmax(logits, graph.center, graph.entity_count);
    aggregated = diff::scatter_weighted_sum(msgs, alpha, graph.center, graph.entity_count);
  } else {
    Matrix w(graph.center.size(), 1);
    for (std::size_t i = 0; i < graph.center.size(); ++i)
      w[i] = 1.0 / static_cast<double>(graph.degree[graph.center[i]]);
    aggregated = diff::scatter_weighted_sum(diff::gather_rows(entities, graph.neighbor),
                                            Tensor::constant(std::move(w)), graph.center,
                                            graph.entity_count);
  }
  Tensor next_entities = block.update.forward(diff::add(aggregated, entities));
  Tensor next_relations = block.relation.forward(relations);
  return {next_entities, next_relations};
}

LayerEmbeddings encode(const GraphIndex& graph, const EncoderParams& params,
                       const EncoderOptions& options, const FusionHook& fusion) {
  if (params.blocks.size() != params.layers) throw ModelError("encoder block count mismatch");
  LayerEmbeddings out;
  Tensor ent = params.entity_table;
  Tensor rel = params.relation_table;
  if (fusion) std::tie(ent, rel) = fusion(0, ent, rel);
  out.entities.push_back(ent);
  out.relations.push_back(rel);
  for (std::size_t k = 0; k < params.layers; ++k) {
    std::tie(ent, rel) = layer_forward(graph, ent, rel, params.blocks[k], options);
    if (fusion) std::tie(ent, rel) = fusion(k + 1, ent, rel);
    out.entities.push_back(ent);
    out.relations.push_back(rel);
  }
  return out;
}

LayerEmbeddings detach(const LayerEmbeddings& layers) {
  LayerEmbeddings out;
  for (const auto& t : layers.entities) out.entities.push_back(diff::detach(t));
  for (const auto& t : layers.relations) out.relations.push_back(diff::detach(t));
  return out;
}

}  // namespace jmac::rgnn
