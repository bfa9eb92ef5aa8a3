#include "jmac/completion.hpp"

#include <cmath>

namespace jmac::completion {

double score_layer(std::span<const double> head, std::span<const double> relation,
                   std::span<const double> tail) {
  if (head.size() != relation.size() || head.size() != tail.size()) {
    throw rgnn::ModelError("score_layer: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < head.size(); ++i) s += std::abs(head[i] + relation[i] - tail[i]);
  return -s;
}

ScoredTriple score_triple(std::size_t head_row, std::size_t relation, std::size_t tail_row,
                          const LayerEmbeddings& layers) {
  ScoredTriple out{head_row, relation, tail_row, {}, 0.0};
  for (std::size_t k = 0; k < layers.depth(); ++k) {
    const auto& e = layers.entities[k].value();
    const auto& r = layers.relations[k].value();
    const double f = score_layer(e.row_span(head_row), r.row_span(relation), e.row_span(tail_row));
    out.layer_scores.push_back(f);
    out.total += f;
  }
  return out;
}

double score(std::size_t head_row, std::size_t relation, std::size_t tail_row,
             const LayerEmbeddings& layers) {
  return score_triple(head_row, relation, tail_row, layers).total;
}

void TripleRows::push(std::size_t h, std::size_t r, std::size_t t) {
  head.push_back(h);
  relation.push_back(r);
  tail.push_back(t);
}

void TripleRows::push(const Triple& t, std::size_t entity_offset) {
  push(entity_offset + t.head.index(), t.relation.index(), entity_offset + t.tail.index());
}

NegativeBatch sample_negatives(std::span<const Triple> positives, const Kg& kg, std::size_t m,
                               std::mt19937_64& rng, std::size_t max_retries) {
  if (m == 0) throw rgnn::ModelError("negative sample count must be at least 1");
  NegativeBatch batch;
  batch.per_positive = m;
  batch.positives.assign(positives.begin(), positives.end());
  batch.negatives.reserve(positives.size() * m);
  std::uniform_int_distribution<std::uint32_t> pick(
      0, static_cast<std::uint32_t>(kg.entity_count() - 1));
  std::bernoulli_distribution corrupt_head(0.5);
  for (const auto& pos : positives) {
    for (std::size_t j = 0; j < m; ++j) {
      std::size_t attempt = 0;
      while (true) {
        Triple neg = pos;
        neg.origin = TripleOrigin::kLoaded;
        if (corrupt_head(rng)) {
          neg.head = EntityId{pick(rng)};
        } else {
          neg.tail = EntityId{pick(rng)};
        }
        if (!kg.contains(neg.head, neg.relation, neg.tail)) {
          batch.negatives.push_back(neg);
          break;
        }
        if (++attempt >= max_retries) {
          throw rgnn::ModelError("negative sampling exhausted its retry budget in KG " + kg.id());
        }
      }
    }
  }
  return batch;
}

namespace {

Tensor layer_distance(const TripleRows& rows, const Tensor& entities, const Tensor& relations) {
  Tensor h = diff::gather_rows(entities, rows.head);
  Tensor r = diff::gather_rows(relations, rows.relation);
  Tensor t = diff::gather_rows(entities, rows.tail);
  return diff::l1_norm_rows(diff::sub(diff::add(h, r), t));
}

}  // namespace

Tensor ranking_loss(const TripleRows& positives, const TripleRows& negatives, double margin,
                    const LayerEmbeddings& layers) {
  if (positives.size() != negatives.size() || positives.size() == 0) {
    throw rgnn::ModelError("ranking_loss: positives and negatives must pair one-to-one");
  }
  Tensor total;
  for (std::size_t k = 0; k < layers.depth(); ++k) {
    // gamma - f(pos) + f(neg) = gamma + |pos|_1 - |neg|_1
    Tensor pos = layer_distance(positives, layers.entities[k], layers.relations[k]);
    Tensor neg = layer_distance(negatives, layers.entities[k], layers.relations[k]);
    Tensor hinge = diff::relu(diff::add_scalar(diff::sub(pos, neg), margin));
    Tensor term = diff::mean(hinge);
    total = total.defined() ? diff::add(total, term) : term;
  }
  return total;
}

Tensor alignment_constraint_loss(std::span<const std::size_t> source_rows,
                                 std::span<const std::size_t> target_rows,
                                 const LayerEmbeddings& layers) {
  if (source_rows.size() != target_rows.size() || source_rows.empty()) {
    throw rgnn::ModelError("alignment_constraint_loss: need matching non-empty pair lists");
  }
  Tensor total;
  for (std::size_t k = 0; k < layers.depth(); ++k) {
    Tensor d = diff::cosine_distance_rows(diff::gather_rows(layers.entities[k], source_rows),
                                          diff::gather_rows(layers.entities[k], target_rows));
    Tensor term = diff::mean(d);
    total = total.defined() ? diff::add(total, term) : term;
  }
  return total;
}

Tensor completion_loss(const Tensor& ranking, const Tensor& constraint) {
  return diff::add(ranking, constraint);
}

}  // namespace jmac::completion
