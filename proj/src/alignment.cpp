#include "jmac/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jmac::alignment {

using diff::Activation;

std::vector<Tensor> FusionParams::parameters() const {
  std::vector<Tensor> out;
  for (const auto* group : {&entity, &relation})
    for (const auto& m : *group) {
      auto p = m.parameters();
      out.insert(out.end(), p.begin(), p.end());
    }
  return out;
}

std::vector<Tensor> HeadParams::parameters() const {
  auto out = entity.parameters();
  auto r = relation.parameters();
  out.insert(out.end(), r.begin(), r.end());
  return out;
}

FusionParams make_fusion(std::size_t layers, std::size_t dim, std::mt19937_64& rng) {
  FusionParams f;
  for (std::size_t k = 0; k <= layers; ++k) {
    f.entity.emplace_back(std::vector<std::size_t>{2 * dim, dim},
                          std::vector<Activation>{Activation::kIdentity}, rng);
    f.relation.emplace_back(std::vector<std::size_t>{2 * dim, dim},
                            std::vector<Activation>{Activation::kIdentity}, rng);
  }
  return f;
}

HeadParams make_heads(std::size_t layers, std::size_t dim, std::mt19937_64& rng) {
  const std::size_t in = (layers + 1) * dim;
  return {Mlp({in, dim}, {Activation::kIdentity}, rng), Mlp({in, dim}, {Activation::kIdentity}, rng)};
}

std::pair<Tensor, Tensor> sir_fuse(const Tensor& completion_entities,
                                   const Tensor& completion_relations,
                                   const Tensor& alignment_entities,
                                   const Tensor& alignment_relations, const FusionParams& fusion,
                                   std::size_t layer) {
  if (layer >= fusion.entity.size()) throw rgnn::ModelError("sir_fuse: no fusion block for layer");
  Tensor e = fusion.entity[layer].forward(
      diff::concat_cols({diff::detach(completion_entities), alignment_entities}));
  Tensor r = fusion.relation[layer].forward(
      diff::concat_cols({diff::detach(completion_relations), alignment_relations}));
  return {e, r};
}

rgnn::FusionHook make_sir_hook(const LayerEmbeddings& completion, const FusionParams& fusion) {
  return [&completion, &fusion](std::size_t layer, const Tensor& ent, const Tensor& rel) {
    return sir_fuse(completion.entities.at(layer), completion.relations.at(layer), ent, rel,
                    fusion, layer);
  };
}

FinalEmbeddings final_embeddings(const LayerEmbeddings& layers, const HeadParams& heads) {
  const std::size_t expected = heads.entity.in_dim();
  Tensor ent = diff::concat_cols(layers.entities);
  Tensor rel = diff::concat_cols(layers.relations);
  if (ent.cols() != expected || rel.cols() != heads.relation.in_dim()) {
    throw rgnn::ModelError("final_embeddings: layer stack does not match head input size");
  }
  return {heads.entity.forward(ent), heads.relation.forward(rel)};
}

namespace {

std::vector<double> row_norms(const Matrix& m) {
  std::vector<double> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double x : m.row_span(r)) s += x * x;
    if (s == 0.0) throw diff::DiffError("zero-norm embedding");
    out[r] = std::sqrt(s);
  }
  return out;
}

}  // namespace

Matrix similarity_matrix(const Matrix& source, const Matrix& target) {
  if (source.cols() != target.cols()) throw rgnn::ModelError("similarity_matrix: dimension mismatch");
  const auto ns = row_norms(source);
  const auto nt = row_norms(target);
  Matrix out(source.rows(), target.rows());
  for (std::size_t i = 0; i < source.rows(); ++i) {
    auto u = source.row_span(i);
    for (std::size_t j = 0; j < target.rows(); ++j) {
      auto v = target.row_span(j);
      double dot = 0.0;
      for (std::size_t c = 0; c < u.size(); ++c) dot += u[c] * v[c];
      // 1 - d_cos = cos
      out(i, j) = dot / (ns[i] * nt[j]);
    }
  }
  return out;
}

Matrix take_rows(const Matrix& table, std::size_t offset, std::size_t count) {
  Matrix out(count, table.cols());
  for (std::size_t r = 0; r < count; ++r) {
    auto src = table.row_span(offset + r);
    std::copy(src.begin(), src.end(), out.row_span(r).begin());
  }
  return out;
}

AlignmentMatrix build_alignment_matrix(const Matrix& entity_final, const MultiKg& multikg,
                                       std::size_t source_kg, std::size_t target_kg) {
  const auto offsets = multikg.entity_offsets();
  return {source_kg, target_kg,
          similarity_matrix(
              take_rows(entity_final, offsets[source_kg], multikg.kgs[source_kg].entity_count()),
              take_rows(entity_final, offsets[target_kg], multikg.kgs[target_kg].entity_count()))};
}

namespace {

std::vector<std::uint32_t> nearest(const Matrix& table, const std::vector<double>& norms,
                                   std::size_t row, std::size_t k) {
  std::vector<std::pair<double, std::uint32_t>> cand;
  cand.reserve(table.rows() - 1);
  auto u = table.row_span(row);
  for (std::size_t j = 0; j < table.rows(); ++j) {
    if (j == row) continue;
    auto v = table.row_span(j);
    double dot = 0.0;
    for (std::size_t c = 0; c < u.size(); ++c) dot += u[c] * v[c];
    cand.emplace_back(dot / (norms[row] * norms[j]), static_cast<std::uint32_t>(j));
  }
  auto by_sim = [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  };
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(), by_sim);
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(cand[i].second);
  return out;
}

}  // namespace

std::vector<NegativePair> nearest_negatives(std::span<const SeedPair> seeds,
                                            const Matrix& source_final,
                                            const Matrix& target_final, std::size_t k) {
  if (k == 0) throw rgnn::ModelError("nearest_negatives: k must be at least 1");
  if (source_final.rows() < k + 1 || target_final.rows() < k + 1) {
    throw rgnn::ModelError("nearest_negatives: KG has fewer than k + 1 entities");
  }
  const auto ns = row_norms(source_final);
  const auto nt = row_norms(target_final);
  std::vector<NegativePair> out;
  out.reserve(seeds.size() * 2 * k);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& p = seeds[i];
    for (auto x : nearest(source_final, ns, p.source.index(), k)) out.push_back({i, EntityId{x}, p.target});
    for (auto y : nearest(target_final, nt, p.target.index(), k)) out.push_back({i, p.source, EntityId{y}});
  }
  return out;
}

Tensor alignment_loss(std::span<const std::size_t> pos_source, std::span<const std::size_t> pos_target,
                      std::span<const std::size_t> neg_source, std::span<const std::size_t> neg_target,
                      std::span<const std::size_t> neg_positive, double margin,
                      const Tensor& entity_final) {
  if (pos_source.size() != pos_target.size() || neg_source.size() != neg_target.size() ||
      neg_source.size() != neg_positive.size() || neg_source.empty()) {
    throw rgnn::ModelError("alignment_loss: inconsistent pair lists");
  }
  std::vector<std::size_t> ps, pt;
  ps.reserve(neg_positive.size());
  pt.reserve(neg_positive.size());
  for (auto i : neg_positive) {
    ps.push_back(pos_source[i]);
    pt.push_back(pos_target[i]);
  }
  Tensor d_pos = diff::cosine_distance_rows(diff::gather_rows(entity_final, ps),
                                            diff::gather_rows(entity_final, pt));
  Tensor d_neg = diff::cosine_distance_rows(diff::gather_rows(entity_final, neg_source),
                                            diff::gather_rows(entity_final, neg_target));
  return diff::mean(diff::relu(diff::add_scalar(diff::sub(d_pos, d_neg), margin)));
}

std::vector<Match> greedy_match(const Matrix& scores) {
  for (double v : scores.data())
    if (!std::isfinite(v)) throw rgnn::ModelError("greedy_match: non-finite score");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Stable sort over flat (row, col) indices.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<bool> row_used(scores.rows(), false), col_used(scores.cols(), false);
  std::vector<Match> out;
  const std::size_t limit = std::min(scores.rows(), scores.cols());
  for (std::size_t idx : order) {
    if (out.size() == limit) break;
    const std::size_t r = idx / scores.cols(), c = idx % scores.cols();
    if (row_used[r] || col_used[c]) continue;
    row_used[r] = col_used[c] = true;
    out.push_back({r, c, scores[idx]});
  }
  return out;
}

}  // namespace jmac::alignment
