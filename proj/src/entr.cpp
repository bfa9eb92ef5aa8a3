#include "jmac/entr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace jmac::entr {

double matrix_entropy(const Matrix& alignment) {
  double total = 0.0;
  for (std::size_t r = 0; r < alignment.rows(); ++r) {
    auto row = alignment.row_span(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double a : row) z += std::exp(a - mx);
    const double log_z = std::log(z);
    // -sum p log p with log p = (a - mx) - log z
    double h = 0.0;
    for (double a : row) {
      const double log_p = (a - mx) - log_z;
      h -= std::exp(log_p) * log_p;
    }
    total += h;
  }
  return total;
}

std::size_t seed_budget(double h_tilde, double h_current, double beta, std::size_t entity_count,
                        std::size_t target_entity_count) {
  if (h_tilde == 0.0) throw EntrError("degenerate pre-training entropy");
  if (!(beta >= 0.0 && beta <= 1.0)) throw EntrError("beta must lie in [0, 1]");
  const double size = static_cast<double>(std::min(entity_count, target_entity_count));
  const double q = std::floor(beta * (h_tilde - h_current) / h_tilde * size);
  return q > 0.0 ? static_cast<std::size_t>(q) : 0;
}

SeedSet enlarge_seeds(const Matrix& alignment, std::size_t q, const SeedSet& existing) {
  SeedSet out{existing.source_kg, existing.target_kg, {}};
  std::vector<bool> row_used(alignment.rows(), false), col_used(alignment.cols(), false);
  for (const auto& p : existing.pairs) {
    if (p.provenance != SeedProvenance::kGiven) continue;
    out.pairs.push_back(p);
    if (p.source.index() < row_used.size()) row_used[p.source.index()] = true;
    if (p.target.index() < col_used.size()) col_used[p.target.index()] = true;
  }
  if (q == 0) return out;
  std::vector<std::size_t> order(alignment.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return alignment[a] > alignment[b]; });
  std::size_t added = 0;
  for (std::size_t idx : order) {
    if (added == q) break;
    const std::size_t r = idx / alignment.cols(), c = idx % alignment.cols();
    if (row_used[r] || col_used[c]) continue;
    row_used[r] = col_used[c] = true;
    out.pairs.push_back({EntityId{static_cast<std::uint32_t>(r)},
                         EntityId{static_cast<std::uint32_t>(c)}, SeedProvenance::kEnlarged});
    ++added;
  }
  return out;
}

namespace {

std::vector<Triple> mapped_triples(const Kg& from, const Kg& to,
                                   const std::unordered_map<std::uint32_t, std::uint32_t>& map) {
  std::vector<Triple> out;
  for (const auto& t : from.triples()) {
    auto h = map.find(t.head.value);
    if (h == map.end()) continue;
    auto tl = map.find(t.tail.value);
    if (tl == map.end()) continue;
    const EntityId nh{h->second}, nt{tl->second};
    if (!to.contains_loaded(nh, t.relation, nt)) {
      out.push_back({nh, t.relation, nt, TripleOrigin::kTransferred});
    }
  }
  return out;
}

std::size_t count_new(const Kg& kg, const std::vector<Triple>& incoming) {
  std::size_t n = 0;
  std::unordered_set<std::uint64_t> seen;
  for (const auto& t : incoming)
    if (seen.insert(triple_key(t)).second && !kg.contains(t.head, t.relation, t.tail)) ++n;
  return n;
}

}  // namespace

std::size_t transfer_triples(const SeedSet& seeds, MultiKg& multikg) {
  const std::size_t a = seeds.source_kg, b = seeds.target_kg;
  if (a >= multikg.kgs.size() || b >= multikg.kgs.size() || a == b) {
    throw EntrError("transfer_triples: invalid KG pair");
  }
  std::unordered_map<std::uint32_t, std::uint32_t> forward, backward;
  for (const auto& p : seeds.pairs) {
    forward.emplace(p.source.value, p.target.value);
    backward.emplace(p.target.value, p.source.value);
  }
  Kg& ka = multikg.kgs[a];
  Kg& kb = multikg.kgs[b];
  auto into_b = mapped_triples(ka, kb, forward);
  auto into_a = mapped_triples(kb, ka, backward);
  const std::size_t added = count_new(kb, into_b) + count_new(ka, into_a);
  kb.set_transferred_from(a, std::move(into_b));
  ka.set_transferred_from(b, std::move(into_a));
  return added;
}

}  // namespace jmac::entr
