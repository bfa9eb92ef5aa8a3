#include "jmac/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>

#include "jmac/rng.hpp"

namespace jmac::synth {

namespace fs = std::filesystem;

std::size_t SynthResult::kept_count() const {
  return static_cast<std::size_t>(std::count(kept.begin(), kept.end(), true));
}

namespace {

void validate(const SynthSpec& s) {
  if (s.entity_count < 2) throw SynthError("synthetic graph needs at least 2 entities");
  if (s.relation_count == 0) throw SynthError("synthetic graph needs at least 1 relation");
  if (!(s.mean_degree > 0.0)) throw SynthError("mean degree must be positive");
  if (!(s.missing_rate >= 0.0 && s.missing_rate < 1.0)) throw SynthError("missing rate must lie in [0, 1)");
  if (!(s.seed_fraction > 0.0 && s.seed_fraction < 1.0)) throw SynthError("seed fraction must lie in (0, 1)");
  if (!(s.holdout_fraction >= 0.0 && s.holdout_fraction < 1.0))
    throw SynthError("holdout fraction must lie in [0, 1)");
}

std::string entity_label(char prefix, std::size_t i) { return std::string(1, prefix) + std::to_string(i); }
std::string relation_label(std::size_t r) { return "r" + std::to_string(r); }

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SynthError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace

SynthResult generate(const SynthSpec& spec) {
  validate(spec);
  const std::size_t n = spec.entity_count;
  const auto wanted = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.mean_degree / 2.0));
  const std::size_t target = std::max(n - 1, wanted);
  const double capacity = static_cast<double>(n) * static_cast<double>(n - 1) * static_cast<double>(spec.relation_count);
  if (static_cast<double>(target) > capacity / 2.0) throw SynthError("mean degree too large for the entity count");

  auto rng = named_stream(spec.rng_seed, "synth");
  SynthResult out;
  std::unordered_set<std::uint64_t> seen;
  auto key = [&](std::size_t h, std::size_t r, std::size_t t) {
    return (static_cast<std::uint64_t>(h) * n + t) * spec.relation_count + r;
  };
  std::uniform_int_distribution<std::size_t> pick_entity(0, n - 1);
  std::uniform_int_distribution<std::size_t> pick_relation(0, spec.relation_count - 1);
  std::bernoulli_distribution coin(0.5);
  auto add = [&](std::size_t h, std::size_t r, std::size_t t) {
    if (h == t || !seen.insert(key(h, r, t)).second) return false;
    out.base.push_back({h, r, t});
    return true;
  };

  // Random spanning tree, then uniform extra edges.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t other = order[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)];
    const std::size_t r = pick_relation(rng);
    if (coin(rng)) add(order[i], r, other);
    else add(other, r, order[i]);
  }
  while (out.base.size() < target) add(pick_entity(rng), pick_relation(rng), pick_entity(rng));

  std::bernoulli_distribution hold(spec.holdout_fraction);
  std::bernoulli_distribution drop(spec.missing_rate);
  for (std::size_t i = 0; i < out.base.size(); ++i) {
    out.holdout.push_back(hold(rng));
    out.kept.push_back(!drop(rng));
  }
  out.permutation.resize(n);
  std::iota(out.permutation.begin(), out.permutation.end(), 0);
  std::shuffle(out.permutation.begin(), out.permutation.end(), rng);
  out.seed_pairs = static_cast<std::size_t>(std::floor(spec.seed_fraction * static_cast<double>(n)));
  return out;
}

SynthResult write_synthetic(const SynthSpec& spec, const fs::path& dir) {
  SynthResult g = generate(spec);
  fs::create_directories(dir);
  const auto& perm = g.permutation;
  auto kg_line = [&](const BaseTriple& t) {
    return entity_label('e', t.head) + '\t' + relation_label(t.relation) + '\t' + entity_label('e', t.tail);
  };
  auto star_line = [&](const BaseTriple& t) {
    return entity_label('x', perm[t.head]) + '\t' + relation_label(t.relation) + '\t' +
           entity_label('x', perm[t.tail]);
  };

  std::vector<std::string> kg_all, kg_train, kg_valid, kg_test, st_all, st_train, st_valid, st_test;
  std::vector<bool> in_kg(spec.entity_count, false);
  for (std::size_t i = 0; i < g.base.size(); ++i) {
    if (!g.kept[i]) continue;
    in_kg[g.base[i].head] = in_kg[g.base[i].tail] = true;
  }
  // Held-out triples alternate between valid and test in base order.
  std::size_t held = 0;
  for (std::size_t i = 0; i < g.base.size(); ++i) {
    const auto& t = g.base[i];
    st_all.push_back(star_line(t));
    if (g.holdout[i]) {
      const bool valid = held++ % 2 == 0;
      (valid ? st_valid : st_test).push_back(star_line(t));
      if (in_kg[t.head] && in_kg[t.tail]) (valid ? kg_valid : kg_test).push_back(kg_line(t));
    } else {
      st_train.push_back(star_line(t));
      if (g.kept[i]) kg_train.push_back(kg_line(t));
      else if (in_kg[t.head] && in_kg[t.tail]) kg_test.push_back(kg_line(t));
    }
    if (g.kept[i]) kg_all.push_back(kg_line(t));
  }
  if (kg_all.empty()) throw SynthError("synthetic KG has no triples");

  std::vector<std::string> truth;
  for (std::size_t e = 0; e < spec.entity_count; ++e)
    if (in_kg[e]) truth.push_back(entity_label('e', e) + '\t' + entity_label('x', perm[e]));
  auto rng = named_stream(spec.rng_seed, "synth-seeds");
  std::vector<std::string> seeds = truth;
  std::shuffle(seeds.begin(), seeds.end(), rng);
  g.seed_pairs = std::min(g.seed_pairs, seeds.size());
  seeds.resize(g.seed_pairs);

  write_lines(dir / "triples_kg.tsv", kg_all);
  write_lines(dir / "triples_kgstar.tsv", st_all);
  write_lines(dir / "kgc_train_kg.tsv", kg_train);
  write_lines(dir / "kgc_valid_kg.tsv", kg_valid);
  write_lines(dir / "kgc_test_kg.tsv", kg_test);
  write_lines(dir / "kgc_train_kgstar.tsv", st_train);
  write_lines(dir / "kgc_valid_kgstar.tsv", st_valid);
  write_lines(dir / "kgc_test_kgstar.tsv", st_test);
  write_lines(dir / "alignment_kg_kgstar.tsv", truth);
  write_lines(dir / "seeds_kg_kgstar.tsv", seeds);
  return g;
}

}  // namespace jmac::synth
