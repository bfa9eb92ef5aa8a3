// Synthetic KG pairs: a random base graph, a lossy copy KG and a relabelled
// complete copy KG*, written in the data directory layout read by load_dataset.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace jmac::synth {

class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynthSpec {
  std::size_t entity_count = 200;
  std::size_t relation_count = 3;
  double mean_degree = 4.0;
  double missing_rate = 0.0;
  double seed_fraction = 0.3;
  double holdout_fraction = 0.05;  // base triples held out of both KGs for valid/test
  std::uint64_t rng_seed = 0;
};

struct BaseTriple {
  std::size_t head = 0;
  std::size_t relation = 0;
  std::size_t tail = 0;
};

struct SynthResult {
  std::vector<BaseTriple> base;
  std::vector<bool> kept;     // per base triple: present in KG
  std::vector<bool> holdout;  // per base triple: in neither training graph
  std::vector<std::size_t> permutation;  // KG entity i is KG* entity permutation[i]
  std::size_t seed_pairs = 0;
  std::size_t kept_count() const;
};

// Base graph has max(entity_count - 1, round(entity_count * mean_degree / 2))
// distinct triples, no self-loops, and every entity touched by at least one triple.
SynthResult generate(const SynthSpec& spec);

// Writes triples_kg.tsv, triples_kgstar.tsv, kgc_{train,valid,test}_<kg>.tsv,
// alignment_kg_kgstar.tsv and seeds_kg_kgstar.tsv into `dir`.
SynthResult write_synthetic(const SynthSpec& spec, const std::filesystem::path& dir);

}  // namespace jmac::synth
