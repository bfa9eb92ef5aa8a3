// Entropy-budgeted alignment seed enlargement and cross-KG triple transfer.
#pragma once

#include <cstddef>
#include <stdexcept>

#include "jmac/diff.hpp"
#include "jmac/kgdata.hpp"

namespace jmac::entr {

using diff::Matrix;

class EntrError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EntropyState {
  double h_tilde = 0.0;    // matrix entropy before the first update
  double h_current = 0.0;  // entropy of the latest matrix
};

// Sum over rows of the Shannon entropy (natural log) of the row softmax.
double matrix_entropy(const Matrix& alignment);

// floor(beta * (H~ - H) / H~ * min(|E|, |E*|)), clamped at 0.
std::size_t seed_budget(double h_tilde, double h_current, double beta, std::size_t entity_count,
                        std::size_t target_entity_count);

// Keeps the given pairs of `existing`, drops its previously enlarged pairs,
// then adds up to q non-conflicting pairs in descending matrix order.
SeedSet enlarge_seeds(const Matrix& alignment, std::size_t q, const SeedSet& existing);

// Copies triples along the seed mapping in both directions, replacing the
// transfer group that this KG pair previously produced. Returns the number of
// triples that were not already present in the target KG's transferred set.
std::size_t transfer_triples(const SeedSet& seeds, MultiKg& multikg);

}  // namespace jmac::entr
