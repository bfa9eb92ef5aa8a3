#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "jmac/diff.hpp"
#include "jmac/kgdata.hpp"

namespace jmac::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() / ("jmac_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Builds a MultiKg from triple text per KG; every KG's triples are its train split.
inline MultiKg build_multikg(const std::vector<std::pair<std::string, std::string>>& kgs) {
  MultiKg m;
  for (const auto& [id, text] : kgs) {
    auto parsed = parse_triples_text(text, id, m.relations);
    m.splits.push_back({parsed.kg.triples(), {}, {}});
    m.kgs.push_back(std::move(parsed.kg));
  }
  return m;
}

inline EntityId ent(const MultiKg& m, std::size_t kg, const std::string& label) {
  return EntityId{*m.kgs[kg].entities().find(label)};
}

inline RelationId rel(const MultiKg& m, const std::string& label) {
  return RelationId{*m.relations.find(label)};
}

inline diff::Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                                  double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  diff::Matrix m(r, c);
  for (double& x : m.data()) x = d(rng);
  return m;
}

}  // namespace jmac::testing
