#pragma once

// Synthetic knowledge graphs whose implied relations are compositions of two
// base relations; a desk-scale stand-in for FB15k.
//
// Entities sit at hidden positions 0..n-1 (a seeded permutation of the names).
// The k-th base relation links position i to the `fanout` positions starting
// at i + 3 + 2k, so base relations are near-translations that an embedding
// can learn, and each implied relation is the exact composition of its inputs.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ptransr/kgdata.hpp"

namespace ptransr {

// first ∘ second implies `implied`.
struct CompositionRule {
  RelationId first = 0;
  RelationId second = 0;
  RelationId implied = 0;
};

// Parses "a,b:c".
CompositionRule ParseRule(const std::string& text);

struct SyntheticKGSpec {
  std::size_t n_entities = 50;
  std::size_t n_relations = 3;
  std::vector<CompositionRule> rules{{0, 1, 2}};
  double noise = 0.0;             // fraction of train facts that are random
  double holdout = 0.2;           // fraction of implied facts moved to test
  double valid_fraction = 0.05;   // fraction of implied facts moved to valid
  std::size_t fanout = 2;         // consecutive tails per (entity, base relation)
  std::uint64_t seed = 1;

  // Throws ConfigError on malformed or infeasible specs.
  void Validate() const;
};

using NamedTriple = std::array<std::string, 3>;

struct SyntheticKG {
  std::vector<NamedTriple> train, valid, test;
  std::size_t implied_facts = 0;  // before the split
  std::size_t noise_facts = 0;
};

SyntheticKG GenerateSyntheticKG(const SyntheticKGSpec& spec);

// Writes train.txt / valid.txt / test.txt (head<TAB>relation<TAB>tail).
void WriteDataset(const SyntheticKG& kg, const std::filesystem::path& dir);

}  // namespace ptransr
