#pragma once

// Triple storage, vocabularies and adjacency for knowledge-base datasets.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ptransr {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct Triple {
  EntityId h = 0;
  RelationId r = 0;
  EntityId t = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Orders by (r, t, h); used for head-side lookups.
struct TailMajorLess {
  bool operator()(const Triple& a, const Triple& b) const {
    if (a.r != b.r) return a.r < b.r;
    if (a.t != b.t) return a.t < b.t;
    return a.h < b.h;
  }
};

enum class ColumnOrder { kHRT, kHTR };

class Vocab {
 public:
  EntityId InternEntity(std::string_view name);
  RelationId InternRelation(std::string_view name);

  std::optional<EntityId> FindEntity(std::string_view name) const;
  std::optional<RelationId> FindRelation(std::string_view name) const;

  const std::string& EntityName(EntityId id) const { return entity_names_.at(id); }
  const std::string& RelationName(RelationId id) const { return relation_names_.at(id); }

  std::size_t num_entities() const { return entity_names_.size(); }
  // Includes inverse relations once augmented.
  std::size_t num_relations() const { return relation_names_.size(); }
  std::size_t num_base_relations() const {
    return augmented_ ? relation_names_.size() / 2 : relation_names_.size();
  }
  bool augmented() const { return augmented_; }

  // Appends r^-1 for every base relation: inverse_of(r) = r + |R_orig|.
  void AddInverseRelations();
  RelationId InverseOf(RelationId r) const;

  void WriteEntityTsv(const std::filesystem::path& path) const;
  void WriteRelationTsv(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, RelationId> relation_index_;
  bool augmented_ = false;
};

struct Edge {
  RelationId r = 0;
  EntityId t = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class Split { kTrain, kValid, kTest };

// Immutable once built; all accessors are safe for concurrent readers.
class KnowledgeGraph {
 public:
  KnowledgeGraph(Vocab vocab, std::vector<Triple> train, std::vector<Triple> valid,
                 std::vector<Triple> test);

  const Vocab& vocab() const { return vocab_; }
  std::size_t num_entities() const { return vocab_.num_entities(); }
  std::size_t num_relations() const { return vocab_.num_relations(); }
  bool augmented() const { return vocab_.augmented(); }

  // When augmented, train() holds the original triples followed by their
  // inverses in the same order.
  std::span<const Triple> train() const { return train_; }
  std::span<const Triple> valid() const { return valid_; }
  std::span<const Triple> test() const { return test_; }
  std::span<const Triple> split(Split s) const;
  std::span<const Triple> base_train() const {
    return std::span<const Triple>(train_).first(num_base_train_);
  }

  // Sorted (relation, tail) list, one entry per train triple.
  std::span<const Edge> OutEdges(EntityId e) const;
  std::span<const Edge> OutEdges(EntityId e, RelationId r) const;

  // Distinct train triples sorted by (h, r, t).
  std::span<const Triple> unique_train() const { return train_sorted_; }

  bool IsTrain(const Triple& x) const;
  bool IsKnown(const Triple& x) const;

  // Known-true triples (train ∪ valid ∪ test) sharing (h, r), sorted by tail.
  std::span<const Triple> KnownWithHead(EntityId h, RelationId r) const;
  // Known-true triples sharing (r, t), sorted by head.
  std::span<const Triple> KnownWithTail(RelationId r, EntityId t) const;

  friend KnowledgeGraph AugmentInverse(const KnowledgeGraph& g);

 private:
  void BuildIndexes();

  Vocab vocab_;
  std::vector<Triple> train_, valid_, test_;
  std::size_t num_base_train_ = 0;
  std::vector<std::size_t> out_offsets_;
  std::vector<Edge> out_edges_;
  std::vector<Triple> train_sorted_;
  std::vector<Triple> known_hrt_;
  std::vector<Triple> known_rth_;
};

struct DatasetPaths {
  std::filesystem::path train, valid, test;
};

// Reads three TSV files into one graph sharing a vocabulary built over all
// splits in order of first appearance (train, then valid, then test).
KnowledgeGraph LoadDataset(const DatasetPaths& paths, ColumnOrder order = ColumnOrder::kHRT);

// Resolves train/valid/test files inside a dataset directory. Accepts
// train.txt/valid.txt/test.txt or the *-train.txt naming of the FB15k dump.
DatasetPaths ResolveDatasetDir(const std::filesystem::path& dir);

// Adds (t, r^-1, h) for every train triple. Throws if already augmented.
KnowledgeGraph AugmentInverse(const KnowledgeGraph& g);

enum class RelationCategory { kOneToOne, kOneToMany, kManyToOne, kManyToMany };

std::string_view CategoryName(RelationCategory c);

struct RelationStats {
  RelationCategory category = RelationCategory::kOneToOne;
  double heads_per_tail = 0.0;  // hpt
  double tails_per_head = 0.0;  // tph
  std::size_t support = 0;
};

struct CategoryTable {
  // Indexed by base relation id; empty when the relation has no train triple.
  std::vector<std::optional<RelationStats>> by_relation;
  std::vector<RelationId> missing;
};

RelationCategory CategoryFor(double heads_per_tail, double tails_per_head, double cutoff);

// Computed over distinct original (non-inverse) train triples.
CategoryTable ClassifyRelations(const KnowledgeGraph& g, double cutoff = 1.5);

enum class FrequencyBucket { k1To3, k4To15, k16To50, k51To300, kOver300 };

inline constexpr std::size_t kNumFrequencyBuckets = 5;

FrequencyBucket BucketForCount(std::size_t count);
std::string_view BucketName(FrequencyBucket b);

// Number of original train lines per base relation (duplicates included).
std::vector<std::size_t> RelationFrequencies(const KnowledgeGraph& g);

struct DatasetSummary {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t train = 0, valid = 0, test = 0;
};

DatasetSummary Summarize(const KnowledgeGraph& g);

}  // namespace ptransr
