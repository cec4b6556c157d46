#pragma once

// Relation-path mining over the augmented train graph and path-constraint
// resource allocation (PCRA) reliabilities.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <unordered_map>
#include <vector>

#include "ptransr/kgdata.hpp"

namespace ptransr {

// A relation sequence of length 1 or 2. Ordered lexicographically, so (r1)
// sorts before (r1, x).
class RelPath {
 public:
  static constexpr RelationId kNone = std::numeric_limits<RelationId>::max();

  RelPath() = default;
  static RelPath Single(RelationId r) { return RelPath(r, kNone); }
  static RelPath Pair(RelationId r1, RelationId r2) { return RelPath(r1, r2); }

  std::size_t length() const { return second_ == kNone ? 1 : 2; }
  RelationId first() const { return first_; }
  RelationId second() const { return second_; }
  RelationId operator[](std::size_t i) const { return i == 0 ? first_ : second_; }

  bool IsSingle(RelationId r) const { return second_ == kNone && first_ == r; }

  // Unique 64-bit key; preserves the lexicographic order.
  std::uint64_t key() const {
    return (static_cast<std::uint64_t>(first_) << 32) |
           static_cast<std::uint32_t>(second_ + 1u);
  }
  static RelPath FromKey(std::uint64_t key) {
    return RelPath(static_cast<RelationId>(key >> 32),
                   static_cast<RelationId>(static_cast<std::uint32_t>(key) - 1u));
  }

  friend bool operator==(const RelPath&, const RelPath&) = default;
  friend auto operator<=>(const RelPath& a, const RelPath& b) { return a.key() <=> b.key(); }

 private:
  RelPath(RelationId a, RelationId b) : first_(a), second_(b) {}
  RelationId first_ = 0;
  RelationId second_ = kNone;
};

struct PathWitness {
  RelPath path;
  std::size_t witnesses = 0;
};

struct PathResource {
  RelPath path;
  double resource = 0.0;  // v(p|h,t)

  friend bool operator==(const PathResource&, const PathResource&) = default;
};

struct TargetResource {
  EntityId target = 0;
  double resource = 0.0;
};

// Every distinct relation sequence of length <= 2 walking from h to t, with
// the number of distinct entity walks realizing it. Sorted by path.
std::vector<PathWitness> EnumeratePaths(const KnowledgeGraph& g, EntityId h, EntityId t);

// Resource held by every entity after following `path` from h with unit
// initial resource, split evenly over distinct children at each hop. Sorted
// by target; entities receiving nothing are omitted.
std::vector<TargetResource> PropagateResource(const KnowledgeGraph& g, EntityId h,
                                              const RelPath& path);

// v(p|h,t). Throws when no walk realizes `path` from h to t.
double PcraResource(const KnowledgeGraph& g, EntityId h, const RelPath& path, EntityId t);

struct PathTableOptions {
  double reliability_floor = 0.01;
  std::size_t max_paths_per_pair = 200;
  std::size_t workers = 1;
};

struct PathTableSummary {
  std::size_t pairs = 0;            // train pairs visited
  std::size_t candidate_paths = 0;  // witnessed entries before the reliability filter
  std::size_t kept_paths = 0;
  std::size_t capped_pairs = 0;
};

struct PairPaths {
  EntityId h = 0;
  EntityId t = 0;
  std::vector<PathResource> paths;  // sorted by path

  friend bool operator==(const PairPaths&, const PairPaths&) = default;
};

struct RelatednessEntry {
  RelationId r = 0;
  RelPath path;
  double value = 0.0;  // P_r(r|p)

  friend bool operator==(const RelatednessEntry&, const RelatednessEntry&) = default;
};

struct SupportEntry {
  RelPath path;
  double value = 0.0;  // P_r(p)

  friend bool operator==(const SupportEntry&, const SupportEntry&) = default;
};

class PathTable {
 public:
  PathTable() = default;
  PathTable(double reliability_floor, std::size_t cap, std::vector<PairPaths> pairs,
            std::vector<RelatednessEntry> relatedness, std::vector<SupportEntry> support);

  // Stored paths for the ordered pair; empty when the pair is absent.
  std::span<const PathResource> Paths(EntityId h, EntityId t) const;

  double Relatedness(RelationId r, const RelPath& p) const;
  double Support(const RelPath& p) const;
  // R(p|h,r,t) = P_r(r|p) * v(p|h,t).
  double Reliability(RelationId r, const PathResource& entry) const {
    return Relatedness(r, entry.path) * entry.resource;
  }

  double reliability_floor() const { return reliability_floor_; }
  std::size_t cap() const { return cap_; }
  bool empty() const { return pairs_.empty(); }
  std::size_t num_pairs() const { return pairs_.size(); }
  std::size_t num_entries() const;

  std::span<const PairPaths> pairs() const { return pairs_; }
  std::span<const RelatednessEntry> relatedness_entries() const { return relatedness_; }
  std::span<const SupportEntry> support_entries() const { return support_; }

  void Save(const std::filesystem::path& path) const;
  static PathTable Load(const std::filesystem::path& path);
  void Write(std::ostream& out) const;
  static PathTable Read(std::istream& in);

  // h<TAB>t<TAB>r1[,r2]<TAB>v, sorted by (h, t, path).
  void WriteTsv(std::ostream& out) const;

  friend bool operator==(const PathTable& a, const PathTable& b);

 private:
  void BuildLookup();

  double reliability_floor_ = 0.0;
  std::size_t cap_ = 0;
  std::vector<PairPaths> pairs_;               // sorted by (h, t)
  std::vector<RelatednessEntry> relatedness_;  // sorted by (path, r)
  std::vector<SupportEntry> support_;          // sorted by path
  std::unordered_map<std::uint64_t, std::size_t> pair_index_;
  std::unordered_map<std::uint64_t, std::size_t> support_index_;
  // path key -> first index of its run in relatedness_
  std::unordered_map<std::uint64_t, std::size_t> relatedness_index_;
};

// Global P_r(r, p) / P_r(p) accumulator over (relation, path, resource)
// observations.
class RelatednessAccumulator {
 public:
  void Add(RelationId r, const RelPath& p, double resource);
  double Relatedness(RelationId r, const RelPath& p) const;
  double Support(const RelPath& p) const;

  std::vector<RelatednessEntry> SortedRelatedness() const;
  std::vector<SupportEntry> SortedSupport() const;

 private:
  struct JointKey {
    std::uint64_t path;
    RelationId r;
    friend bool operator==(const JointKey&, const JointKey&) = default;
  };
  struct JointHash {
    std::size_t operator()(const JointKey& k) const {
      return std::hash<std::uint64_t>{}(k.path * 0x9E3779B97F4A7C15ull ^ k.r);
    }
  };
  std::unordered_map<JointKey, double, JointHash> joint_;
  std::unordered_map<std::uint64_t, double> marginal_;
};

// For every ordered pair linked by an augmented train triple, stores each
// length-1/2 path with its PCRA resource, keeping entries whose reliability
// exceeds the floor for at least one relation linking the pair (the pair's
// own edge r is never a path for r).
PathTable BuildPathTable(const KnowledgeGraph& g, const PathTableOptions& options,
                         PathTableSummary* summary = nullptr);

}  // namespace ptransr
