#include "ptransr/paths.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "ptransr/binary_io.hpp"
#include "ptransr/parallel.hpp"

namespace ptransr {

namespace {

constexpr std::uint32_t kPathTableVersion = 1;

// Calls fn(relation, children) for each relation group of e's out-edges with
// duplicate edges collapsed.
template <typename Fn>
void ForEachRelationGroup(const KnowledgeGraph& g, EntityId e, std::vector<EntityId>& scratch,
                          Fn&& fn) {
  const auto edges = g.OutEdges(e);
  std::size_t i = 0;
  while (i < edges.size()) {
    const RelationId r = edges[i].r;
    scratch.clear();
    for (; i < edges.size() && edges[i].r == r; ++i) {
      if (scratch.empty() || scratch.back() != edges[i].t) scratch.push_back(edges[i].t);
    }
    fn(r, std::span<const EntityId>(scratch));
  }
}

std::vector<EntityId> DistinctChildren(const KnowledgeGraph& g, EntityId e, RelationId r) {
  std::vector<EntityId> out;
  for (const Edge& edge : g.OutEdges(e, r)) {
    if (out.empty() || out.back() != edge.t) out.push_back(edge.t);
  }
  return out;
}

std::uint64_t PairKey(EntityId h, EntityId t) {
  return (static_cast<std::uint64_t>(h) << 32) | t;
}

}  // namespace

std::vector<PathWitness> EnumeratePaths(const KnowledgeGraph& g, EntityId h, EntityId t) {
  std::map<RelPath, std::size_t> counts;
  std::vector<EntityId> first_hop, second_hop;
  ForEachRelationGroup(g, h, first_hop, [&](RelationId r1, std::span<const EntityId> mids) {
    for (const EntityId mid : mids) {
      if (mid == t) ++counts[RelPath::Single(r1)];
      ForEachRelationGroup(g, mid, second_hop,
                           [&](RelationId r2, std::span<const EntityId> ends) {
                             if (std::binary_search(ends.begin(), ends.end(), t)) {
                               ++counts[RelPath::Pair(r1, r2)];
                             }
                           });
    }
  });
  std::vector<PathWitness> out;
  out.reserve(counts.size());
  for (const auto& [path, n] : counts) out.push_back({path, n});
  return out;
}

std::vector<TargetResource> PropagateResource(const KnowledgeGraph& g, EntityId h,
                                              const RelPath& path) {
  std::map<EntityId, double> frontier{{h, 1.0}};
  for (std::size_t hop = 0; hop < path.length(); ++hop) {
    std::map<EntityId, double> next;
    for (const auto& [e, held] : frontier) {
      const auto children = DistinctChildren(g, e, path[hop]);
      if (children.empty()) continue;
      const double share = held / static_cast<double>(children.size());
      for (const EntityId c : children) next[c] += share;
    }
    frontier = std::move(next);
  }
  std::vector<TargetResource> out;
  out.reserve(frontier.size());
  for (const auto& [e, v] : frontier) out.push_back({e, v});
  return out;
}

double PcraResource(const KnowledgeGraph& g, EntityId h, const RelPath& path, EntityId t) {
  for (const auto& tr : PropagateResource(g, h, path)) {
    if (tr.target == t) return tr.resource;
  }
  throw Error("no walk realizes the path from " + std::to_string(h) + " to " + std::to_string(t));
}

void RelatednessAccumulator::Add(RelationId r, const RelPath& p, double resource) {
  joint_[JointKey{p.key(), r}] += resource;
  marginal_[p.key()] += resource;
}

double RelatednessAccumulator::Relatedness(RelationId r, const RelPath& p) const {
  const auto m = marginal_.find(p.key());
  if (m == marginal_.end() || m->second <= 0.0) return 0.0;
  const auto j = joint_.find(JointKey{p.key(), r});
  if (j == joint_.end()) return 0.0;
  return j->second / m->second;
}

double RelatednessAccumulator::Support(const RelPath& p) const {
  const auto m = marginal_.find(p.key());
  return m == marginal_.end() ? 0.0 : m->second;
}

std::vector<RelatednessEntry> RelatednessAccumulator::SortedRelatedness() const {
  std::vector<RelatednessEntry> out;
  out.reserve(joint_.size());
  for (const auto& [key, joint] : joint_) {
    const double marginal = marginal_.at(key.path);
    out.push_back({key.r, RelPath::FromKey(key.path), marginal > 0.0 ? joint / marginal : 0.0});
  }
  std::sort(out.begin(), out.end(), [](const RelatednessEntry& a, const RelatednessEntry& b) {
    if (a.path != b.path) return a.path < b.path;
    return a.r < b.r;
  });
  return out;
}

std::vector<SupportEntry> RelatednessAccumulator::SortedSupport() const {
  std::vector<SupportEntry> out;
  out.reserve(marginal_.size());
  for (const auto& [key, value] : marginal_) out.push_back({RelPath::FromKey(key), value});
  std::sort(out.begin(), out.end(),
            [](const SupportEntry& a, const SupportEntry& b) { return a.path < b.path; });
  return out;
}

PathTable::PathTable(double reliability_floor, std::size_t cap, std::vector<PairPaths> pairs,
                     std::vector<RelatednessEntry> relatedness, std::vector<SupportEntry> support)
    : reliability_floor_(reliability_floor),
      cap_(cap),
      pairs_(std::move(pairs)),
      relatedness_(std::move(relatedness)),
      support_(std::move(support)) {
  BuildLookup();
}

void PathTable::BuildLookup() {
  pair_index_.clear();
  support_index_.clear();
  relatedness_index_.clear();
  for (std::size_t i = 0; i < pairs_.size(); ++i) pair_index_[PairKey(pairs_[i].h, pairs_[i].t)] = i;
  for (std::size_t i = 0; i < support_.size(); ++i) support_index_[support_[i].path.key()] = i;
  for (std::size_t i = 0; i < relatedness_.size(); ++i) {
    relatedness_index_.try_emplace(relatedness_[i].path.key(), i);
  }
}

std::span<const PathResource> PathTable::Paths(EntityId h, EntityId t) const {
  const auto it = pair_index_.find(PairKey(h, t));
  if (it == pair_index_.end()) return {};
  return pairs_[it->second].paths;
}

double PathTable::Relatedness(RelationId r, const RelPath& p) const {
  const auto it = relatedness_index_.find(p.key());
  if (it == relatedness_index_.end()) return 0.0;
  for (std::size_t i = it->second; i < relatedness_.size() && relatedness_[i].path == p; ++i) {
    if (relatedness_[i].r == r) return relatedness_[i].value;
    if (relatedness_[i].r > r) break;
  }
  return 0.0;
}

double PathTable::Support(const RelPath& p) const {
  const auto it = support_index_.find(p.key());
  return it == support_index_.end() ? 0.0 : support_[it->second].value;
}

std::size_t PathTable::num_entries() const {
  std::size_t n = 0;
  for (const auto& pair : pairs_) n += pair.paths.size();
  return n;
}

bool operator==(const PathTable& a, const PathTable& b) {
  return a.reliability_floor_ == b.reliability_floor_ && a.cap_ == b.cap_ &&
         a.pairs_ == b.pairs_ && a.relatedness_ == b.relatedness_ && a.support_ == b.support_;
}

namespace {

void WritePath(std::ostream& out, const RelPath& p) {
  io::WriteU8(out, static_cast<std::uint8_t>(p.length()));
  io::WriteU32(out, p.first());
  io::WriteU32(out, p.second());
}

RelPath ReadPath(std::istream& in) {
  const auto len = io::ReadU8(in);
  const auto r1 = io::ReadU32(in);
  const auto r2 = io::ReadU32(in);
  if (len == 1 && r2 == RelPath::kNone) return RelPath::Single(r1);
  if (len == 2 && r2 != RelPath::kNone) return RelPath::Pair(r1, r2);
  throw Error("corrupt path record in path table");
}

}  // namespace

void PathTable::Write(std::ostream& out) const {
  io::WriteMagic(out, "PTBL");
  io::WriteU32(out, kPathTableVersion);
  io::WriteF64(out, reliability_floor_);
  io::WriteU32(out, static_cast<std::uint32_t>(cap_));
  io::WriteU64(out, pairs_.size());
  for (const auto& pair : pairs_) {
    io::WriteU32(out, pair.h);
    io::WriteU32(out, pair.t);
    io::WriteU32(out, static_cast<std::uint32_t>(pair.paths.size()));
    for (const auto& entry : pair.paths) {
      WritePath(out, entry.path);
      io::WriteF64(out, entry.resource);
    }
  }
  io::WriteU64(out, relatedness_.size());
  for (const auto& rel : relatedness_) {
    WritePath(out, rel.path);
    io::WriteU32(out, rel.r);
    io::WriteF64(out, rel.value);
  }
  io::WriteU64(out, support_.size());
  for (const auto& sup : support_) {
    WritePath(out, sup.path);
    io::WriteF64(out, sup.value);
  }
}

PathTable PathTable::Read(std::istream& in) {
  io::ExpectMagic(in, "PTBL");
  const auto version = io::ReadU32(in);
  if (version != kPathTableVersion) {
    throw Error("unsupported path table version " + std::to_string(version));
  }
  const double floor = io::ReadF64(in);
  const std::size_t cap = io::ReadU32(in);
  std::vector<PairPaths> pairs(io::ReadU64(in));
  for (auto& pair : pairs) {
    pair.h = io::ReadU32(in);
    pair.t = io::ReadU32(in);
    pair.paths.resize(io::ReadU32(in));
    for (auto& entry : pair.paths) {
      entry.path = ReadPath(in);
      entry.resource = io::ReadF64(in);
    }
  }
  std::vector<RelatednessEntry> relatedness(io::ReadU64(in));
  for (auto& rel : relatedness) {
    rel.path = ReadPath(in);
    rel.r = io::ReadU32(in);
    rel.value = io::ReadF64(in);
  }
  std::vector<SupportEntry> support(io::ReadU64(in));
  for (auto& sup : support) {
    sup.path = ReadPath(in);
    sup.value = io::ReadF64(in);
  }
  return PathTable(floor, cap, std::move(pairs), std::move(relatedness), std::move(support));
}

void PathTable::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  Write(out);
  if (!out) throw Error("write failed: " + path.string());
}

PathTable PathTable::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open path table " + path.string());
  return Read(in);
}

void PathTable::WriteTsv(std::ostream& out) const {
  char value[32];
  for (const auto& pair : pairs_) {
    for (const auto& entry : pair.paths) {
      std::snprintf(value, sizeof(value), "%.17g", entry.resource);
      out << pair.h << '\t' << pair.t << '\t' << entry.path.first();
      if (entry.path.length() == 2) out << ',' << entry.path.second();
      out << '\t' << value << '\n';
    }
  }
}

namespace {

struct HeadScratch {
  std::vector<std::int32_t> slot_of;  // entity -> target slot, -1 if not a train tail
  std::vector<EntityId> first_hop, second_hop;
  std::vector<std::vector<std::pair<std::uint64_t, double>>> hits;
};

// All length-1/2 paths from h to each of its train tails.
std::vector<PairPaths> PathsFromHead(const KnowledgeGraph& g, EntityId h, std::size_t cap,
                                     HeadScratch& s, std::size_t& capped) {
  std::vector<EntityId> targets;
  for (const Edge& e : g.OutEdges(h)) targets.push_back(e.t);
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  if (targets.empty()) return {};

  for (std::size_t i = 0; i < targets.size(); ++i) s.slot_of[targets[i]] = static_cast<std::int32_t>(i);
  s.hits.assign(targets.size(), {});

  ForEachRelationGroup(g, h, s.first_hop, [&](RelationId r1, std::span<const EntityId> mids) {
    const double share1 = 1.0 / static_cast<double>(mids.size());
    for (const EntityId mid : mids) {
      if (const auto slot = s.slot_of[mid]; slot >= 0) {
        s.hits[slot].emplace_back(RelPath::Single(r1).key(), share1);
      }
      ForEachRelationGroup(g, mid, s.second_hop,
                           [&](RelationId r2, std::span<const EntityId> ends) {
                             const double share2 = share1 / static_cast<double>(ends.size());
                             const auto key = RelPath::Pair(r1, r2).key();
                             for (const EntityId end : ends) {
                               if (const auto slot = s.slot_of[end]; slot >= 0) {
                                 s.hits[slot].emplace_back(key, share2);
                               }
                             }
                           });
    }
  });

  std::vector<PairPaths> out;
  out.reserve(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    auto& hits = s.hits[i];
    std::stable_sort(hits.begin(), hits.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    PairPaths pair{h, targets[i], {}};
    for (const auto& [key, v] : hits) {
      if (!pair.paths.empty() && pair.paths.back().path.key() == key) {
        pair.paths.back().resource += v;
      } else {
        pair.paths.push_back({RelPath::FromKey(key), v});
      }
    }
    if (pair.paths.size() > cap) {
      ++capped;
      std::stable_sort(pair.paths.begin(), pair.paths.end(),
                       [](const PathResource& a, const PathResource& b) {
                         return a.resource > b.resource;
                       });
      pair.paths.resize(cap);
      std::sort(pair.paths.begin(), pair.paths.end(),
                [](const PathResource& a, const PathResource& b) { return a.path < b.path; });
    }
    out.push_back(std::move(pair));
  }
  for (const EntityId t : targets) s.slot_of[t] = -1;
  return out;
}

}  // namespace

PathTable BuildPathTable(const KnowledgeGraph& g, const PathTableOptions& options,
                         PathTableSummary* summary) {
  if (!(options.reliability_floor >= 0.0 && options.reliability_floor <= 1.0)) {
    throw ConfigError("reliability floor must lie in [0, 1]");
  }
  if (options.max_paths_per_pair == 0) throw ConfigError("path cap must be at least 1");

  const std::size_t n = g.num_entities();
  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  std::vector<std::vector<PairPaths>> by_head(n);
  std::vector<std::size_t> capped(n, 0);
  std::vector<HeadScratch> scratch(workers);
  for (auto& s : scratch) s.slot_of.assign(n, -1);

  // Heads are striped over workers; worker w owns heads w, w+W, ...
  ParallelFor(workers, workers, [&](std::size_t w) {
    for (std::size_t h = w; h < n; h += workers) {
      by_head[h] = PathsFromHead(g, static_cast<EntityId>(h), options.max_paths_per_pair,
                                 scratch[w], capped[h]);
    }
  });

  std::vector<PairPaths> pairs;
  for (auto& head_pairs : by_head) {
    for (auto& pair : head_pairs) pairs.push_back(std::move(pair));
  }
  by_head.clear();

  std::unordered_map<std::uint64_t, std::size_t> index;
  index.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) index[PairKey(pairs[i].h, pairs[i].t)] = i;

  // Statistics over distinct train triples in (h, r, t) order.
  RelatednessAccumulator acc;
  std::vector<std::vector<RelationId>> links(pairs.size());
  for (const Triple& x : g.unique_train()) {
    const std::size_t i = index.at(PairKey(x.h, x.t));
    links[i].push_back(x.r);
    for (const auto& entry : pairs[i].paths) {
      if (entry.path.IsSingle(x.r)) continue;
      acc.Add(x.r, entry.path, entry.resource);
    }
  }

  PathTableSummary stats;
  stats.pairs = pairs.size();
  for (std::size_t c : capped) stats.capped_pairs += c;

  std::vector<PairPaths> kept;
  std::vector<std::uint64_t> kept_paths;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& pair = pairs[i];
    std::vector<PathResource> retained;
    for (const auto& entry : pair.paths) {
      bool reliable = false, witnessed = false;
      for (const RelationId r : links[i]) {
        if (entry.path.IsSingle(r)) continue;
        witnessed = true;
        // A zero floor disables filtering: any non-trivial witness keeps the entry.
        if (options.reliability_floor == 0.0 ||
            acc.Relatedness(r, entry.path) * entry.resource > options.reliability_floor) {
          reliable = true;
          break;
        }
      }
      stats.candidate_paths += witnessed;
      if (reliable) {
        retained.push_back(entry);
        kept_paths.push_back(entry.path.key());
      }
    }
    stats.kept_paths += retained.size();
    if (!retained.empty()) kept.push_back(PairPaths{pair.h, pair.t, std::move(retained)});
  }
  std::sort(kept_paths.begin(), kept_paths.end());
  kept_paths.erase(std::unique(kept_paths.begin(), kept_paths.end()), kept_paths.end());
  const auto is_kept = [&](const RelPath& p) {
    return std::binary_search(kept_paths.begin(), kept_paths.end(), p.key());
  };

  std::vector<RelatednessEntry> relatedness;
  for (auto& rel : acc.SortedRelatedness()) {
    if (is_kept(rel.path)) relatedness.push_back(rel);
  }
  std::vector<SupportEntry> support;
  for (auto& sup : acc.SortedSupport()) {
    if (is_kept(sup.path)) support.push_back(sup);
  }

  if (summary != nullptr) *summary = stats;
  return PathTable(options.reliability_floor, options.max_paths_per_pair, std::move(kept),
                   std::move(relatedness), std::move(support));
}

}  // namespace ptransr
