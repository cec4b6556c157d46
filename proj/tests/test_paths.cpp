#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "ptransr/paths.hpp"
#include "testing.hpp"

using namespace ptransr;
using testing::MakeGraph;

namespace {

// Independent adjacency built straight from the augmented train list.
struct Oracle {
  std::map<std::pair<EntityId, RelationId>, std::set<EntityId>> children;
  std::size_t relations = 0;

  explicit Oracle(const KnowledgeGraph& g) : relations(g.num_relations()) {
    for (const Triple& x : g.train()) children[{x.h, x.r}].insert(x.t);
  }

  const std::set<EntityId>& Children(EntityId e, RelationId r) const {
    static const std::set<EntityId> none;
    const auto it = children.find({e, r});
    return it == children.end() ? none : it->second;
  }

  // Sum over walks of the product of 1 / (number of distinct r_i-children).
  double Resource(EntityId h, const std::vector<RelationId>& path, EntityId t,
                  std::size_t hop = 0) const {
    if (hop == path.size()) return h == t ? 1.0 : 0.0;
    const auto& kids = Children(h, path[hop]);
    double total = 0.0;
    for (EntityId c : kids) total += Resource(c, path, t, hop + 1) / static_cast<double>(kids.size());
    return total;
  }

  std::map<std::vector<RelationId>, std::size_t> Paths(EntityId h, EntityId t) const {
    std::map<std::vector<RelationId>, std::size_t> out;
    for (RelationId r1 = 0; r1 < relations; ++r1) {
      const auto& mid = Children(h, r1);
      if (mid.count(t)) out[{r1}] = 1;
      for (EntityId m : mid) {
        for (RelationId r2 = 0; r2 < relations; ++r2) {
          if (Children(m, r2).count(t)) ++out[{r1, r2}];
        }
      }
    }
    return out;
  }
};

std::vector<RelationId> Rels(const RelPath& p) {
  std::vector<RelationId> v{p.first()};
  if (p.length() == 2) v.push_back(p.second());
  return v;
}

RelPath FromRels(const std::vector<RelationId>& v) {
  return v.size() == 1 ? RelPath::Single(v[0]) : RelPath::Pair(v[0], v[1]);
}

// P(r|p) aggregated over distinct augmented train triples, skipping each
// triple's own single edge.
std::map<std::pair<RelationId, std::vector<RelationId>>, double> OracleRelatedness(
    const KnowledgeGraph& g, const Oracle& o) {
  std::map<std::pair<RelationId, std::vector<RelationId>>, double> joint;
  std::map<std::vector<RelationId>, double> marginal;
  const std::set<Triple> distinct(g.train().begin(), g.train().end());
  for (const Triple& x : distinct) {
    for (const auto& [path, count] : o.Paths(x.h, x.t)) {
      if (path.size() == 1 && path[0] == x.r) continue;
      const double v = o.Resource(x.h, path, x.t);
      joint[{x.r, path}] += v;
      marginal[path] += v;
    }
  }
  for (auto& [key, value] : joint) value /= marginal[key.second];
  return joint;
}

std::string Bytes(const PathTable& table) {
  std::ostringstream out;
  table.Write(out);
  return out.str();
}

}  // namespace

TEST_CASE("enumerate: single edge") {
  const KnowledgeGraph g = MakeGraph({{"a", "r1", "b"}});
  const auto paths = EnumeratePaths(g, 0, 1);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].path == RelPath::Single(0));
  CHECK(paths[0].witnesses == 1);
}

TEST_CASE("enumerate: two-hop chain") {
  const KnowledgeGraph g = MakeGraph({{"a", "r1", "b"}, {"b", "r2", "c"}});
  const auto paths = EnumeratePaths(g, 0, 2);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].path == RelPath::Pair(0, 1));
}

TEST_CASE("enumerate: two witnesses for one path") {
  const KnowledgeGraph g =
      MakeGraph({{"a", "r1", "b"}, {"a", "r1", "c"}, {"b", "r2", "d"}, {"c", "r2", "d"}});
  const auto d = *g.vocab().FindEntity("d");
  const auto paths = EnumeratePaths(g, 0, d);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].path == RelPath::Pair(0, 1));
  CHECK(paths[0].witnesses == 2);
}

TEST_CASE("pcra: hand examples") {
  const KnowledgeGraph one = MakeGraph({{"a", "r1", "b"}});
  CHECK(PcraResource(one, 0, RelPath::Single(0), 1) == 1.0);

  const KnowledgeGraph split = MakeGraph({{"a", "r1", "b"}, {"a", "r1", "c"}});
  CHECK(PcraResource(split, 0, RelPath::Single(0), 1) == 0.5);

  const KnowledgeGraph diamond =
      MakeGraph({{"a", "r1", "b"}, {"a", "r1", "c"}, {"b", "r2", "d"}, {"c", "r2", "d"}});
  CHECK(PcraResource(diamond, 0, RelPath::Pair(0, 1), 3) == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(PcraResource(one, 1, RelPath::Single(0), 0), Error);
}

TEST_CASE("pcra: duplicate train lines do not change the split") {
  const KnowledgeGraph g = MakeGraph({{"a", "r", "b"}, {"a", "r", "b"}, {"a", "r", "c"}});
  CHECK(PcraResource(g, 0, RelPath::Single(0), 1) == 0.5);
}

TEST_CASE("pcra and enumeration agree with the walk oracle on random graphs") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t ne = 2 + rng() % 7, nr = 1 + rng() % 4;
    const KnowledgeGraph g = testing::RandomGraph(rng, ne, nr, 1 + rng() % 20);
    const Oracle o(g);
    for (EntityId h = 0; h < ne; ++h) {
      for (EntityId t = 0; t < ne; ++t) {
        const auto expected = o.Paths(h, t);
        const auto got = EnumeratePaths(g, h, t);
        REQUIRE(got.size() == expected.size());
        std::size_t i = 0;
        for (const auto& [rels, count] : expected) {
          CHECK(Rels(got[i].path) == rels);
          CHECK(got[i].witnesses == count);
          CHECK(std::abs(PcraResource(g, h, got[i].path, t) - o.Resource(h, rels, t)) <= 1e-12);
          ++i;
        }
      }
    }
  }
}

TEST_CASE("propagation conserves resource when no frontier entity is a dead end") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t ne = 3 + rng() % 6, nr = 1 + rng() % 3;
    Vocab vocab;
    for (std::size_t i = 0; i < ne; ++i) vocab.InternEntity("e" + std::to_string(i));
    for (std::size_t i = 0; i < nr; ++i) vocab.InternRelation("r" + std::to_string(i));
    std::vector<Triple> train;
    for (EntityId e = 0; e < ne; ++e) {
      for (RelationId r = 0; r < nr; ++r) {
        train.push_back({e, r, static_cast<EntityId>(rng() % ne)});
        train.push_back({static_cast<EntityId>(rng() % ne), r, e});
      }
    }
    const KnowledgeGraph g = AugmentInverse(KnowledgeGraph(vocab, train, {}, {}));
    for (EntityId h = 0; h < ne; ++h) {
      for (RelationId r1 = 0; r1 < g.num_relations(); ++r1) {
        for (RelationId r2 = 0; r2 < g.num_relations(); ++r2) {
          double total = 0.0;
          for (const auto& tr : PropagateResource(g, h, RelPath::Pair(r1, r2))) total += tr.resource;
          CHECK(std::abs(total - 1.0) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("table: lone triple has no paths") {
  const KnowledgeGraph g = MakeGraph({{"a", "r", "b"}});
  const PathTable table = BuildPathTable(g, {});
  CHECK(table.Paths(0, 1).empty());
  CHECK(table.empty());
}

TEST_CASE("table: composed chain gives reliability one") {
  const KnowledgeGraph g = MakeGraph({{"a", "r1", "b"}, {"b", "r2", "c"}, {"a", "r3", "c"}});
  const PathTable table = BuildPathTable(g, {});
  const auto paths = table.Paths(0, 2);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].path == RelPath::Pair(0, 1));
  CHECK(paths[0].resource == 1.0);
  CHECK(table.Relatedness(2, paths[0].path) == 1.0);
  CHECK(table.Reliability(2, paths[0]) == 1.0);
}

TEST_CASE("table: relatedness splits resource between two pairs") {
  // a -r1-> b -r2-> c with a -r-> c; d -r1-> e -r2-> f with d -s-> f.
  const KnowledgeGraph g = MakeGraph({{"a", "r1", "b"},
                                      {"b", "r2", "c"},
                                      {"a", "r", "c"},
                                      {"d", "r1", "e"},
                                      {"e", "r2", "f"},
                                      {"d", "s", "f"}});
  const PathTable table = BuildPathTable(g, {});
  const RelPath p = RelPath::Pair(0, 1);
  const double v1 = table.Paths(0, 2)[0].resource;
  const double v2 = table.Paths(3, 5)[0].resource;
  CHECK(table.Relatedness(2, p) == doctest::Approx(v1 / (v1 + v2)));
  CHECK(table.Relatedness(2, p) == doctest::Approx(0.5));
  CHECK(table.Support(p) == doctest::Approx(v1 + v2));
}

TEST_CASE("table: entries match the aggregation oracle on random graphs") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t ne = 3 + rng() % 6, nr = 1 + rng() % 3;
    const KnowledgeGraph g = testing::RandomGraph(rng, ne, nr, 5 + rng() % 20);
    PathTableOptions options;
    options.reliability_floor = 0.0;
    options.max_paths_per_pair = 1000;
    const PathTable table = BuildPathTable(g, options);
    const Oracle o(g);
    const auto related = OracleRelatedness(g, o);

    std::set<std::pair<EntityId, EntityId>> linked;
    for (const Triple& x : g.train()) linked.insert({x.h, x.t});
    for (const auto& [h, t] : linked) {
      // Every witnessed path except those that are only the pair's own edge.
      std::set<RelationId> direct;
      for (const Triple& x : g.train()) {
        if (x.h == h && x.t == t) direct.insert(x.r);
      }
      std::map<std::vector<RelationId>, double> expected;
      for (const auto& [rels, count] : o.Paths(h, t)) {
        const bool only_self = rels.size() == 1 && direct.size() == 1 && direct.count(rels[0]);
        if (!only_self) expected[rels] = o.Resource(h, rels, t);
      }
      const auto stored = table.Paths(h, t);
      REQUIRE(stored.size() == expected.size());
      std::size_t i = 0;
      for (const auto& [rels, v] : expected) {
        CHECK(Rels(stored[i].path) == rels);
        CHECK(std::abs(stored[i].resource - v) <= 1e-12);
        CHECK(stored[i].resource > 0.0);
        CHECK(stored[i].resource <= 1.0);
        ++i;
      }
    }
    std::map<std::vector<RelationId>, double> per_path;
    for (const auto& [key, value] : related) {
      CHECK(std::abs(table.Relatedness(key.first, FromRels(key.second)) - value) <= 1e-12);
      CHECK(value >= 0.0);
      CHECK(value <= 1.0 + 1e-12);
      per_path[key.second] += value;
    }
    for (const auto& [path, sum] : per_path) CHECK(sum <= 1.0 + 1e-12);
  }
}

TEST_CASE("table: relatedness is monotone in added supporting triples") {
  std::mt19937_64 rng(77);
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 40; ++trial) {
    const std::size_t ne = 5 + rng() % 4, nr = 3;
    const KnowledgeGraph base = testing::RandomGraph(rng, ne, nr, 12, false);
    const KnowledgeGraph g = AugmentInverse(base);
    // Use relation 2 as the new direct relation and a path over relations 0/1
    // (and their inverses) that is not its own reverse.
    const Oracle o(g);
    for (EntityId h = 0; h < ne && checked < 40; ++h) {
      for (EntityId t = 0; t < ne; ++t) {
        for (const auto& [rels, count] : o.Paths(h, t)) {
          if (rels.size() != 2) continue;
          const auto& v = g.vocab();
          if (rels[0] % nr == 2 || rels[1] % nr == 2) continue;
          if (v.InverseOf(rels[1]) == rels[0]) continue;
          const RelPath p = FromRels(rels);
          PathTableOptions options;
          options.reliability_floor = 0.0;
          options.max_paths_per_pair = 1000;
          const double before = BuildPathTable(g, options).Relatedness(2, p);
          std::vector<Triple> train(base.train().begin(), base.train().end());
          train.push_back({h, 2, t});
          const KnowledgeGraph bigger =
              AugmentInverse(KnowledgeGraph(base.vocab(), train, {}, {}));
          const double after = BuildPathTable(bigger, options).Relatedness(2, p);
          CHECK(after >= before - 1e-15);
          ++checked;
          break;
        }
      }
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("table: floor boundaries") {
  std::mt19937_64 rng(5);
  const KnowledgeGraph g = testing::RandomGraph(rng, 8, 3, 30);
  PathTableOptions options;
  options.reliability_floor = 1.0;
  CHECK(BuildPathTable(g, options).empty());

  options.reliability_floor = -0.1;
  CHECK_THROWS_AS(BuildPathTable(g, options), ConfigError);
  options.reliability_floor = 1.5;
  CHECK_THROWS_AS(BuildPathTable(g, options), ConfigError);
  options.reliability_floor = 0.01;
  options.max_paths_per_pair = 0;
  CHECK_THROWS_AS(BuildPathTable(g, options), ConfigError);
}

TEST_CASE("table: floor keeps entries above the threshold for some linking relation") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const KnowledgeGraph g = testing::RandomGraph(rng, 8, 3, 25);
    PathTableOptions all;
    all.reliability_floor = 0.0;
    all.max_paths_per_pair = 1000;
    PathTableOptions filtered = all;
    filtered.reliability_floor = 0.3;
    const PathTable full = BuildPathTable(g, all);
    const PathTable kept = BuildPathTable(g, filtered);
    for (const PairPaths& pair : full.pairs()) {
      std::set<RelationId> direct;
      for (const Triple& x : g.train()) {
        if (x.h == pair.h && x.t == pair.t) direct.insert(x.r);
      }
      const auto survivors = kept.Paths(pair.h, pair.t);
      for (const PathResource& e : pair.paths) {
        bool passes = false;
        for (RelationId r : direct) {
          if (!e.path.IsSingle(r) && full.Relatedness(r, e.path) * e.resource > 0.3) passes = true;
        }
        const bool present = std::any_of(survivors.begin(), survivors.end(),
                                         [&](const PathResource& s) { return s.path == e.path; });
        CHECK(present == passes);
      }
    }
  }
}

TEST_CASE("table: cap keeps the highest-resource paths") {
  // Hub: a reaches d through many distinct relations.
  testing::Rows rows;
  for (int i = 0; i < 6; ++i) {
    rows.push_back({"a", "r" + std::to_string(i), "m" + std::to_string(i)});
    rows.push_back({"m" + std::to_string(i), "s", "d"});
  }
  rows.push_back({"a", "x", "m0"});
  rows.push_back({"a", "direct", "d"});
  const KnowledgeGraph g = MakeGraph(rows);
  PathTableOptions options;
  options.reliability_floor = 0.0;
  options.max_paths_per_pair = 1000;
  const PathTable full = BuildPathTable(g, options);
  options.max_paths_per_pair = 3;
  PathTableSummary summary;
  const PathTable capped = BuildPathTable(g, options, &summary);
  CHECK(capped.cap() == 3);
  CHECK(summary.capped_pairs >= 1);
  const EntityId a = 0, d = *g.vocab().FindEntity("d");
  const auto all = full.Paths(a, d);
  const auto few = capped.Paths(a, d);
  REQUIRE(all.size() > 3);
  REQUIRE(few.size() == 3);
  std::vector<double> resources;
  for (const auto& e : all) resources.push_back(e.resource);
  std::sort(resources.rbegin(), resources.rend());
  for (const auto& e : few) CHECK(e.resource >= resources[2]);
  for (const PairPaths& pair : capped.pairs()) CHECK(pair.paths.size() <= 3);
}

TEST_CASE("table: deterministic bytes, worker-count independent, round trip") {
  std::mt19937_64 rng(21);
  const KnowledgeGraph g = testing::RandomGraph(rng, 30, 4, 120);
  PathTableOptions options;
  const PathTable a = BuildPathTable(g, options);
  const PathTable b = BuildPathTable(g, options);
  options.workers = 3;
  const PathTable c = BuildPathTable(g, options);
  CHECK(Bytes(a) == Bytes(b));
  CHECK(Bytes(a) == Bytes(c));
  CHECK(!a.empty());

  std::stringstream io;
  a.Write(io);
  const PathTable back = PathTable::Read(io);
  CHECK(back == a);
  CHECK(Bytes(back) == Bytes(a));

  std::istringstream bad("XXXX");
  CHECK_THROWS_AS(PathTable::Read(bad), Error);
}

TEST_CASE("table: TSV dump is sorted and complete") {
  const KnowledgeGraph g = MakeGraph({{"a", "r1", "b"}, {"b", "r2", "c"}, {"a", "r3", "c"}});
  const PathTable table = BuildPathTable(g, {});
  std::ostringstream out;
  table.WriteTsv(out);
  const std::string text = out.str();
  CHECK(text.find("0\t2\t0,1\t1\n") != std::string::npos);
  std::istringstream in(text);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == table.num_entries());
}

TEST_CASE("relpath ordering and keys") {
  CHECK(RelPath::Single(1) < RelPath::Pair(1, 0));
  CHECK(RelPath::Pair(0, 9) < RelPath::Single(1));
  CHECK(RelPath::FromKey(RelPath::Pair(3, 4).key()) == RelPath::Pair(3, 4));
  CHECK(RelPath::FromKey(RelPath::Single(7).key()) == RelPath::Single(7));
  CHECK(RelPath::Single(2).IsSingle(2));
  CHECK_FALSE(RelPath::Pair(2, 2).IsSingle(2));
}
