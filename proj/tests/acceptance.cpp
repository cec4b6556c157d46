// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ptransr/cli.hpp"
#include "ptransr/evaluator.hpp"
#include "ptransr/model.hpp"
#include "ptransr/paths.hpp"
#include "ptransr/synth.hpp"
#include "ptransr/trainer.hpp"
#include "testing.hpp"

namespace fs = std::filesystem;
using namespace ptransr;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void Report(const char* id, const char* name, const std::function<Verdict()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%s %-5s %-38s %7.2fs  %s\n", v.pass ? "PASS" : "FAIL", id, name, secs,
              v.detail.c_str());
  std::fflush(stdout);
  failures += v.pass ? 0 : 1;
}

std::string Fmt(const char* format, double a = 0, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

std::vector<RelPath> AllPaths(std::size_t relations) {
  std::vector<RelPath> out;
  for (RelationId a = 0; a < relations; ++a) {
    out.push_back(RelPath::Single(a));
    for (RelationId b = 0; b < relations; ++b) out.push_back(RelPath::Pair(a, b));
  }
  return out;
}

// Sum over explicit entity walks of the product of 1 / (distinct r_i-children).
double WalkOracle(const std::map<std::pair<EntityId, RelationId>, std::set<EntityId>>& kids,
                  EntityId h, const RelPath& p, EntityId t) {
  const auto children = [&](EntityId e, RelationId r) {
    const auto it = kids.find({e, r});
    return it == kids.end() ? std::set<EntityId>{} : it->second;
  };
  double total = 0.0;
  const auto first = children(h, p.first());
  for (EntityId m : first) {
    const double w1 = 1.0 / static_cast<double>(first.size());
    if (p.length() == 1) {
      total += m == t ? w1 : 0.0;
      continue;
    }
    const auto second = children(m, p.second());
    if (second.count(t)) total += w1 / static_cast<double>(second.size());
  }
  return total;
}

Verdict PcraOracle() {
  std::mt19937_64 rng(1001);
  const auto start = std::chrono::steady_clock::now();
  std::size_t compared = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t ne = 2 + rng() % 7, nr = 1 + rng() % 4;
    const KnowledgeGraph g = testing::RandomGraph(rng, ne, nr, 1 + rng() % 20);
    std::map<std::pair<EntityId, RelationId>, std::set<EntityId>> kids;
    for (const Triple& x : g.train()) kids[{x.h, x.r}].insert(x.t);
    for (EntityId h = 0; h < ne; ++h) {
      for (const RelPath& p : AllPaths(g.num_relations())) {
        for (EntityId t = 0; t < ne; ++t) {
          const double want = WalkOracle(kids, h, p, t);
          if (want == 0.0) {
            bool threw = false;
            try {
              PcraResource(g, h, p, t);
            } catch (const Error&) {
              threw = true;
            }
            if (!threw) return {false, "resource reported for an unrealized path"};
            continue;
          }
          worst = std::max(worst, std::abs(PcraResource(g, h, p, t) - want));
          ++compared;
        }
      }
    }
  }
  const double secs = Seconds(start);
  return {worst <= 1e-12 && secs < 10.0,
          Fmt("%.0f (h,p,t) compared, max |diff| %.1e, %.2fs (limit 10s)", compared, worst, secs)};
}

Verdict Conservation() {
  std::mt19937_64 rng(1002);
  std::size_t checked = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t ne = 2 + rng() % 9, nr = 1 + rng() % 4;
    // A random permutation per relation gives every entity an outgoing edge
    // for each relation and its inverse; extra edges add branching.
    testing::Rows rows;
    for (std::size_t r = 0; r < nr; ++r) {
      std::vector<std::size_t> perm(ne);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      for (std::size_t i = 0; i < ne; ++i) {
        rows.push_back({"e" + std::to_string(i), "r" + std::to_string(r),
                        "e" + std::to_string(perm[i])});
      }
      for (std::size_t extra = rng() % (2 * ne); extra > 0; --extra) {
        rows.push_back({"e" + std::to_string(rng() % ne), "r" + std::to_string(r),
                        "e" + std::to_string(rng() % ne)});
      }
    }
    const KnowledgeGraph g = testing::MakeGraph(rows);
    for (EntityId h = 0; h < g.num_entities(); ++h) {
      for (const RelPath& p : AllPaths(g.num_relations())) {
        double sum = 0.0;
        for (const auto& tr : PropagateResource(g, h, p)) sum += tr.resource;
        worst = std::max(worst, std::abs(sum - 1.0));
        ++checked;
      }
    }
  }
  return {worst <= 1e-12, Fmt("%.0f (h,p) sums on 200 graphs, max |sum - 1| %.1e", checked, worst)};
}

std::vector<double> RandomVector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

template <typename F>
std::vector<double> CentralDifference(std::vector<double>& x, F f, double eps = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double up = f();
    x[i] = saved - eps;
    const double down = f();
    x[i] = saved;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

double NormRelativeError(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
}

Verdict Gradients() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1003);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  std::size_t instances = 0;
  const auto span = [](const std::vector<double>& v) { return std::span<const double>(v); };
  for (std::size_t dim : {5u, 20u}) {
    for (int trial = 0; trial < 100; ++trial) {
      // Triple energy ||M h + r - M t||^2.
      auto h = RandomVector(rng, dim), t = RandomVector(rng, dim), r = RandomVector(rng, dim);
      auto mat = RandomVector(rng, dim * dim);
      const TransRGradient g = TransREnergyGrad(span(mat), span(h), span(r), span(t));
      const auto f = [&] { return TransREnergy(span(mat), span(h), span(r), span(t)); };
      for (auto [analytic, x] : {std::pair{&g.h, &h}, {&g.t, &t}, {&g.r, &r}, {&g.matrix, &mat}}) {
        worst = std::max(worst, NormRelativeError(*analytic, CentralDifference(*x, f)));
      }
      // Path energy R ||r1 + r2 - r||^2.
      auto r1 = RandomVector(rng, dim), r2 = RandomVector(rng, dim);
      const double rel = unit(rng);
      const auto fp = [&] {
        return PathEnergyKernel(span(ComposePath(span(r1), span(r2))), span(r), rel);
      };
      const auto gp = PathEnergyGrad(span(ComposePath(span(r1), span(r2))), span(r), rel);
      std::vector<double> neg(gp.size());
      for (std::size_t i = 0; i < gp.size(); ++i) neg[i] = -gp[i];
      worst = std::max(worst, NormRelativeError(gp, CentralDifference(r1, fp)));
      worst = std::max(worst, NormRelativeError(gp, CentralDifference(r2, fp)));
      worst = std::max(worst, NormRelativeError(neg, CentralDifference(r, fp)));
      instances += 2;
    }
  }
  const double secs = Seconds(start);
  return {worst < 1e-4 && secs < 5.0,
          Fmt("%.0f instances at k=d=5,20, max rel err %.1e, %.2fs (limit 5s)", instances, worst,
              secs)};
}

KnowledgeGraph SyntheticGraph(std::uint64_t seed, double noise) {
  SyntheticKGSpec spec;
  spec.seed = seed;
  spec.noise = noise;
  const SyntheticKG kg = GenerateSyntheticKG(spec);
  return testing::MakeGraph(testing::Rows(kg.train.begin(), kg.train.end()),
                            testing::Rows(kg.valid.begin(), kg.valid.end()),
                            testing::Rows(kg.test.begin(), kg.test.end()));
}

TrainConfig SmallConfig(Stage stage, std::uint64_t seed) {
  TrainConfig c;
  c.stage = stage;
  c.entity_dim = c.relation_dim = 20;
  c.batch_size = 50;
  c.learning_rate = 0.01;
  c.warm_learning_rate = 0.01;
  c.seed = seed;
  return c;
}

Verdict NormConstraint() {
  const KnowledgeGraph g = SyntheticGraph(11, 0.1);
  const PathTable table = BuildPathTable(g, {});
  std::mt19937_64 rng(1004);
  double worst = 0.0;
  for (Stage stage : {Stage::kTransE, Stage::kPTransR}) {
    TrainConfig config = SmallConfig(stage, 4);
    config.epochs = 10;
    config.warm_epochs = 10;
    const ModelParams m = Train(g, &table, config).params;
    const std::size_t rows = m.num_entities() + m.num_relations();
    for (int i = 0; i < 1000; ++i) {
      const std::size_t row = rng() % rows;
      const auto v = row < m.num_entities()
                         ? m.entity(static_cast<EntityId>(row))
                         : m.relation(static_cast<RelationId>(row - m.num_entities()));
      double s = 0.0;
      for (float x : v) s += static_cast<double>(x) * x;
      worst = std::max(worst, std::abs(std::sqrt(s) - 1.0));
    }
  }
  return {worst <= 1e-5, Fmt("2 x 1000 sampled rows after 10 epochs, max |norm - 1| %.1e", worst)};
}

Verdict Degenerate() {
  const KnowledgeGraph g = SyntheticGraph(12, 0.1);
  TrainConfig config = SmallConfig(Stage::kPTransR, 5);
  config.epochs = 10;
  config.warm_epochs = 10;
  const PathTable empty;
  const ModelParams ptransr = Train(g, &empty, config).params;
  config.stage = Stage::kTransR;
  const ModelParams transr = Train(g, nullptr, config).params;
  if (!(ptransr == transr)) return {false, "parameters differ after 10 epochs"};
  std::size_t scored = 0;
  for (const Triple& x : g.test()) {
    for (EntityId e = 0; e < g.num_entities(); ++e) {
      const double a = ScorePTransR(ptransr, &empty, e, x.r, x.t);
      const double b = ScoreTransR(transr, e, x.r, x.t);
      if (std::memcmp(&a, &b, sizeof a) != 0) return {false, "scores differ"};
      ++scored;
    }
  }
  return {true, Fmt("parameters bitwise equal; %.0f scores bitwise equal", scored)};
}

Verdict TwoStageFidelity() {
  std::mt19937_64 rng(1006);
  std::size_t instances = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const KnowledgeGraph base = testing::RandomGraph(rng, 10, 3, 25, false);
    std::vector<Triple> train(base.train().begin(), base.train().end());
    std::vector<Triple> test(train.begin(), train.begin() + 4);
    for (int i = 0; i < 4; ++i) {
      test.push_back({static_cast<EntityId>(rng() % 10), static_cast<RelationId>(rng() % 3),
                      static_cast<EntityId>(rng() % 10)});
    }
    const KnowledgeGraph g = AugmentInverse(KnowledgeGraph(base.vocab(), train, {}, test));
    ModelParams m(g.num_entities(), g.num_relations(), 4, 4);
    m.InitUniform(rng);
    std::normal_distribution<float> noise(0.0f, 0.3f);
    for (RelationId r = 0; r < g.num_relations(); ++r) {
      for (float& x : m.projection(r)) x += noise(rng);
    }
    if (trial % 2 == 0) {
      std::copy(m.entity(1).begin(), m.entity(1).end(), m.entity(2).begin());
    }
    PathTableOptions po;
    po.reliability_floor = 0.0;
    const PathTable table = BuildPathTable(g, po);
    for (TiePolicy tie : {TiePolicy::kPessimistic, TiePolicy::kMean}) {
      EvalOptions options;
      options.rerank_k = g.num_entities();
      options.tie = tie;
      for (const Triple& x : g.test()) {
        for (Slot slot : {Slot::kHead, Slot::kTail}) {
          const EntityId gold = slot == Slot::kTail ? x.t : x.h;
          std::vector<double> all, unknown;
          std::size_t gold_all = 0, gold_unknown = 0;
          for (EntityId e = 0; e < g.num_entities(); ++e) {
            const Triple c = slot == Slot::kTail ? Triple{x.h, x.r, e} : Triple{e, x.r, x.t};
            const double s = FusedScore(m, &table, g, c.h, c.r, c.t);
            if (e == gold) {
              gold_all = all.size();
              gold_unknown = unknown.size();
            }
            all.push_back(s);
            if (e == gold || !g.IsKnown(c)) unknown.push_back(s);
          }
          const RankResult rr = RankEntities(m, &table, g, x, slot, options);
          if (rr.raw_rank != TieRank(all, gold_all, tie) ||
              rr.filtered_rank != TieRank(unknown, gold_unknown, tie)) {
            return {false, "two-stage rank differs from exhaustive ranking"};
          }
          ++instances;
        }
      }
    }
  }
  return {true, Fmt("%.0f instances (both slots, both tie policies) identical", instances)};
}

struct PathBenefit {
  std::vector<double> transr, ptransr;
  std::vector<RankReport> reports;
  double seconds = 0.0;
};

PathBenefit RunPathBenefit() {
  PathBenefit out;
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticKGSpec spec;
    spec.n_entities = 50;
    spec.n_relations = 3;
    spec.holdout = 0.2;
    spec.noise = 0.1;
    spec.seed = seed;
    const SyntheticKG kg = GenerateSyntheticKG(spec);
    const KnowledgeGraph g = testing::MakeGraph(testing::Rows(kg.train.begin(), kg.train.end()),
                                                testing::Rows(kg.valid.begin(), kg.valid.end()),
                                                testing::Rows(kg.test.begin(), kg.test.end()));
    const PathTable table = BuildPathTable(g, {});
    for (Stage stage : {Stage::kTransR, Stage::kPTransR}) {
      TrainConfig config = SmallConfig(stage, seed);
      config.epochs = 300;
      config.warm_epochs = 300;
      const PathTable* t = stage == Stage::kPTransR ? &table : nullptr;
      const ModelParams m = Train(g, t, config).params;
      RankReport report = Evaluate(m, t, g, Split::kTest, {});
      (stage == Stage::kPTransR ? out.ptransr : out.transr).push_back(report.hits10_filter);
      out.reports.push_back(std::move(report));
    }
  }
  out.seconds = Seconds(start);
  return out;
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Verdict FilterInvariants(const PathBenefit& benefit) {
  std::vector<RankReport> reports = benefit.reports;
  std::mt19937_64 rng(1008);
  const KnowledgeGraph g = SyntheticGraph(13, 0.1);
  const PathTable table = BuildPathTable(g, {});
  for (int trial = 0; trial < 10; ++trial) {
    ModelParams m(g.num_entities(), g.num_relations(), 6, 6);
    m.InitUniform(rng);
    EvalOptions options;
    options.rerank_k = 1 + rng() % 60;
    options.tie = trial % 2 ? TiePolicy::kMean : TiePolicy::kPessimistic;
    options.workers = 1 + trial % 3;
    reports.push_back(Evaluate(m, trial % 2 ? &table : nullptr, g,
                               trial % 3 ? Split::kTest : Split::kValid, options));
  }
  for (const auto& r : reports) {
    if (r.hits10_filter < r.hits10_raw || r.mean_rank_filter > r.mean_rank_raw) {
      return {false, "aggregate invariant violated"};
    }
    for (const auto& rr : r.ranks) {
      if (rr.filtered_rank > rr.raw_rank) return {false, "per-instance invariant violated"};
    }
  }
  return {true, Fmt("%.0f evaluation runs satisfy filter >= raw", reports.size())};
}

std::map<std::string, std::string> Artifacts(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) {
      files[fs::relative(e.path(), dir).string()] = testing::ReadFile(e.path());
    }
  }
  return files;
}

Verdict Determinism() {
  testing::TempDir tmp("acceptance");
  const auto run = [](std::vector<std::string> args) {
    std::ostringstream out, err;
    if (cli::Run(args, out, err) != 0) throw Error("command failed: " + args[0] + ": " + err.str());
  };
  const std::string data = (tmp / "data").string();
  const std::string ptbl = (tmp / "in" / "p.ptbl").string();
  const std::string model = (tmp / "in" / "m.ptrm").string();
  run({"synth-kg", "--seed", "3", "--noise", "0.1", "--out", data});
  run({"extract-paths", "--data-dir", data, "--out", ptbl});
  const std::vector<std::string> train = {"--stage", "ptransr", "--paths", ptbl,
                                          "--epochs", "5", "--warm-epochs", "5",
                                          "--dim", "10", "--batch-size", "50"};
  const auto with = [](std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  run(with({"train", "--data-dir", data, "--out", model}, train));

  // Each command twice with identical inputs into separate output roots.
  for (const char* rep : {"a", "b"}) {
    const fs::path root = tmp / rep;
    run({"synth-kg", "--seed", "3", "--noise", "0.1", "--out", (root / "synth").string()});
    run({"prepare", "--data-dir", data, "--out-dir", (root / "prepare").string()});
    run({"extract-paths", "--data-dir", data, "--out", (root / "paths" / "p.ptbl").string(),
         "--tsv", (root / "paths" / "p.tsv").string()});
    run(with({"train", "--data-dir", data, "--out", (root / "train" / "m.ptrm").string()},
             train));
    run({"evaluate", "--data-dir", data, "--model", model, "--paths", ptbl, "--out-dir",
         (root / "evaluate").string()});
  }
  const auto a = Artifacts(tmp / "a"), b = Artifacts(tmp / "b");
  if (a.size() < 12) return {false, "expected artifacts are missing"};
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    if (it == b.end() || it->second != bytes) return {false, "artifact differs: " + name};
  }
  return {true, Fmt("%.0f artifacts from 5 verbs byte-identical across reruns", a.size())};
}

}  // namespace

int main() {
  Report("AC1", "PCRA oracle equivalence", PcraOracle);
  Report("AC2", "resource conservation", Conservation);
  Report("AC3", "gradient correctness", Gradients);
  Report("AC4", "unit-norm constraint after training", NormConstraint);
  Report("AC5", "empty path table equals TransR", Degenerate);
  Report("AC6", "two-stage ranking fidelity", TwoStageFidelity);

  PathBenefit benefit;
  Report("AC7", "synthetic-KG path benefit", [&]() -> Verdict {
    benefit = RunPathBenefit();
    const double gap = Mean(benefit.ptransr) - Mean(benefit.transr);
    std::string per_seed;
    for (std::size_t i = 0; i < benefit.transr.size(); ++i) {
      per_seed += Fmt(" %.1f/%.1f", benefit.transr[i], benefit.ptransr[i]);
    }
    return {gap >= 5.0 && benefit.seconds < 300.0,
            Fmt("Hits@10(filter) TransR %.1f vs PTransR %.1f (gap %.1f, need >= 5);",
                Mean(benefit.transr), Mean(benefit.ptransr), gap) +
                " per seed" + per_seed + Fmt("; %.1fs (limit 300s)", benefit.seconds)};
  });
  Report("AC8", "filter-protocol invariants", [&] { return FilterInvariants(benefit); });
  Report("AC10", "determinism", Determinism);
  std::printf("%s\n", failures == 0 ? "all criteria passed" : "some criteria failed");
  return failures == 0 ? 0 : 1;
}
