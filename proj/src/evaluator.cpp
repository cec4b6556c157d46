#include "ptransr/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "ptransr/parallel.hpp"

namespace ptransr {

std::string_view SlotName(Slot s) { return s == Slot::kHead ? "head" : "tail"; }

std::string_view TiePolicyName(TiePolicy p) {
  return p == TiePolicy::kPessimistic ? "pessimistic" : "mean";
}

TiePolicy ParseTiePolicy(std::string_view s) {
  if (s == "pessimistic") return TiePolicy::kPessimistic;
  if (s == "mean") return TiePolicy::kMean;
  throw ConfigError("unknown tie policy '" + std::string(s) + "' (expected pessimistic, mean)");
}

Protocol ParseProtocol(std::string_view s) {
  if (s == "raw") return Protocol::kRaw;
  if (s == "filter") return Protocol::kFilter;
  if (s == "both") return Protocol::kBoth;
  throw ConfigError("unknown protocol '" + std::string(s) + "' (expected raw, filter, both)");
}

std::string_view SplitName(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValid:
      return "valid";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split ParseSplit(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + std::string(s) + "' (expected train, valid, test)");
}

namespace {

std::size_t Position(std::size_t better, std::size_t equal, TiePolicy policy) {
  if (policy == TiePolicy::kPessimistic) return better + equal + 1;
  return better + 1 + (equal + 1) / 2;
}

}  // namespace

std::size_t TieRank(std::span<const double> scores, std::size_t gold_index, TiePolicy policy) {
  const double gold = scores[gold_index];
  std::size_t better = 0, equal = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == gold_index) continue;
    if (scores[i] < gold) {
      ++better;
    } else if (scores[i] == gold) {
      ++equal;
    }
  }
  return Position(better, equal, policy);
}

double FusedScore(const ModelParams& m, const PathTable* table, const KnowledgeGraph& g,
                  EntityId h, RelationId r, EntityId t) {
  return ScorePTransR(m, table, h, r, t) + ScorePTransR(m, table, t, g.vocab().InverseOf(r), h);
}

namespace {

// M_r e for every entity, row-major |E| x d.
struct ProjectedEntities {
  std::size_t dim = 0;
  std::vector<double> rows;

  std::span<const double> row(EntityId e) const {
    return std::span<const double>(rows).subspan(e * dim, dim);
  }
};

ProjectedEntities ProjectAll(const ModelParams& m, RelationId r) {
  ProjectedEntities out{m.relation_dim(), std::vector<double>(m.num_entities() * m.relation_dim())};
  const auto matrix = m.projection(r);
  for (EntityId e = 0; e < m.num_entities(); ++e) {
    Project<float>(matrix, m.entity(e), std::span<double>(out.rows).subspan(e * out.dim, out.dim));
  }
  return out;
}

struct RankScratch {
  std::vector<double> stage1;
  std::vector<EntityId> order;
  std::vector<char> known;
};

// `proj` and `proj_inv` hold M_r e and M_{r^-1} e for the triple's relation.
RankResult RankWithProjection(const ModelParams& m, const PathTable* table,
                              const KnowledgeGraph& g, const ProjectedEntities& proj,
                              const ProjectedEntities& proj_inv, const Triple& x, Slot slot,
                              const EvalOptions& options, RankScratch& s) {
  const std::size_t n = m.num_entities();
  const EntityId gold = slot == Slot::kTail ? x.t : x.h;
  const auto rel = m.relation(x.r);

  s.stage1.resize(n);
  if (slot == Slot::kTail) {
    const auto ph = proj.row(x.h);
    for (EntityId e = 0; e < n; ++e) s.stage1[e] = TransRFromProjected<float>(ph, rel, proj.row(e));
  } else {
    const auto pt = proj.row(x.t);
    for (EntityId e = 0; e < n; ++e) s.stage1[e] = TransRFromProjected<float>(proj.row(e), rel, pt);
  }

  s.known.assign(n, 0);
  if (slot == Slot::kTail) {
    for (const Triple& k : g.KnownWithHead(x.h, x.r)) s.known[k.t] = 1;
  } else {
    for (const Triple& k : g.KnownWithTail(x.r, x.t)) s.known[k.h] = 1;
  }
  s.known[gold] = 0;

  // Tier A: the k best by stage-1 energy; the gold sorts after equal scores.
  const std::size_t k = std::min(options.rerank_k, n);
  s.order.resize(n);
  std::iota(s.order.begin(), s.order.end(), EntityId{0});
  const auto& stage1 = s.stage1;
  const auto before = [&](EntityId a, EntityId b) {
    if (stage1[a] != stage1[b]) return stage1[a] < stage1[b];
    if (a == gold || b == gold) return b == gold;
    return a < b;
  };
  if (k < n) std::nth_element(s.order.begin(), s.order.begin() + static_cast<std::ptrdiff_t>(k), s.order.end(), before);
  const auto tier_a = std::span<const EntityId>(s.order).first(k);
  const bool gold_in_a = std::find(tier_a.begin(), tier_a.end(), gold) != tier_a.end();

  RankResult result{x, slot, 0, 0};
  if (gold_in_a) {
    const RelationId r_inv = g.vocab().InverseOf(x.r);
    const auto rel_inv = m.relation(r_inv);
    // Same arithmetic as FusedScore, reusing the cached projections.
    const auto fused = [&](EntityId e) {
      const EntityId hh = slot == Slot::kTail ? x.h : e;
      const EntityId tt = slot == Slot::kTail ? e : x.t;
      const double forward = stage1[e] + PathTerm(m, table, hh, x.r, tt);
      const double inverse = TransRFromProjected<float>(proj_inv.row(tt), rel_inv, proj_inv.row(hh)) +
                             PathTerm(m, table, tt, r_inv, hh);
      return forward + inverse;
    };
    const double gold_score = fused(gold);
    std::size_t better = 0, equal = 0, better_f = 0, equal_f = 0;
    for (const EntityId e : tier_a) {
      if (e == gold) continue;
      const double v = fused(e);
      if (v < gold_score) {
        ++better;
        if (!s.known[e]) ++better_f;
      } else if (v == gold_score) {
        ++equal;
        if (!s.known[e]) ++equal_f;
      }
    }
    result.raw_rank = Position(better, equal, options.tie);
    result.filtered_rank = Position(better_f, equal_f, options.tie);
  } else {
    std::size_t known_a = 0;
    for (const EntityId e : tier_a) known_a += s.known[e] ? 1 : 0;
    const double gold_score = stage1[gold];
    std::size_t better = 0, equal = 0, better_f = 0, equal_f = 0;
    for (const EntityId e : std::span<const EntityId>(s.order).subspan(k)) {
      if (e == gold) continue;
      if (stage1[e] < gold_score) {
        ++better;
        if (!s.known[e]) ++better_f;
      } else if (stage1[e] == gold_score) {
        ++equal;
        if (!s.known[e]) ++equal_f;
      }
    }
    result.raw_rank = k + Position(better, equal, options.tie);
    result.filtered_rank = (k - known_a) + Position(better_f, equal_f, options.tie);
  }
  return result;
}

void CheckEvalPreconditions(const ModelParams& m, const KnowledgeGraph& g,
                            const EvalOptions& options) {
  if (options.rerank_k < 1) throw ConfigError("rerank_k must be at least 1");
  if (!g.augmented()) throw Error("evaluation requires a graph augmented with inverse relations");
  if (m.num_entities() != g.num_entities() || m.num_relations() != g.num_relations()) {
    throw Error("model does not match the dataset vocabulary");
  }
}

}  // namespace

RankResult RankEntities(const ModelParams& m, const PathTable* table, const KnowledgeGraph& g,
                        const Triple& triple, Slot slot, const EvalOptions& options) {
  CheckEvalPreconditions(m, g, options);
  RankScratch scratch;
  return RankWithProjection(m, table, g, ProjectAll(m, triple.r),
                            ProjectAll(m, g.vocab().InverseOf(triple.r)), triple, slot, options,
                            scratch);
}

RankReport Evaluate(const ModelParams& m, const PathTable* table, const KnowledgeGraph& g,
                    Split split, const EvalOptions& options) {
  CheckEvalPreconditions(m, g, options);
  const auto triples = g.split(split);
  if (triples.empty()) throw Error("cannot evaluate an empty split");

  RankReport report;
  report.split = split;
  report.rerank_k = options.rerank_k;
  report.tie = options.tie;
  report.instances = 2 * triples.size();
  report.ranks.resize(report.instances);

  std::map<RelationId, std::vector<std::size_t>> by_relation;
  for (std::size_t i = 0; i < triples.size(); ++i) by_relation[triples[i].r].push_back(i);

  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  std::vector<RankScratch> scratch(workers);
  for (const auto& [r, members] : by_relation) {
    const ProjectedEntities proj = ProjectAll(m, r);
    const ProjectedEntities proj_inv = ProjectAll(m, g.vocab().InverseOf(r));
    ParallelFor(workers, workers, [&](std::size_t w) {
      for (std::size_t j = w; j < members.size(); j += workers) {
        const std::size_t i = members[j];
        report.ranks[2 * i] =
            RankWithProjection(m, table, g, proj, proj_inv, triples[i], Slot::kHead, options, scratch[w]);
        report.ranks[2 * i + 1] =
            RankWithProjection(m, table, g, proj, proj_inv, triples[i], Slot::kTail, options, scratch[w]);
      }
    });
  }

  const CategoryTable categories = ClassifyRelations(g, options.category_cutoff);
  const std::vector<std::size_t> freq = RelationFrequencies(g);
  for (std::size_t r = 0; r < freq.size(); ++r) {
    if (freq[r] > 0) ++report.per_frequency[static_cast<std::size_t>(BucketForCount(freq[r]))].relations;
  }

  double sum_raw = 0.0, sum_filter = 0.0;
  std::size_t hits_raw = 0, hits_filter = 0;
  std::array<double, kNumFrequencyBuckets> bucket_sum{};
  for (const RankResult& rr : report.ranks) {
    if (rr.filtered_rank > rr.raw_rank || rr.raw_rank > m.num_entities() || rr.filtered_rank < 1) {
      throw std::logic_error("rank invariant violated: filtered <= raw <= |E|");
    }
    sum_raw += static_cast<double>(rr.raw_rank);
    sum_filter += static_cast<double>(rr.filtered_rank);
    hits_raw += rr.raw_rank <= 10 ? 1 : 0;
    const bool hit_f = rr.filtered_rank <= 10;
    hits_filter += hit_f ? 1 : 0;

    const RelationId r = rr.triple.r;
    const auto& cat = r < categories.by_relation.size() ? categories.by_relation[r] : std::nullopt;
    if (!cat || freq[r] == 0) {
      ++report.unclassified;
      continue;
    }
    auto& cell = report.per_category[static_cast<std::size_t>(cat->category)]
                                    [rr.slot == Slot::kHead ? 0 : 1];
    ++cell.instances;
    cell.hits_filter += hit_f ? 1 : 0;
    const auto b = static_cast<std::size_t>(BucketForCount(freq[r]));
    ++report.per_frequency[b].instances;
    bucket_sum[b] += static_cast<double>(rr.raw_rank);
  }

  const double n = static_cast<double>(report.instances);
  report.mean_rank_raw = sum_raw / n;
  report.mean_rank_filter = sum_filter / n;
  report.hits10_raw = 100.0 * static_cast<double>(hits_raw) / n;
  report.hits10_filter = 100.0 * static_cast<double>(hits_filter) / n;
  for (auto& row : report.per_category) {
    for (auto& cell : row) {
      if (cell.instances > 0) {
        cell.hits10_filter =
            100.0 * static_cast<double>(cell.hits_filter) / static_cast<double>(cell.instances);
      }
    }
  }
  for (std::size_t b = 0; b < kNumFrequencyBuckets; ++b) {
    auto& cell = report.per_frequency[b];
    if (cell.instances > 0) cell.mean_rank_raw = bucket_sum[b] / static_cast<double>(cell.instances);
  }

  if (report.hits10_filter < report.hits10_raw || report.mean_rank_filter > report.mean_rank_raw) {
    throw std::logic_error("filter protocol invariant violated");
  }
  return report;
}

namespace {

std::string Fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string Pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string RightPad(const std::string& s, std::size_t width) {
  return s.size() >= width ? " " + s : std::string(width - s.size(), ' ') + s;
}

constexpr std::array<RelationCategory, 4> kCategories = {
    RelationCategory::kOneToOne, RelationCategory::kOneToMany, RelationCategory::kManyToOne,
    RelationCategory::kManyToMany};

}  // namespace

void WriteReportText(std::ostream& out, const RankReport& report, Protocol protocol,
                     const std::string& header) {
  // Config echo, one "# key=value" line each.
  std::size_t begin = 0;
  while (begin < header.size()) {
    std::size_t end = header.find('\n', begin);
    if (end == std::string::npos) end = header.size();
    out << "# " << header.substr(begin, end - begin) << '\n';
    begin = end + 1;
  }
  out << "# split=" << SplitName(report.split) << " instances=" << report.instances
      << " rerank_k=" << report.rerank_k << " tie=" << TiePolicyName(report.tie) << "\n\n";

  const bool raw = protocol != Protocol::kFilter;
  const bool filter = protocol != Protocol::kRaw;
  out << "Entity prediction\n";
  out << Pad("Metric", 12);
  if (raw) out << RightPad("MeanRank(raw)", 16);
  if (filter) out << RightPad("MeanRank(filter)", 18);
  if (raw) out << RightPad("Hits@10(raw)", 14);
  if (filter) out << RightPad("Hits@10(filter)", 17);
  out << '\n' << Pad("value", 12);
  if (raw) out << RightPad(Fixed(report.mean_rank_raw, 1), 16);
  if (filter) out << RightPad(Fixed(report.mean_rank_filter, 1), 18);
  if (raw) out << RightPad(Fixed(report.hits10_raw, 1), 14);
  if (filter) out << RightPad(Fixed(report.hits10_filter, 1), 17);
  out << "\n\n";

  out << "Hits@10(filter) by relation category\n";
  out << Pad("", 12);
  for (const char* task : {"head", "tail"}) {
    for (const auto c : kCategories) out << RightPad(std::string(task) + ":" + std::string(CategoryName(c)), 13);
  }
  out << '\n' << Pad("hits@10", 12);
  for (std::size_t slot = 0; slot < 2; ++slot) {
    for (const auto c : kCategories) {
      out << RightPad(Fixed(report.per_category[static_cast<std::size_t>(c)][slot].hits10_filter, 1), 13);
    }
  }
  out << '\n' << Pad("instances", 12);
  for (std::size_t slot = 0; slot < 2; ++slot) {
    for (const auto c : kCategories) {
      out << RightPad(std::to_string(report.per_category[static_cast<std::size_t>(c)][slot].instances), 13);
    }
  }
  out << "\n\n";

  out << "MeanRank(raw) by relation frequency in train\n";
  out << Pad("frequency", 12);
  for (std::size_t b = 0; b < kNumFrequencyBuckets; ++b) {
    out << RightPad(std::string(BucketName(static_cast<FrequencyBucket>(b))), 10);
  }
  out << '\n' << Pad("relations", 12);
  for (const auto& cell : report.per_frequency) out << RightPad(std::to_string(cell.relations), 10);
  out << '\n' << Pad("instances", 12);
  for (const auto& cell : report.per_frequency) out << RightPad(std::to_string(cell.instances), 10);
  out << '\n' << Pad("meanrank", 12);
  for (const auto& cell : report.per_frequency) out << RightPad(Fixed(cell.mean_rank_raw, 1), 10);
  out << '\n';
  if (report.unclassified > 0) {
    out << "\n" << report.unclassified << " instances use relations absent from train\n";
  }
}

void WriteReportJson(std::ostream& out, const RankReport& report, const std::string& config) {
  nlohmann::ordered_json j;
  j["split"] = SplitName(report.split);
  j["instances"] = report.instances;
  j["rerank_k"] = report.rerank_k;
  j["tie_policy"] = TiePolicyName(report.tie);
  j["mean_rank_raw"] = report.mean_rank_raw;
  j["mean_rank_filter"] = report.mean_rank_filter;
  j["hits10_raw"] = report.hits10_raw;
  j["hits10_filter"] = report.hits10_filter;
  auto& cats = j["per_category"];
  for (const auto c : kCategories) {
    for (std::size_t slot = 0; slot < 2; ++slot) {
      const auto& cell = report.per_category[static_cast<std::size_t>(c)][slot];
      nlohmann::ordered_json e;
      e["category"] = CategoryName(c);
      e["predict"] = slot == 0 ? "head" : "tail";
      e["instances"] = cell.instances;
      e["hits10_filter"] = cell.hits10_filter;
      cats.push_back(e);
    }
  }
  auto& freqs = j["per_frequency"];
  for (std::size_t b = 0; b < kNumFrequencyBuckets; ++b) {
    const auto& cell = report.per_frequency[b];
    nlohmann::ordered_json e;
    e["bucket"] = BucketName(static_cast<FrequencyBucket>(b));
    e["relations"] = cell.relations;
    e["instances"] = cell.instances;
    e["mean_rank_raw"] = cell.mean_rank_raw;
    freqs.push_back(e);
  }
  j["unclassified_instances"] = report.unclassified;
  if (!config.empty()) j["config"] = config;
  out << j.dump(2) << '\n';
}

void WriteRanksCsv(std::ostream& out, const RankReport& report, const Vocab& vocab) {
  out << "index,head,relation,tail,predict,raw_rank,filtered_rank\n";
  for (std::size_t i = 0; i < report.ranks.size(); ++i) {
    const auto& rr = report.ranks[i];
    out << i / 2 << ',' << vocab.EntityName(rr.triple.h) << ',' << vocab.RelationName(rr.triple.r)
        << ',' << vocab.EntityName(rr.triple.t) << ',' << SlotName(rr.slot) << ',' << rr.raw_rank
        << ',' << rr.filtered_rank << '\n';
  }
}

}  // namespace ptransr
