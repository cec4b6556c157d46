#pragma once

// Entity prediction: two-stage candidate ranking, raw/filter protocols and
// the MeanRank / Hits@10 report with category and frequency breakdowns.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ptransr/kgdata.hpp"
#include "ptransr/model.hpp"
#include "ptransr/paths.hpp"

namespace ptransr {

enum class Slot { kHead, kTail };
enum class TiePolicy { kPessimistic, kMean };
enum class Protocol { kRaw, kFilter, kBoth };

std::string_view SlotName(Slot s);
std::string_view TiePolicyName(TiePolicy p);
TiePolicy ParseTiePolicy(std::string_view s);
Protocol ParseProtocol(std::string_view s);
std::string_view SplitName(Split s);
Split ParseSplit(std::string_view s);

struct RankResult {
  Triple triple;
  Slot slot = Slot::kTail;
  std::size_t raw_rank = 0;
  std::size_t filtered_rank = 0;
};

struct EvalOptions {
  std::size_t rerank_k = 500;
  TiePolicy tie = TiePolicy::kPessimistic;
  std::size_t workers = 1;
  double category_cutoff = 1.5;
};

// 1-based rank of scores[gold_index] (lower score is better). Pessimistic
// places the gold after every equal score; mean takes the rounded-up average
// position within its tie group.
std::size_t TieRank(std::span<const double> scores, std::size_t gold_index, TiePolicy policy);

// score(h,r,t) = f(h,r,t) + f(t,r^-1,h) with f the PTransR score. Requires an
// augmented graph.
double FusedScore(const ModelParams& m, const PathTable* table, const KnowledgeGraph& g,
                  EntityId h, RelationId r, EntityId t);

// Stage 1 orders every entity by the forward TransR energy; stage 2 reorders
// the best `rerank_k` by FusedScore. The filtered rank discards known-true
// competitors from the same final ordering.
RankResult RankEntities(const ModelParams& m, const PathTable* table, const KnowledgeGraph& g,
                        const Triple& triple, Slot slot, const EvalOptions& options);

struct CategoryCell {
  std::size_t instances = 0;
  std::size_t hits_filter = 0;
  double hits10_filter = 0.0;  // percent
};

struct FrequencyCell {
  std::size_t relations = 0;  // base relations in the bucket
  std::size_t instances = 0;
  double mean_rank_raw = 0.0;
};

struct RankReport {
  Split split = Split::kTest;
  std::size_t rerank_k = 0;
  TiePolicy tie = TiePolicy::kPessimistic;
  std::size_t instances = 0;

  double mean_rank_raw = 0.0;
  double mean_rank_filter = 0.0;
  double hits10_raw = 0.0;  // percent
  double hits10_filter = 0.0;

  // [category][slot]; slot 0 = head prediction, 1 = tail prediction.
  std::array<std::array<CategoryCell, 2>, 4> per_category{};
  std::array<FrequencyCell, kNumFrequencyBuckets> per_frequency{};
  // Instances whose relation never occurs in train (no category or bucket).
  std::size_t unclassified = 0;

  std::vector<RankResult> ranks;  // split order, head then tail per triple
};

RankReport Evaluate(const ModelParams& m, const PathTable* table, const KnowledgeGraph& g,
                    Split split, const EvalOptions& options);

// Aligned tables for the overall, per-category and per-frequency results.
void WriteReportText(std::ostream& out, const RankReport& report, Protocol protocol,
                     const std::string& header = {});
void WriteReportJson(std::ostream& out, const RankReport& report, const std::string& config = {});
void WriteRanksCsv(std::ostream& out, const RankReport& report, const Vocab& vocab);

}  // namespace ptransr
