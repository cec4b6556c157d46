#pragma once

// TransE warm start followed by TransR / PTransR margin-ranking SGD.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ptransr/kgdata.hpp"
#include "ptransr/model.hpp"
#include "ptransr/paths.hpp"

namespace ptransr {

enum class Stage { kTransE, kTransR, kPTransR };
enum class NegativeMode { kUniform, kBernoulli };

std::string_view StageName(Stage s);
Stage ParseStage(std::string_view s);
std::string_view NormName(Norm n);
Norm ParseNorm(std::string_view s);
std::string_view NegativeModeName(NegativeMode m);
NegativeMode ParseNegativeMode(std::string_view s);

struct TrainConfig {
  Stage stage = Stage::kPTransR;
  double learning_rate = 0.001;
  double margin = 1.0;         // TransE margin
  double margin_triple = 1.0;  // gamma_1
  double margin_path = 1.0;    // gamma_2
  std::size_t entity_dim = 50;
  std::size_t relation_dim = 50;
  std::size_t batch_size = 4800;
  std::size_t epochs = 500;
  Norm norm = Norm::kL2;
  NegativeMode neg_mode = NegativeMode::kUniform;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  bool linear_decay = false;

  // TransE warm start used when a TransR/PTransR run has no initial model.
  std::size_t warm_epochs = 1000;
  double warm_learning_rate = 0.01;
  double warm_margin = 1.0;

  std::size_t checkpoint_every = 0;  // 0 disables
  std::size_t early_stop_patience = 0;  // epochs without valid MeanRank gain; 0 disables
  std::size_t validate_every = 10;

  void Validate() const;
  // The TransE configuration used for the warm start of this run.
  TrainConfig WarmStartConfig() const;
  // key=value lines, sorted by key.
  std::string ToKeyValue() const;
};

// Applies key=value pairs; unknown keys raise ConfigError.
void ApplyConfigValues(TrainConfig& config, const std::map<std::string, std::string>& values);
// Parses a key=value text file ('#' starts a comment).
std::map<std::string, std::string> ReadKeyValueFile(const std::filesystem::path& path);

enum class CorruptSlot { kHead, kTail, kRelation };

struct NegativeSample {
  Triple corrupted;
  CorruptSlot slot = CorruptSlot::kTail;
};

class NegativeSampler {
 public:
  static constexpr int kMaxAttempts = 100;

  NegativeSampler(const KnowledgeGraph& g, NegativeMode mode);

  // Head or tail corruption (uniform 50/50, or per-relation Bernoulli).
  NegativeSample CorruptEntity(const Triple& x, Rng& rng) const;
  NegativeSample CorruptRelation(const Triple& x, Rng& rng) const;
  NegativeSample Corrupt(const Triple& x, CorruptSlot slot, Rng& rng) const;

  double HeadProbability(RelationId r) const;

 private:
  const KnowledgeGraph* g_;
  NegativeMode mode_;
  std::vector<double> head_prob_;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double triple_loss = 0.0;
  double path_loss = 0.0;
  std::size_t violations = 0;  // hinge terms with positive loss
  double learning_rate = 0.0;
};

// Hinge max(0, margin + positive - negative).
inline double Hinge(double margin, double positive, double negative) {
  const double v = margin + positive - negative;
  return v > 0.0 ? v : 0.0;
}

// One pass of TransE SGD over the shuffled train triples.
EpochStats TrainEpochTransE(const KnowledgeGraph& g, ModelParams& params, const TrainConfig& config,
                            double learning_rate, Rng& rng);

// One pass of the PTransR objective: triple hinge with an entity-corrupted
// negative plus, for every stored path of (h, t), a relation-corrupted path
// hinge weighted by 1/Z. A null or empty table gives plain TransR.
EpochStats TrainEpochPTransR(const KnowledgeGraph& g, const PathTable* table, ModelParams& params,
                             const TrainConfig& config, double learning_rate, Rng& rng);

// Random init followed by `config.epochs` TransE epochs; projection matrices
// are reset to identity.
ModelParams InitTransE(const KnowledgeGraph& g, const TrainConfig& config,
                       std::vector<EpochStats>* log = nullptr);

struct TrainOptions {
  std::optional<std::filesystem::path> init_model;
  std::optional<std::filesystem::path> checkpoint_dir;
  std::ostream* log = nullptr;  // JSON lines
  bool log_wall_time = true;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> warm_log;
  std::vector<EpochStats> log;
  std::size_t best_epoch = 0;
};

// Full pipeline for config.stage. TransE runs InitTransE only; TransR and
// PTransR load `init_model` or run the warm start first.
TrainResult Train(const KnowledgeGraph& g, const PathTable* table, const TrainConfig& config,
                  const TrainOptions& options = {});

}  // namespace ptransr
