#include "ptransr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ptransr/evaluator.hpp"
#include "ptransr/parallel.hpp"

namespace ptransr {

std::string_view StageName(Stage s) {
  switch (s) {
    case Stage::kTransE:
      return "transe";
    case Stage::kTransR:
      return "transr";
    case Stage::kPTransR:
      return "ptransr";
  }
  return "?";
}

Stage ParseStage(std::string_view s) {
  if (s == "transe") return Stage::kTransE;
  if (s == "transr") return Stage::kTransR;
  if (s == "ptransr") return Stage::kPTransR;
  throw ConfigError("unknown stage '" + std::string(s) + "' (expected transe, transr, ptransr)");
}

std::string_view NormName(Norm n) { return n == Norm::kL1 ? "L1" : "L2"; }

Norm ParseNorm(std::string_view s) {
  if (s == "L1" || s == "l1") return Norm::kL1;
  if (s == "L2" || s == "l2") return Norm::kL2;
  throw ConfigError("unknown norm '" + std::string(s) + "' (expected L1 or L2)");
}

std::string_view NegativeModeName(NegativeMode m) {
  return m == NegativeMode::kUniform ? "uniform" : "bernoulli";
}

NegativeMode ParseNegativeMode(std::string_view s) {
  if (s == "uniform" || s == "unif") return NegativeMode::kUniform;
  if (s == "bernoulli" || s == "bern") return NegativeMode::kBernoulli;
  throw ConfigError("unknown negative mode '" + std::string(s) + "' (expected uniform, bernoulli)");
}

void TrainConfig::Validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(learning_rate, "learning_rate");
  positive(margin, "margin");
  positive(margin_triple, "margin_triple");
  positive(margin_path, "margin_path");
  positive(warm_learning_rate, "warm_learning_rate");
  positive(warm_margin, "warm_margin");
  if (entity_dim == 0 || relation_dim == 0) throw ConfigError("dimensions must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (workers == 0) throw ConfigError("workers must be positive");
  if (validate_every == 0) throw ConfigError("validate_every must be positive");
  if (stage == Stage::kTransE && entity_dim != relation_dim) {
    throw ConfigError("TransE requires entity_dim == relation_dim");
  }
}

TrainConfig TrainConfig::WarmStartConfig() const {
  TrainConfig warm = *this;
  warm.stage = Stage::kTransE;
  warm.learning_rate = warm_learning_rate;
  warm.margin = warm_margin;
  warm.epochs = warm_epochs;
  warm.linear_decay = false;
  warm.checkpoint_every = 0;
  warm.early_stop_patience = 0;
  return warm;
}

std::string TrainConfig::ToKeyValue() const {
  std::map<std::string, std::string> kv;
  const auto num = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  kv["stage"] = StageName(stage);
  kv["learning_rate"] = num(learning_rate);
  kv["margin"] = num(margin);
  kv["margin_triple"] = num(margin_triple);
  kv["margin_path"] = num(margin_path);
  kv["entity_dim"] = std::to_string(entity_dim);
  kv["relation_dim"] = std::to_string(relation_dim);
  kv["batch_size"] = std::to_string(batch_size);
  kv["epochs"] = std::to_string(epochs);
  kv["norm"] = NormName(norm);
  kv["neg_mode"] = NegativeModeName(neg_mode);
  kv["seed"] = std::to_string(seed);
  kv["workers"] = std::to_string(workers);
  kv["linear_decay"] = linear_decay ? "true" : "false";
  kv["warm_epochs"] = std::to_string(warm_epochs);
  kv["warm_learning_rate"] = num(warm_learning_rate);
  kv["warm_margin"] = num(warm_margin);
  kv["checkpoint_every"] = std::to_string(checkpoint_every);
  kv["early_stop_patience"] = std::to_string(early_stop_patience);
  kv["validate_every"] = std::to_string(validate_every);
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

namespace {

double ParseDouble(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw ConfigError("invalid number for " + key + ": '" + v + "'");
  return out;
}

std::uint64_t ParseUnsigned(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || v[0] == '-') {
    throw ConfigError("invalid non-negative integer for " + key + ": '" + v + "'");
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

std::string Trim(std::string s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

void ApplyConfigValues(TrainConfig& c, const std::map<std::string, std::string>& values) {
  for (const auto& [key, v] : values) {
    if (key == "stage") {
      c.stage = ParseStage(v);
    } else if (key == "learning_rate" || key == "lr") {
      c.learning_rate = ParseDouble(key, v);
    } else if (key == "margin") {
      c.margin = ParseDouble(key, v);
    } else if (key == "margin_triple") {
      c.margin_triple = ParseDouble(key, v);
    } else if (key == "margin_path") {
      c.margin_path = ParseDouble(key, v);
    } else if (key == "dim") {
      c.entity_dim = c.relation_dim = ParseUnsigned(key, v);
    } else if (key == "entity_dim") {
      c.entity_dim = ParseUnsigned(key, v);
    } else if (key == "relation_dim") {
      c.relation_dim = ParseUnsigned(key, v);
    } else if (key == "batch_size") {
      c.batch_size = ParseUnsigned(key, v);
    } else if (key == "epochs") {
      c.epochs = ParseUnsigned(key, v);
    } else if (key == "norm") {
      c.norm = ParseNorm(v);
    } else if (key == "neg_mode") {
      c.neg_mode = ParseNegativeMode(v);
    } else if (key == "seed") {
      c.seed = ParseUnsigned(key, v);
    } else if (key == "workers") {
      c.workers = ParseUnsigned(key, v);
    } else if (key == "linear_decay") {
      c.linear_decay = ParseBool(key, v);
    } else if (key == "warm_epochs") {
      c.warm_epochs = ParseUnsigned(key, v);
    } else if (key == "warm_learning_rate") {
      c.warm_learning_rate = ParseDouble(key, v);
    } else if (key == "warm_margin") {
      c.warm_margin = ParseDouble(key, v);
    } else if (key == "checkpoint_every") {
      c.checkpoint_every = ParseUnsigned(key, v);
    } else if (key == "early_stop_patience") {
      c.early_stop_patience = ParseUnsigned(key, v);
    } else if (key == "validate_every") {
      c.validate_every = ParseUnsigned(key, v);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

std::map<std::string, std::string> ReadKeyValueFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    out[Trim(line.substr(0, eq))] = Trim(line.substr(eq + 1));
  }
  return out;
}

NegativeSampler::NegativeSampler(const KnowledgeGraph& g, NegativeMode mode)
    : g_(&g), mode_(mode), head_prob_(g.num_relations(), 0.5) {
  if (mode_ != NegativeMode::kBernoulli) return;
  const auto stats = [&] {
    std::vector<std::size_t> count(g.num_relations(), 0), heads(g.num_relations(), 0),
        tails(g.num_relations(), 0);
    const auto train = g.unique_train();
    for (std::size_t i = 0; i < train.size(); ++i) {
      ++count[train[i].r];
      if (i == 0 || train[i - 1].h != train[i].h || train[i - 1].r != train[i].r) ++heads[train[i].r];
    }
    std::vector<Triple> by_tail(train.begin(), train.end());
    std::sort(by_tail.begin(), by_tail.end(), TailMajorLess{});
    for (std::size_t i = 0; i < by_tail.size(); ++i) {
      if (i == 0 || by_tail[i - 1].r != by_tail[i].r || by_tail[i - 1].t != by_tail[i].t) {
        ++tails[by_tail[i].r];
      }
    }
    return std::tuple{count, heads, tails};
  }();
  const auto& [count, heads, tails] = stats;
  for (std::size_t r = 0; r < g.num_relations(); ++r) {
    if (count[r] == 0) continue;
    const double tph = static_cast<double>(count[r]) / static_cast<double>(heads[r]);
    const double hpt = static_cast<double>(count[r]) / static_cast<double>(tails[r]);
    head_prob_[r] = tph / (tph + hpt);
  }
}

double NegativeSampler::HeadProbability(RelationId r) const { return head_prob_.at(r); }

NegativeSample NegativeSampler::Corrupt(const Triple& x, CorruptSlot slot, Rng& rng) const {
  if (slot == CorruptSlot::kRelation) {
    if (g_->num_relations() < 2) throw Error("relation corruption needs at least two relations");
    std::uniform_int_distribution<RelationId> pick(0, static_cast<RelationId>(g_->num_relations() - 2));
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      RelationId r = pick(rng);
      if (r >= x.r) ++r;
      const Triple c{x.h, r, x.t};
      if (!g_->IsTrain(c)) return {c, slot};
    }
  } else {
    std::uniform_int_distribution<EntityId> pick(0, static_cast<EntityId>(g_->num_entities() - 1));
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      Triple c = x;
      (slot == CorruptSlot::kHead ? c.h : c.t) = pick(rng);
      if (!g_->IsTrain(c)) return {c, slot};
    }
  }
  throw Error("negative sampling exceeded " + std::to_string(kMaxAttempts) +
              " attempts; vocabulary too small for this triple");
}

NegativeSample NegativeSampler::CorruptEntity(const Triple& x, Rng& rng) const {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double p_head = mode_ == NegativeMode::kUniform ? 0.5 : head_prob_[x.r];
  return Corrupt(x, coin(rng) < p_head ? CorruptSlot::kHead : CorruptSlot::kTail, rng);
}

NegativeSample NegativeSampler::CorruptRelation(const Triple& x, Rng& rng) const {
  return Corrupt(x, CorruptSlot::kRelation, rng);
}

namespace {

struct Accumulated {
  double triple_loss = 0.0;
  double path_loss = 0.0;
  std::size_t violations = 0;
  std::size_t triples = 0;
};

void Axpy(std::span<float> dst, double a, std::span<const double> g) {
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = static_cast<float>(static_cast<double>(dst[i]) + a * g[i]);
  }
}

[[noreturn]] void NonFinite(const char* what, std::size_t index, const Triple& x) {
  throw Error(std::string("non-finite ") + what + " at train triple " + std::to_string(index) +
              " (h=" + std::to_string(x.h) + ", r=" + std::to_string(x.r) +
              ", t=" + std::to_string(x.t) + ")");
}

// d||x||/dx for x = h + r - t.
std::vector<double> TransEGrad(std::span<const float> h, std::span<const float> r,
                               std::span<const float> t, Norm norm) {
  std::vector<double> g(r.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    g[i] = static_cast<double>(h[i]) + static_cast<double>(r[i]) - static_cast<double>(t[i]);
    sq += g[i] * g[i];
  }
  if (norm == Norm::kL1) {
    for (double& x : g) x = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
  } else {
    const double n = std::sqrt(sq);
    for (double& x : g) x = n > 0.0 ? x / n : 0.0;
  }
  return g;
}

void TransEStep(const KnowledgeGraph& g, const NegativeSampler& sampler, ModelParams& params,
                const TrainConfig& config, double lr, std::span<const std::size_t> order,
                Rng& rng, Accumulated& acc) {
  TouchedRows touched;
  std::size_t in_batch = 0;
  for (const std::size_t idx : order) {
    const Triple x = g.train()[idx];
    const Triple y = sampler.CorruptEntity(x, rng).corrupted;
    const double pos = ScoreTransE(params, x.h, x.r, x.t, config.norm);
    const double neg = ScoreTransE(params, y.h, y.r, y.t, config.norm);
    const double loss = Hinge(config.margin, pos, neg);
    if (!std::isfinite(loss)) NonFinite("TransE loss", idx, x);
    acc.triple_loss += loss;
    ++acc.triples;
    if (loss > 0.0) {
      ++acc.violations;
      const auto gp = TransEGrad(params.entity(x.h), params.relation(x.r), params.entity(x.t), config.norm);
      const auto gn = TransEGrad(params.entity(y.h), params.relation(y.r), params.entity(y.t), config.norm);
      Axpy(params.entity(x.h), -lr, gp);
      Axpy(params.relation(x.r), -lr, gp);
      Axpy(params.entity(x.t), lr, gp);
      Axpy(params.entity(y.h), lr, gn);
      Axpy(params.relation(y.r), lr, gn);
      Axpy(params.entity(y.t), -lr, gn);
      touched.entities.insert(touched.entities.end(), {x.h, x.t, y.h, y.t});
      touched.relations.push_back(x.r);
    }
    if (++in_batch == config.batch_size) {
      ProjectConstraints(params, touched);
      touched.Clear();
      in_batch = 0;
    }
  }
  ProjectConstraints(params, touched);
}

struct PathScratch {
  std::vector<PathResource> usable;
  std::vector<double> reliability;
};

void PTransRStep(const KnowledgeGraph& g, const PathTable* table, const NegativeSampler& sampler,
                 ModelParams& params, const TrainConfig& config, double lr,
                 std::span<const std::size_t> order, Rng& rng, Accumulated& acc) {
  TouchedRows touched;
  PathScratch scratch;
  std::size_t in_batch = 0;
  for (const std::size_t idx : order) {
    const Triple x = g.train()[idx];
    const Triple y = sampler.CorruptEntity(x, rng).corrupted;

    // Triple-level hinge.
    const double pos = ScoreTransR(params, x.h, x.r, x.t);
    const double neg = ScoreTransR(params, y.h, y.r, y.t);
    const double loss = Hinge(config.margin_triple, pos, neg);
    if (!std::isfinite(loss)) NonFinite("triple loss", idx, x);
    acc.triple_loss += loss;
    ++acc.triples;
    if (loss > 0.0) {
      ++acc.violations;
      const auto gp = GradScoreTransR(params, x.h, x.r, x.t);
      const auto gn = GradScoreTransR(params, y.h, y.r, y.t);
      Axpy(params.entity(x.h), -lr, gp.h);
      Axpy(params.entity(x.t), -lr, gp.t);
      Axpy(params.relation(x.r), -lr, gp.r);
      Axpy(params.projection(x.r), -lr, gp.matrix);
      Axpy(params.entity(y.h), lr, gn.h);
      Axpy(params.entity(y.t), lr, gn.t);
      Axpy(params.relation(y.r), lr, gn.r);
      Axpy(params.projection(y.r), lr, gn.matrix);
      touched.AddTriple(x);
      touched.AddTriple(y);
    }

    // Path-level hinges.
    scratch.usable.clear();
    if (table != nullptr) {
      for (const auto& entry : table->Paths(x.h, x.t)) {
        if (!entry.path.IsSingle(x.r)) scratch.usable.push_back(entry);
      }
    }
    if (!scratch.usable.empty()) {
      const RelationId r_neg = sampler.CorruptRelation(x, rng).corrupted.r;
      scratch.reliability.clear();
      double z = 0.0;
      for (const auto& entry : scratch.usable) {
        scratch.reliability.push_back(table->Reliability(x.r, entry));
        z += scratch.reliability.back();
      }
      if (z > 0.0) {
        for (std::size_t i = 0; i < scratch.usable.size(); ++i) {
          const auto& entry = scratch.usable[i];
          const double rel_pos = scratch.reliability[i];
          const double rel_neg = table->Reliability(r_neg, entry);
          const auto p = PathVector(params, entry.path);
          const double e_pos = PathEnergyKernel<float>(p, params.relation(x.r), rel_pos);
          const double e_neg = PathEnergyKernel<float>(p, params.relation(r_neg), rel_neg);
          const double path_loss = Hinge(config.margin_path, e_pos, e_neg);
          if (!std::isfinite(path_loss)) NonFinite("path loss", idx, x);
          acc.path_loss += path_loss / z;
          if (path_loss <= 0.0) continue;
          ++acc.violations;
          const double w = lr / z;
          const auto gp = PathEnergyGrad<float>(p, params.relation(x.r), rel_pos);
          const auto gn = PathEnergyGrad<float>(p, params.relation(r_neg), rel_neg);
          std::vector<double> g_path(gp.size());
          for (std::size_t j = 0; j < gp.size(); ++j) g_path[j] = gp[j] - gn[j];
          Axpy(params.relation(entry.path.first()), -w, g_path);
          touched.relations.push_back(entry.path.first());
          if (entry.path.length() == 2) {
            Axpy(params.relation(entry.path.second()), -w, g_path);
            touched.relations.push_back(entry.path.second());
          }
          Axpy(params.relation(x.r), w, gp);
          Axpy(params.relation(r_neg), -w, gn);
          touched.relations.push_back(x.r);
          touched.relations.push_back(r_neg);
        }
      }
    }

    if (++in_batch == config.batch_size) {
      ProjectConstraints(params, touched);
      touched.Clear();
      in_batch = 0;
    }
  }
  ProjectConstraints(params, touched);
}

template <typename Step>
EpochStats RunEpoch(const KnowledgeGraph& g, ModelParams& params, const TrainConfig& config,
                    double lr, Rng& rng, Step&& step) {
  std::vector<std::size_t> order(g.train().size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t workers = std::min(config.workers, std::max<std::size_t>(1, order.size()));
  std::vector<Accumulated> acc(workers);
  if (workers == 1) {
    step(std::span<const std::size_t>(order), rng, acc[0]);
  } else {
    // Hogwild: contiguous shards, unsynchronized updates to shared rows.
    std::vector<Rng> rngs;
    for (std::size_t w = 0; w < workers; ++w) rngs.emplace_back(rng());
    const std::size_t shard = (order.size() + workers - 1) / workers;
    ParallelFor(workers, workers, [&](std::size_t w) {
      const std::size_t begin = std::min(order.size(), w * shard);
      const std::size_t end = std::min(order.size(), begin + shard);
      step(std::span<const std::size_t>(order).subspan(begin, end - begin), rngs[w], acc[w]);
    });
  }

  Accumulated total;
  for (const auto& a : acc) {
    total.triple_loss += a.triple_loss;
    total.path_loss += a.path_loss;
    total.violations += a.violations;
    total.triples += a.triples;
  }
  EpochStats stats;
  stats.learning_rate = lr;
  stats.violations = total.violations;
  const double n = std::max<double>(1.0, static_cast<double>(total.triples));
  stats.triple_loss = total.triple_loss / n;
  stats.path_loss = total.path_loss / n;
  stats.mean_loss = (total.triple_loss + total.path_loss) / n;
  if (!std::isfinite(stats.mean_loss)) throw Error("non-finite mean loss");
  if (!params.AllFinite()) throw Error("non-finite parameter after SGD epoch");
  return stats;
}

double EpochLearningRate(const TrainConfig& config, std::size_t epoch) {
  if (!config.linear_decay || config.epochs == 0) return config.learning_rate;
  return config.learning_rate *
         (1.0 - static_cast<double>(epoch) / static_cast<double>(config.epochs));
}

}  // namespace

EpochStats TrainEpochTransE(const KnowledgeGraph& g, ModelParams& params, const TrainConfig& config,
                            double learning_rate, Rng& rng) {
  const NegativeSampler sampler(g, config.neg_mode);
  return RunEpoch(g, params, config, learning_rate, rng,
                  [&](std::span<const std::size_t> order, Rng& r, Accumulated& acc) {
                    TransEStep(g, sampler, params, config, learning_rate, order, r, acc);
                  });
}

EpochStats TrainEpochPTransR(const KnowledgeGraph& g, const PathTable* table, ModelParams& params,
                             const TrainConfig& config, double learning_rate, Rng& rng) {
  const NegativeSampler sampler(g, config.neg_mode);
  return RunEpoch(g, params, config, learning_rate, rng,
                  [&](std::span<const std::size_t> order, Rng& r, Accumulated& acc) {
                    PTransRStep(g, table, sampler, params, config, learning_rate, order, r, acc);
                  });
}

namespace {

ModelParams RandomInit(const KnowledgeGraph& g, const TrainConfig& config, Rng& rng) {
  ModelParams params(g.num_entities(), g.num_relations(), config.entity_dim, config.relation_dim);
  params.InitUniform(rng);
  return params;
}

ModelParams RunTransE(const KnowledgeGraph& g, const TrainConfig& config, Rng& rng,
                      const std::function<void(const EpochStats&, const ModelParams&)>& on_epoch) {
  if (config.entity_dim != config.relation_dim) {
    throw ConfigError("TransE requires entity_dim == relation_dim");
  }
  ModelParams params = RandomInit(g, config, rng);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochStats stats = TrainEpochTransE(g, params, config, EpochLearningRate(config, epoch), rng);
    stats.epoch = epoch + 1;
    on_epoch(stats, params);
  }
  params.SetIdentityProjections();
  return params;
}

}  // namespace

ModelParams InitTransE(const KnowledgeGraph& g, const TrainConfig& config,
                       std::vector<EpochStats>* log) {
  Rng rng(config.seed);
  return RunTransE(g, config, rng, [log](const EpochStats& s, const ModelParams&) {
    if (log != nullptr) log->push_back(s);
  });
}

namespace {

class TrainLogger {
 public:
  TrainLogger(std::ostream* out, bool wall_time)
      : out_(out), wall_time_(wall_time), start_(std::chrono::steady_clock::now()) {}

  void Write(std::string_view phase, const EpochStats& s) {
    if (out_ == nullptr) return;
    nlohmann::ordered_json j;
    j["phase"] = phase;
    j["epoch"] = s.epoch;
    j["loss"] = s.mean_loss;
    j["triple_loss"] = s.triple_loss;
    j["path_loss"] = s.path_loss;
    j["violations"] = s.violations;
    j["lr"] = s.learning_rate;
    if (wall_time_) {
      j["wall_seconds"] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    *out_ << j.dump() << '\n';
    out_->flush();
  }

 private:
  std::ostream* out_;
  bool wall_time_;
  std::chrono::steady_clock::time_point start_;
};

void Checkpoint(const TrainOptions& options, std::size_t every, std::string_view phase,
                std::size_t epoch, const ModelParams& params) {
  if (every == 0 || !options.checkpoint_dir || epoch % every != 0) return;
  std::filesystem::create_directories(*options.checkpoint_dir);
  params.Save(*options.checkpoint_dir /
              ("checkpoint-" + std::string(phase) + "-epoch" + std::to_string(epoch) + ".ptrm"));
}

}  // namespace

TrainResult Train(const KnowledgeGraph& g, const PathTable* table, const TrainConfig& config,
                  const TrainOptions& options) {
  config.Validate();
  TrainLogger logger(options.log, options.log_wall_time);
  TrainResult result;
  Rng rng(config.seed);

  if (config.stage == Stage::kTransE) {
    result.params = RunTransE(g, config, rng, [&](const EpochStats& s, const ModelParams& p) {
      result.log.push_back(s);
      logger.Write("transe", s);
      Checkpoint(options, config.checkpoint_every, "transe", s.epoch, p);
    });
    result.best_epoch = config.epochs;
    return result;
  }

  if (options.init_model) {
    result.params = ModelParams::Load(*options.init_model);
    const auto& p = result.params;
    if (p.num_entities() != g.num_entities() || p.num_relations() != g.num_relations() ||
        p.entity_dim() != config.entity_dim || p.relation_dim() != config.relation_dim) {
      throw ConfigError("initial model " + options.init_model->string() +
                        " does not match the dataset vocabulary or configured dimensions");
    }
  } else if (config.entity_dim == config.relation_dim) {
    const TrainConfig warm = config.WarmStartConfig();
    result.params = RunTransE(g, warm, rng, [&](const EpochStats& s, const ModelParams&) {
      result.warm_log.push_back(s);
      logger.Write("transe-warm", s);
    });
  } else {
    result.params = RandomInit(g, config, rng);
  }

  const PathTable* paths = config.stage == Stage::kPTransR ? table : nullptr;
  const bool early_stop = config.early_stop_patience > 0 && !g.valid().empty();
  double best_mean_rank = std::numeric_limits<double>::infinity();
  ModelParams best = result.params;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    EpochStats stats = TrainEpochPTransR(g, paths, result.params, config,
                                         EpochLearningRate(config, epoch), rng);
    stats.epoch = epoch + 1;
    result.log.push_back(stats);
    logger.Write(StageName(config.stage), stats);
    Checkpoint(options, config.checkpoint_every, StageName(config.stage), stats.epoch,
               result.params);

    if (early_stop && stats.epoch % config.validate_every == 0) {
      EvalOptions eval;
      eval.workers = config.workers;
      const auto report = Evaluate(result.params, paths, g, Split::kValid, eval);
      if (report.mean_rank_filter < best_mean_rank) {
        best_mean_rank = report.mean_rank_filter;
        best = result.params;
        result.best_epoch = stats.epoch;
        since_best = 0;
      } else {
        since_best += config.validate_every;
        if (since_best >= config.early_stop_patience) break;
      }
    }
  }
  if (early_stop && result.best_epoch > 0) {
    result.params = std::move(best);
  } else {
    result.best_epoch = config.epochs;
  }
  return result;
}

}  // namespace ptransr
