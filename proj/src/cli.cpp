#include "ptransr/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ptransr/evaluator.hpp"
#include "ptransr/kgdata.hpp"
#include "ptransr/model.hpp"
#include "ptransr/paths.hpp"
#include "ptransr/synth.hpp"
#include "ptransr/trainer.hpp"

namespace ptransr::cli {

namespace fs = std::filesystem;

namespace {

std::string Format(const char* fmt, auto... args) {
  const int n = std::snprintf(nullptr, 0, fmt, args...);
  std::string s(static_cast<std::size_t>(n), '\0');
  std::snprintf(s.data(), s.size() + 1, fmt, args...);
  return s;
}

std::string Num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

// key=value lines in insertion order.
class Echo {
 public:
  Echo& Add(const std::string& key, const std::string& value) {
    lines_ += key + "=" + value + "\n";
    return *this;
  }
  Echo& Add(const std::string& key, double value) { return Add(key, Num(value)); }
  Echo& Add(const std::string& key, std::size_t value) { return Add(key, std::to_string(value)); }
  Echo& Append(const std::string& lines) {
    lines_ += lines;
    return *this;
  }
  const std::string& str() const { return lines_; }

 private:
  std::string lines_;
};

std::string FlagFor(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

void RequireFile(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw Error("missing " + what + ": " + path.string());
}

fs::path DataDir(const std::string& flag) {
  std::string dir = flag;
  if (dir.empty()) {
    if (const char* env = std::getenv(kDataDirEnv)) dir = env;
  }
  if (dir.empty()) {
    throw ConfigError(std::string("no dataset directory: pass --data-dir or set ") + kDataDirEnv);
  }
  if (!fs::is_directory(dir)) throw Error("missing dataset directory: " + dir);
  return dir;
}

ColumnOrder ParseColumnOrder(const std::string& s) {
  if (s == "hrt") return ColumnOrder::kHRT;
  if (s == "htr") return ColumnOrder::kHTR;
  throw ConfigError("unknown column order '" + s + "' (expected hrt or htr)");
}

fs::path RunDir(const std::string& flag, std::uint64_t seed) {
  if (!flag.empty()) return flag;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  return fs::path("runs") / (std::string(stamp) + "-seed" + std::to_string(seed));
}

void EnsureParent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

void WriteText(const fs::path& file, const std::string& text) {
  EnsureParent(file);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << text;
}

KnowledgeGraph LoadAugmented(const fs::path& dir, ColumnOrder order) {
  return AugmentInverse(LoadDataset(ResolveDatasetDir(dir), order));
}

void CheckModelMatches(const ModelParams& m, const KnowledgeGraph& g, const fs::path& path) {
  if (m.num_entities() != g.num_entities() || m.num_relations() != g.num_relations()) {
    throw Error(Format("model %s has %zu entities / %zu relations but the dataset has %zu / %zu",
                       path.string().c_str(), m.num_entities(), m.num_relations(),
                       g.num_entities(), g.num_relations()));
  }
}

// ---- prepare ---------------------------------------------------------------

struct PrepareArgs {
  std::string data_dir, out_dir, column_order = "hrt";
  double cutoff = 1.5;
};

int Prepare(const PrepareArgs& a, std::ostream& out) {
  const fs::path data = DataDir(a.data_dir);
  const ColumnOrder order = ParseColumnOrder(a.column_order);
  if (!(a.cutoff > 0.0)) throw ConfigError("category cutoff must be positive");
  const DatasetPaths files = ResolveDatasetDir(data);

  const KnowledgeGraph base = LoadDataset(files, order);
  const KnowledgeGraph g = AugmentInverse(base);
  const DatasetSummary s = Summarize(base);
  const CategoryTable cats = ClassifyRelations(g, a.cutoff);
  const std::vector<std::size_t> freq = RelationFrequencies(g);

  std::array<std::size_t, 4> by_category{};
  std::array<std::size_t, kNumFrequencyBuckets> by_bucket{};
  nlohmann::ordered_json relations = nlohmann::ordered_json::array();
  for (RelationId r = 0; r < freq.size(); ++r) {
    nlohmann::ordered_json row;
    row["id"] = r;
    row["name"] = g.vocab().RelationName(r);
    row["train_count"] = freq[r];
    if (const auto& st = cats.by_relation[r]) {
      ++by_category[static_cast<std::size_t>(st->category)];
      ++by_bucket[static_cast<std::size_t>(BucketForCount(freq[r]))];
      row["category"] = CategoryName(st->category);
      row["heads_per_tail"] = st->heads_per_tail;
      row["tails_per_head"] = st->tails_per_head;
      row["frequency_bucket"] = BucketName(BucketForCount(freq[r]));
    } else {
      row["category"] = nullptr;
    }
    relations.push_back(row);
  }

  Echo echo;
  echo.Add("verb", std::string("prepare"))
      .Add("data_dir", data.string())
      .Add("column_order", a.column_order)
      .Add("category_cutoff", a.cutoff);

  nlohmann::ordered_json j;
  j["config"] = echo.str();
  j["entities"] = s.entities;
  j["relations"] = s.relations;
  j["train"] = s.train;
  j["valid"] = s.valid;
  j["test"] = s.test;
  nlohmann::ordered_json jc;
  for (std::size_t c = 0; c < 4; ++c) {
    jc[std::string(CategoryName(static_cast<RelationCategory>(c)))] = by_category[c];
  }
  j["categories"] = jc;
  nlohmann::ordered_json jb;
  for (std::size_t b = 0; b < kNumFrequencyBuckets; ++b) {
    jb[std::string(BucketName(static_cast<FrequencyBucket>(b)))] = by_bucket[b];
  }
  j["frequency_buckets"] = jb;
  j["relations_without_train"] = cats.missing.size();
  j["relation_table"] = relations;

  const fs::path dir = RunDir(a.out_dir, 0);
  fs::create_directories(dir);
  g.vocab().WriteEntityTsv(dir / "entity2id.tsv");
  g.vocab().WriteRelationTsv(dir / "relation2id.tsv");
  WriteText(dir / "dataset_summary.json", j.dump(2) + "\n");

  out << Format("entities   %zu\nrelations  %zu\ntrain      %zu\nvalid      %zu\ntest       %zu\n",
                s.entities, s.relations, s.train, s.valid, s.test);
  for (std::size_t c = 0; c < 4; ++c) {
    out << Format("%-5s      %zu\n",
                  std::string(CategoryName(static_cast<RelationCategory>(c))).c_str(),
                  by_category[c]);
  }
  out << "wrote " << dir.string() << "\n";
  return 0;
}

// ---- extract-paths ---------------------------------------------------------

struct ExtractArgs {
  std::string data_dir, out, tsv, column_order = "hrt";
  double floor = 0.01;
  std::size_t cap = 200;
  std::size_t workers = 1;
};

int ExtractPaths(const ExtractArgs& a, std::ostream& out) {
  const fs::path data = DataDir(a.data_dir);
  const ColumnOrder order = ParseColumnOrder(a.column_order);
  PathTableOptions options;
  options.reliability_floor = a.floor;
  options.max_paths_per_pair = a.cap;
  options.workers = a.workers;
  if (!(a.floor >= 0.0 && a.floor <= 1.0)) throw ConfigError("--floor must lie in [0, 1]");
  if (a.cap == 0) throw ConfigError("--cap must be at least 1");
  if (a.workers == 0) throw ConfigError("--workers must be at least 1");
  ResolveDatasetDir(data);

  const KnowledgeGraph g = LoadAugmented(data, order);
  PathTableSummary summary;
  const PathTable table = BuildPathTable(g, options, &summary);

  const fs::path file = a.out.empty() ? RunDir({}, 0) / "paths.ptbl" : fs::path(a.out);
  EnsureParent(file);
  table.Save(file);
  if (!a.tsv.empty()) {
    EnsureParent(a.tsv);
    std::ofstream f(a.tsv, std::ios::binary);
    if (!f) throw Error("cannot write " + a.tsv);
    table.WriteTsv(f);
  }

  const double drop = summary.candidate_paths == 0
                          ? 0.0
                          : 1.0 - static_cast<double>(summary.kept_paths) /
                                      static_cast<double>(summary.candidate_paths);
  Echo echo;
  echo.Add("verb", std::string("extract-paths"))
      .Add("data_dir", data.string())
      .Add("column_order", a.column_order)
      .Add("floor", a.floor)
      .Add("cap", a.cap)
      .Add("workers", a.workers);
  nlohmann::ordered_json j;
  j["config"] = echo.str();
  j["pairs"] = summary.pairs;
  j["stored_pairs"] = table.num_pairs();
  j["candidate_paths"] = summary.candidate_paths;
  j["kept_paths"] = summary.kept_paths;
  j["capped_pairs"] = summary.capped_pairs;
  j["drop_rate"] = drop;
  WriteText(file.string() + ".summary.json", j.dump(2) + "\n");

  out << Format("pairs %zu  paths %zu/%zu  drop rate %.4f  capped pairs %zu\n", summary.pairs,
                summary.kept_paths, summary.candidate_paths, drop, summary.capped_pairs);
  out << "wrote " << file.string() << "\n";
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data_dir, config, paths, init, out, log, checkpoint_dir, column_order = "hrt";
  std::map<std::string, std::string> overrides;  // config key -> flag value
  bool linear_decay = false;
  bool log_wall_time = false;
};

int TrainCmd(TrainArgs& a, CLI::App& cmd, std::ostream& out) {
  TrainConfig config;
  if (!a.config.empty()) {
    RequireFile(a.config, "config file");
    ApplyConfigValues(config, ReadKeyValueFile(a.config));
  }
  std::map<std::string, std::string> given;
  for (const auto& [key, value] : a.overrides) {
    if (cmd.get_option(FlagFor(key))->count() > 0) given[key] = value;
  }
  if (a.linear_decay) given["linear_decay"] = "true";
  ApplyConfigValues(config, given);
  config.Validate();

  const fs::path data = DataDir(a.data_dir);
  const ColumnOrder order = ParseColumnOrder(a.column_order);
  ResolveDatasetDir(data);
  if (config.stage == Stage::kPTransR) {
    if (a.paths.empty()) {
      throw ConfigError("missing path table: --stage ptransr requires --paths <table.ptbl>");
    }
    RequireFile(a.paths, "path table");
  } else if (!a.paths.empty()) {
    RequireFile(a.paths, "path table");
  }
  if (!a.init.empty()) RequireFile(a.init, "initial model");

  const KnowledgeGraph g = LoadAugmented(data, order);
  std::optional<PathTable> table;
  if (!a.paths.empty()) table = PathTable::Load(a.paths);
  TrainOptions options;
  if (!a.init.empty()) {
    CheckModelMatches(ModelParams::Load(a.init), g, a.init);
    options.init_model = fs::path(a.init);
  }

  const fs::path dir = RunDir({}, config.seed);
  const fs::path model_file = a.out.empty() ? dir / "model.ptrm" : fs::path(a.out);
  const fs::path log_file = a.log.empty() ? fs::path(model_file.string() + ".log.jsonl")
                                          : fs::path(a.log);
  if (!a.checkpoint_dir.empty()) options.checkpoint_dir = fs::path(a.checkpoint_dir);
  options.log_wall_time = a.log_wall_time;

  Echo echo;
  echo.Add("verb", std::string("train"))
      .Add("data_dir", data.string())
      .Add("column_order", a.column_order)
      .Add("paths", a.paths)
      .Add("init", a.init)
      .Append(config.ToKeyValue());

  EnsureParent(log_file);
  std::ofstream log(log_file, std::ios::binary);
  if (!log) throw Error("cannot write " + log_file.string());
  options.log = &log;
  const auto start = std::chrono::steady_clock::now();
  const TrainResult result = Train(g, table ? &*table : nullptr, config, options);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  EnsureParent(model_file);
  result.params.Save(model_file);
  WriteText(model_file.string() + ".config", echo.str());

  if (!result.log.empty()) {
    const EpochStats& last = result.log.back();
    out << Format("stage %s  epochs %zu  final loss %.6f  (%.1fs)\n",
                  std::string(StageName(config.stage)).c_str(), result.log.size(),
                  last.mean_loss, seconds);
  }
  out << "wrote " << model_file.string() << "\n";
  return 0;
}

// ---- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::string data_dir, model, paths, out_dir, column_order = "hrt";
  std::string split = "test", protocol = "both", tie = "pessimistic";
  std::size_t rerank_k = 500;
  std::size_t workers = 1;
  double cutoff = 1.5;
};

int EvaluateCmd(const EvaluateArgs& a, std::ostream& out) {
  const fs::path data = DataDir(a.data_dir);
  const ColumnOrder order = ParseColumnOrder(a.column_order);
  const Split split = ParseSplit(a.split);
  const Protocol protocol = ParseProtocol(a.protocol);
  EvalOptions options;
  options.rerank_k = a.rerank_k;
  options.tie = ParseTiePolicy(a.tie);
  options.workers = a.workers;
  options.category_cutoff = a.cutoff;
  if (a.rerank_k == 0) throw ConfigError("--rerank-k must be at least 1");
  if (a.workers == 0) throw ConfigError("--workers must be at least 1");
  if (a.model.empty()) throw ConfigError("--model is required");
  RequireFile(a.model, "model");
  if (!a.paths.empty()) RequireFile(a.paths, "path table");
  ResolveDatasetDir(data);

  const KnowledgeGraph g = LoadAugmented(data, order);
  const ModelParams model = ModelParams::Load(a.model);
  CheckModelMatches(model, g, a.model);
  std::optional<PathTable> table;
  if (!a.paths.empty()) table = PathTable::Load(a.paths);

  Echo echo;
  echo.Add("verb", std::string("evaluate"))
      .Add("data_dir", data.string())
      .Add("column_order", a.column_order)
      .Add("model", a.model)
      .Add("paths", a.paths)
      .Add("split", a.split)
      .Add("protocol", a.protocol)
      .Add("rerank_k", a.rerank_k)
      .Add("tie", a.tie)
      .Add("workers", a.workers)
      .Add("category_cutoff", a.cutoff);
  const fs::path sidecar = a.model + ".config";
  if (fs::is_regular_file(sidecar)) {
    std::ifstream f(sidecar, std::ios::binary);
    std::string line;
    while (std::getline(f, line)) {
      if (!line.empty()) echo.Append("model." + line + "\n");
    }
  }

  const RankReport report = Evaluate(model, table ? &*table : nullptr, g, split, options);

  const fs::path dir = RunDir(a.out_dir, 0);
  fs::create_directories(dir);
  std::ostringstream text;
  WriteReportText(text, report, protocol, echo.str());
  WriteText(dir / "report.txt", text.str());
  {
    std::ofstream f(dir / "report.json", std::ios::binary);
    WriteReportJson(f, report, echo.str());
  }
  {
    std::ofstream f(dir / "ranks.csv", std::ios::binary);
    WriteRanksCsv(f, report, g.vocab());
  }
  out << text.str();
  out << "wrote " << dir.string() << "\n";
  return 0;
}

// ---- synth-kg --------------------------------------------------------------

struct SynthArgs {
  SyntheticKGSpec spec;
  std::vector<std::string> rules;
  std::string out;
};

int SynthKg(SynthArgs& a, std::ostream& out) {
  if (!a.rules.empty()) {
    a.spec.rules.clear();
    for (const auto& text : a.rules) a.spec.rules.push_back(ParseRule(text));
  }
  a.spec.Validate();
  const SyntheticKG kg = GenerateSyntheticKG(a.spec);

  Echo echo;
  echo.Add("verb", std::string("synth-kg"))
      .Add("entities", a.spec.n_entities)
      .Add("relations", a.spec.n_relations);
  for (const auto& r : a.spec.rules) {
    echo.Add("rule", Format("%u,%u:%u", r.first, r.second, r.implied));
  }
  echo.Add("noise", a.spec.noise)
      .Add("holdout", a.spec.holdout)
      .Add("valid_fraction", a.spec.valid_fraction)
      .Add("fanout", a.spec.fanout)
      .Add("seed", static_cast<std::size_t>(a.spec.seed));

  const fs::path dir = RunDir(a.out, a.spec.seed);
  WriteDataset(kg, dir);
  WriteText(dir / "synth.config", echo.str());
  out << Format("train %zu (noise %zu)  valid %zu  test %zu  implied facts %zu\n", kg.train.size(),
                kg.noise_facts, kg.valid.size(), kg.test.size(), kg.implied_facts);
  out << "wrote " << dir.string() << "\n";
  return 0;
}

// ---- inspect ---------------------------------------------------------------

struct InspectArgs {
  std::string data_dir, model, paths, entity, relation, column_order = "hrt";
  std::size_t neighbors = 10;
  std::size_t top = 10;
};

double Distance(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::string PathName(const Vocab& v, const RelPath& p) {
  std::string s(v.RelationName(p.first()));
  if (p.length() == 2) s += " . " + std::string(v.RelationName(p.second()));
  return s;
}

int Inspect(const InspectArgs& a, std::ostream& out) {
  const fs::path data = DataDir(a.data_dir);
  const ColumnOrder order = ParseColumnOrder(a.column_order);
  if (a.model.empty()) throw ConfigError("--model is required");
  RequireFile(a.model, "model");
  if (!a.paths.empty()) RequireFile(a.paths, "path table");
  if (!a.relation.empty() && a.paths.empty()) {
    throw ConfigError("--relation needs --paths to list related paths");
  }
  ResolveDatasetDir(data);

  const KnowledgeGraph g = LoadAugmented(data, order);
  const Vocab& vocab = g.vocab();
  const ModelParams model = ModelParams::Load(a.model);
  CheckModelMatches(model, g, a.model);

  std::optional<EntityId> entity;
  if (!a.entity.empty()) {
    entity = vocab.FindEntity(a.entity);
    if (!entity) throw ConfigError("unknown entity '" + a.entity + "'");
  }
  std::optional<RelationId> relation;
  if (!a.relation.empty()) {
    relation = vocab.FindRelation(a.relation);
    if (!relation) throw ConfigError("unknown relation '" + a.relation + "'");
  }

  out << Format("model: %zu entities, %zu relations, k=%zu, d=%zu\n", model.num_entities(),
                model.num_relations(), model.entity_dim(), model.relation_dim());

  if (entity) {
    std::vector<std::pair<double, EntityId>> near;
    for (EntityId e = 0; e < model.num_entities(); ++e) {
      if (e != *entity) near.emplace_back(Distance(model.entity(*entity), model.entity(e)), e);
    }
    const std::size_t n = std::min(a.neighbors, near.size());
    std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(n), near.end());
    out << "nearest entities to " << a.entity << ":\n";
    for (std::size_t i = 0; i < n; ++i) {
      out << Format("  %-30s %.6f\n", std::string(vocab.EntityName(near[i].second)).c_str(),
                    near[i].first);
    }
  }

  if (!a.paths.empty()) {
    const PathTable table = PathTable::Load(a.paths);
    std::vector<RelationId> targets;
    if (relation) {
      targets.push_back(*relation);
    } else {
      for (RelationId r = 0; r < model.num_relations(); ++r) targets.push_back(r);
    }
    for (RelationId r : targets) {
      std::vector<const RelatednessEntry*> rows;
      for (const auto& e : table.relatedness_entries()) {
        if (e.r == r && !e.path.IsSingle(r)) rows.push_back(&e);
      }
      std::stable_sort(rows.begin(), rows.end(), [](const auto* x, const auto* y) {
        return x->value > y->value;
      });
      if (rows.empty()) continue;
      out << "paths for " << vocab.RelationName(r) << "  (P(r|p), ||p - r||):\n";
      for (std::size_t i = 0; i < std::min(a.top, rows.size()); ++i) {
        const std::vector<double> p = PathVector(model, rows[i]->path);
        const auto rv = model.relation(r);
        double s = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) s += (p[j] - rv[j]) * (p[j] - rv[j]);
        out << Format("  %-40s %.4f  %.6f\n", PathName(vocab, rows[i]->path).c_str(),
                      rows[i]->value, std::sqrt(s));
      }
    }
  }
  return 0;
}

void AddDataOptions(CLI::App* cmd, std::string& data_dir, std::string& column_order) {
  cmd->add_option("--data-dir", data_dir,
                  std::string("dataset directory (default: $") + kDataDirEnv + ")");
  cmd->add_option("--column-order", column_order, "hrt or htr")->capture_default_str();
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge graph embedding with relation paths"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every verb");

  PrepareArgs prepare;
  auto* prepare_cmd = app.add_subcommand("prepare", "load a dataset, write vocab and summary");
  AddDataOptions(prepare_cmd, prepare.data_dir, prepare.column_order);
  prepare_cmd->add_option("--out-dir", prepare.out_dir, "output directory (default: run dir)");
  prepare_cmd->add_option("--category-cutoff", prepare.cutoff)->capture_default_str();

  ExtractArgs extract;
  auto* extract_cmd = app.add_subcommand("extract-paths", "build the PCRA path table");
  AddDataOptions(extract_cmd, extract.data_dir, extract.column_order);
  extract_cmd->add_option("--floor", extract.floor, "reliability floor")->capture_default_str();
  extract_cmd->add_option("--cap", extract.cap, "max paths per pair")->capture_default_str();
  extract_cmd->add_option("--out", extract.out, "output .ptbl file (default: run dir)");
  extract_cmd->add_option("--tsv", extract.tsv, "also write a TSV dump");
  extract_cmd->add_option("--workers", extract.workers)->capture_default_str();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train TransE, TransR or PTransR");
  AddDataOptions(train_cmd, train.data_dir, train.column_order);
  train_cmd->add_option("--config", train.config, "key=value config file");
  train_cmd->add_option("--paths", train.paths, "path table (.ptbl)");
  train_cmd->add_option("--init", train.init, "initial model (.ptrm)");
  train_cmd->add_option("--out", train.out, "output model file (default: run dir)");
  train_cmd->add_option("--log", train.log, "JSON-lines training log");
  train_cmd->add_option("--checkpoint-dir", train.checkpoint_dir, "directory for periodic model snapshots");
  train_cmd->add_flag("--linear-decay", train.linear_decay, "decay the learning rate linearly");
  train_cmd->add_flag("--log-wall-time", train.log_wall_time,
                      "record wall-clock seconds in the log (breaks byte determinism)");
  for (const char* key :
       {"stage", "lr", "learning_rate", "margin", "margin_triple", "margin_path", "dim", "entity_dim",
        "relation_dim", "batch_size", "epochs", "norm", "neg_mode", "seed", "workers",
        "warm_epochs", "warm_learning_rate", "warm_margin", "checkpoint_every",
        "early_stop_patience", "validate_every"}) {
    train.overrides[key];
  }
  for (auto& [key, value] : train.overrides) {
    train_cmd->add_option(FlagFor(key), value, "overrides config key " + key);
  }

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "rank entities and report MeanRank / Hits@10");
  AddDataOptions(eval_cmd, eval.data_dir, eval.column_order);
  eval_cmd->add_option("--model", eval.model, "model file (.ptrm)");
  eval_cmd->add_option("--paths", eval.paths, "path table (.ptbl) for the path term");
  eval_cmd->add_option("--split", eval.split, "valid or test")->capture_default_str();
  eval_cmd->add_option("--protocol", eval.protocol, "raw, filter or both")->capture_default_str();
  eval_cmd->add_option("--rerank-k", eval.rerank_k)->capture_default_str();
  eval_cmd->add_option("--tie", eval.tie, "pessimistic or mean")->capture_default_str();
  eval_cmd->add_option("--workers", eval.workers)->capture_default_str();
  eval_cmd->add_option("--category-cutoff", eval.cutoff)->capture_default_str();
  eval_cmd->add_option("--out-dir", eval.out_dir, "report directory (default: run dir)");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth-kg", "generate a composition-rule synthetic KG");
  synth_cmd->add_option("--entities", synth.spec.n_entities)->capture_default_str();
  synth_cmd->add_option("--relations", synth.spec.n_relations)->capture_default_str();
  synth_cmd->add_option("--rule", synth.rules, "first,second:implied (repeatable; default 0,1:2)");
  synth_cmd->add_option("--noise", synth.spec.noise)->capture_default_str();
  synth_cmd->add_option("--holdout", synth.spec.holdout)->capture_default_str();
  synth_cmd->add_option("--valid-fraction", synth.spec.valid_fraction)->capture_default_str();
  synth_cmd->add_option("--fanout", synth.spec.fanout)->capture_default_str();
  synth_cmd->add_option("--seed", synth.spec.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "output dataset directory (default: run dir)");

  InspectArgs inspect;
  auto* inspect_cmd = app.add_subcommand("inspect", "nearest entities and path-vs-relation distances");
  AddDataOptions(inspect_cmd, inspect.data_dir, inspect.column_order);
  inspect_cmd->add_option("--model", inspect.model, "model file (.ptrm)");
  inspect_cmd->add_option("--paths", inspect.paths, "path table (.ptbl)");
  inspect_cmd->add_option("--entity", inspect.entity, "entity name for neighbors");
  inspect_cmd->add_option("--neighbors", inspect.neighbors)->capture_default_str();
  inspect_cmd->add_option("--relation", inspect.relation, "relation name for path distances");
  inspect_cmd->add_option("--top", inspect.top, "paths per relation")->capture_default_str();

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.push_back("ptransr");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (prepare_cmd->parsed()) return Prepare(prepare, out);
    if (extract_cmd->parsed()) return ExtractPaths(extract, out);
    if (train_cmd->parsed()) return TrainCmd(train, *train_cmd, out);
    if (eval_cmd->parsed()) return EvaluateCmd(eval, out);
    if (synth_cmd->parsed()) return SynthKg(synth, out);
    if (inspect_cmd->parsed()) return Inspect(inspect, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace ptransr::cli
