#include "ptransr/kgdata.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace ptransr {

EntityId Vocab::InternEntity(std::string_view name) {
  auto [it, inserted] =
      entity_index_.try_emplace(std::string(name), static_cast<EntityId>(entity_names_.size()));
  if (inserted) entity_names_.emplace_back(name);
  return it->second;
}

RelationId Vocab::InternRelation(std::string_view name) {
  if (augmented_) throw Error("cannot add relations to an augmented vocabulary");
  auto [it, inserted] = relation_index_.try_emplace(
      std::string(name), static_cast<RelationId>(relation_names_.size()));
  if (inserted) relation_names_.emplace_back(name);
  return it->second;
}

std::optional<EntityId> Vocab::FindEntity(std::string_view name) const {
  auto it = entity_index_.find(std::string(name));
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> Vocab::FindRelation(std::string_view name) const {
  auto it = relation_index_.find(std::string(name));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

void Vocab::AddInverseRelations() {
  if (augmented_) throw Error("vocabulary is already augmented with inverse relations");
  const std::size_t n = relation_names_.size();
  for (std::size_t r = 0; r < n; ++r) {
    std::string name = relation_names_[r] + "^-1";
    relation_index_.emplace(name, static_cast<RelationId>(relation_names_.size()));
    relation_names_.push_back(std::move(name));
  }
  augmented_ = true;
}

RelationId Vocab::InverseOf(RelationId r) const {
  if (!augmented_) throw Error("inverse relations are only defined after augmentation");
  const auto base = static_cast<RelationId>(num_base_relations());
  if (r >= 2 * base) throw Error("relation id out of range: " + std::to_string(r));
  return r < base ? r + base : r - base;
}

namespace {

template <typename Names>
void WriteNameTsv(const std::filesystem::path& path, const Names& names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < names.size(); ++i) out << names[i] << '\t' << i << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

void Vocab::WriteEntityTsv(const std::filesystem::path& path) const {
  WriteNameTsv(path, entity_names_);
}

void Vocab::WriteRelationTsv(const std::filesystem::path& path) const {
  WriteNameTsv(path, relation_names_);
}

KnowledgeGraph::KnowledgeGraph(Vocab vocab, std::vector<Triple> train, std::vector<Triple> valid,
                               std::vector<Triple> test)
    : vocab_(std::move(vocab)),
      train_(std::move(train)),
      valid_(std::move(valid)),
      test_(std::move(test)) {
  num_base_train_ = vocab_.augmented() ? train_.size() / 2 : train_.size();
  const auto check = [this](std::span<const Triple> triples) {
    for (const Triple& x : triples) {
      if (x.h >= num_entities() || x.t >= num_entities() || x.r >= num_relations()) {
        throw Error("triple references an id outside the vocabulary");
      }
    }
  };
  check(train_);
  check(valid_);
  check(test_);
  BuildIndexes();
}

std::span<const Triple> KnowledgeGraph::split(Split s) const {
  switch (s) {
    case Split::kTrain:
      return train_;
    case Split::kValid:
      return valid_;
    case Split::kTest:
      return test_;
  }
  return {};
}

void KnowledgeGraph::BuildIndexes() {
  const std::size_t n = num_entities();
  out_offsets_.assign(n + 1, 0);
  for (const Triple& x : train_) ++out_offsets_[x.h + 1];
  for (std::size_t e = 0; e < n; ++e) out_offsets_[e + 1] += out_offsets_[e];
  out_edges_.resize(train_.size());
  std::vector<std::size_t> cursor(out_offsets_.begin(), out_offsets_.end() - 1);
  for (const Triple& x : train_) out_edges_[cursor[x.h]++] = Edge{x.r, x.t};
  for (std::size_t e = 0; e < n; ++e) {
    std::sort(out_edges_.begin() + static_cast<std::ptrdiff_t>(out_offsets_[e]),
              out_edges_.begin() + static_cast<std::ptrdiff_t>(out_offsets_[e + 1]));
  }

  train_sorted_ = train_;
  std::sort(train_sorted_.begin(), train_sorted_.end());
  train_sorted_.erase(std::unique(train_sorted_.begin(), train_sorted_.end()), train_sorted_.end());

  known_hrt_.clear();
  known_hrt_.reserve(train_.size() + 2 * (valid_.size() + test_.size()));
  known_hrt_.insert(known_hrt_.end(), train_.begin(), train_.end());
  for (const auto* split : {&valid_, &test_}) {
    for (const Triple& x : *split) {
      known_hrt_.push_back(x);
      if (vocab_.augmented()) known_hrt_.push_back(Triple{x.t, vocab_.InverseOf(x.r), x.h});
    }
  }
  std::sort(known_hrt_.begin(), known_hrt_.end());
  known_hrt_.erase(std::unique(known_hrt_.begin(), known_hrt_.end()), known_hrt_.end());
  known_rth_ = known_hrt_;
  std::sort(known_rth_.begin(), known_rth_.end(), TailMajorLess{});
}

std::span<const Edge> KnowledgeGraph::OutEdges(EntityId e) const {
  return std::span<const Edge>(out_edges_).subspan(out_offsets_.at(e),
                                                   out_offsets_[e + 1] - out_offsets_[e]);
}

std::span<const Edge> KnowledgeGraph::OutEdges(EntityId e, RelationId r) const {
  const auto all = OutEdges(e);
  auto lo = std::lower_bound(all.begin(), all.end(), Edge{r, 0});
  auto hi = std::lower_bound(lo, all.end(), Edge{r + 1, 0});
  return {lo, hi};
}

bool KnowledgeGraph::IsTrain(const Triple& x) const {
  return std::binary_search(train_sorted_.begin(), train_sorted_.end(), x);
}

bool KnowledgeGraph::IsKnown(const Triple& x) const {
  return std::binary_search(known_hrt_.begin(), known_hrt_.end(), x);
}

std::span<const Triple> KnowledgeGraph::KnownWithHead(EntityId h, RelationId r) const {
  auto lo = std::lower_bound(known_hrt_.begin(), known_hrt_.end(), Triple{h, r, 0});
  auto hi = std::lower_bound(lo, known_hrt_.end(), Triple{h, r + 1, 0});
  return {lo, hi};
}

std::span<const Triple> KnowledgeGraph::KnownWithTail(RelationId r, EntityId t) const {
  auto lo = std::lower_bound(known_rth_.begin(), known_rth_.end(), Triple{0, r, t},
                             TailMajorLess{});
  auto hi = std::lower_bound(lo, known_rth_.end(), Triple{0, r, t + 1}, TailMajorLess{});
  return {lo, hi};
}

namespace {

struct RawTriple {
  std::string h, r, t;
};

std::vector<RawTriple> ReadTsv(const std::filesystem::path& path, ColumnOrder order) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<RawTriple> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 3) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 3 tab-separated fields, got " + std::to_string(fields.size()));
    }
    for (const auto f : fields) {
      if (f.empty()) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": empty field");
      }
    }
    if (order == ColumnOrder::kHRT) {
      rows.push_back({std::string(fields[0]), std::string(fields[1]), std::string(fields[2])});
    } else {
      rows.push_back({std::string(fields[0]), std::string(fields[2]), std::string(fields[1])});
    }
  }
  if (rows.empty()) throw ParseError(path.string() + ": file contains no triples");
  return rows;
}

}  // namespace

KnowledgeGraph LoadDataset(const DatasetPaths& paths, ColumnOrder order) {
  const auto train_rows = ReadTsv(paths.train, order);
  const auto valid_rows = ReadTsv(paths.valid, order);
  const auto test_rows = ReadTsv(paths.test, order);

  Vocab vocab;
  const auto intern = [&vocab](const std::vector<RawTriple>& rows) {
    std::vector<Triple> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
      Triple x;
      x.h = vocab.InternEntity(row.h);
      x.r = vocab.InternRelation(row.r);
      x.t = vocab.InternEntity(row.t);
      out.push_back(x);
    }
    return out;
  };
  auto train = intern(train_rows);
  auto valid = intern(valid_rows);
  auto test = intern(test_rows);
  return KnowledgeGraph(std::move(vocab), std::move(train), std::move(valid), std::move(test));
}

DatasetPaths ResolveDatasetDir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("dataset directory not found: " + dir.string());
  DatasetPaths paths{dir / "train.txt", dir / "valid.txt", dir / "test.txt"};
  if (fs::exists(paths.train)) return paths;
  // FB15k ships as freebase_mtr100_mte100-{train,valid,test}.txt.
  std::vector<fs::path> entries;
  for (const auto& entry : fs::directory_iterator(dir)) entries.push_back(entry.path());
  std::sort(entries.begin(), entries.end());
  const auto find_suffix = [&](std::string_view suffix) -> fs::path {
    for (const auto& p : entries) {
      const std::string name = p.filename().string();
      if (name.size() >= suffix.size() &&
          name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
        return p;
      }
    }
    throw Error("no *" + std::string(suffix) + " file in " + dir.string());
  };
  return {find_suffix("-train.txt"), find_suffix("-valid.txt"), find_suffix("-test.txt")};
}

KnowledgeGraph AugmentInverse(const KnowledgeGraph& g) {
  if (g.augmented()) throw Error("graph is already augmented with inverse relations");
  Vocab vocab = g.vocab();
  vocab.AddInverseRelations();
  std::vector<Triple> train(g.train().begin(), g.train().end());
  train.reserve(2 * train.size());
  for (std::size_t i = 0, n = g.train().size(); i < n; ++i) {
    const Triple x = train[i];
    train.push_back(Triple{x.t, vocab.InverseOf(x.r), x.h});
  }
  return KnowledgeGraph(std::move(vocab), std::move(train),
                        std::vector<Triple>(g.valid().begin(), g.valid().end()),
                        std::vector<Triple>(g.test().begin(), g.test().end()));
}

std::string_view CategoryName(RelationCategory c) {
  switch (c) {
    case RelationCategory::kOneToOne:
      return "1-to-1";
    case RelationCategory::kOneToMany:
      return "1-to-N";
    case RelationCategory::kManyToOne:
      return "N-to-1";
    case RelationCategory::kManyToMany:
      return "N-to-N";
  }
  return "?";
}

RelationCategory CategoryFor(double heads_per_tail, double tails_per_head, double cutoff) {
  const bool one_head = heads_per_tail < cutoff;
  const bool one_tail = tails_per_head < cutoff;
  if (one_head && one_tail) return RelationCategory::kOneToOne;
  if (one_head) return RelationCategory::kOneToMany;
  if (one_tail) return RelationCategory::kManyToOne;
  return RelationCategory::kManyToMany;
}

CategoryTable ClassifyRelations(const KnowledgeGraph& g, double cutoff) {
  const std::size_t num_rel = g.vocab().num_base_relations();
  std::vector<Triple> distinct(g.base_train().begin(), g.base_train().end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<std::size_t> count(num_rel, 0), head_groups(num_rel, 0), tail_groups(num_rel, 0);
  // Sorted by (h, r, t): consecutive (h, r) runs are distinct head groups.
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    const Triple& x = distinct[i];
    ++count[x.r];
    if (i == 0 || distinct[i - 1].h != x.h || distinct[i - 1].r != x.r) ++head_groups[x.r];
  }
  std::sort(distinct.begin(), distinct.end(), TailMajorLess{});
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    const Triple& x = distinct[i];
    if (i == 0 || distinct[i - 1].r != x.r || distinct[i - 1].t != x.t) ++tail_groups[x.r];
  }

  CategoryTable table;
  table.by_relation.resize(num_rel);
  for (RelationId r = 0; r < num_rel; ++r) {
    if (count[r] == 0) {
      table.missing.push_back(r);
      continue;
    }
    RelationStats s;
    s.support = count[r];
    s.heads_per_tail = static_cast<double>(count[r]) / static_cast<double>(tail_groups[r]);
    s.tails_per_head = static_cast<double>(count[r]) / static_cast<double>(head_groups[r]);
    s.category = CategoryFor(s.heads_per_tail, s.tails_per_head, cutoff);
    table.by_relation[r] = s;
  }
  return table;
}

FrequencyBucket BucketForCount(std::size_t count) {
  if (count == 0) throw Error("frequency bucket undefined for a relation with no train triples");
  if (count <= 3) return FrequencyBucket::k1To3;
  if (count <= 15) return FrequencyBucket::k4To15;
  if (count <= 50) return FrequencyBucket::k16To50;
  if (count <= 300) return FrequencyBucket::k51To300;
  return FrequencyBucket::kOver300;
}

std::string_view BucketName(FrequencyBucket b) {
  switch (b) {
    case FrequencyBucket::k1To3:
      return "1-3";
    case FrequencyBucket::k4To15:
      return "4-15";
    case FrequencyBucket::k16To50:
      return "16-50";
    case FrequencyBucket::k51To300:
      return "51-300";
    case FrequencyBucket::kOver300:
      return ">300";
  }
  return "?";
}

std::vector<std::size_t> RelationFrequencies(const KnowledgeGraph& g) {
  std::vector<std::size_t> freq(g.vocab().num_base_relations(), 0);
  for (const Triple& x : g.base_train()) ++freq[x.r];
  return freq;
}

DatasetSummary Summarize(const KnowledgeGraph& g) {
  return {g.num_entities(), g.vocab().num_base_relations(), g.base_train().size(),
          g.valid().size(), g.test().size()};
}

}  // namespace ptransr
