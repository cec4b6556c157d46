#include "ptransr/model.hpp"

#include <algorithm>
#include <fstream>

#include "ptransr/binary_io.hpp"

namespace ptransr {

namespace {
constexpr std::uint32_t kModelVersion = 1;
}

ModelParams::ModelParams(std::size_t num_entities, std::size_t num_relations,
                         std::size_t entity_dim, std::size_t relation_dim)
    : num_entities_(num_entities),
      num_relations_(num_relations),
      entity_dim_(entity_dim),
      relation_dim_(relation_dim),
      entities_(num_entities * entity_dim, 0.0f),
      relations_(num_relations * relation_dim, 0.0f),
      projections_(num_relations * relation_dim * entity_dim, 0.0f) {
  if (entity_dim == 0 || relation_dim == 0) throw ConfigError("embedding dimensions must be positive");
}

void ModelParams::SetIdentityProjections() {
  std::fill(projections_.begin(), projections_.end(), 0.0f);
  const std::size_t diag = std::min(entity_dim_, relation_dim_);
  for (RelationId r = 0; r < num_relations_; ++r) {
    auto m = projection(r);
    for (std::size_t i = 0; i < diag; ++i) m[i * entity_dim_ + i] = 1.0f;
  }
}

void ModelParams::InitUniform(Rng& rng) {
  const auto fill = [&rng](std::vector<float>& data, std::size_t dim, std::size_t rows) {
    const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : data) x = static_cast<float>(dist(rng));
    for (std::size_t i = 0; i < rows; ++i) {
      NormalizeToUnit(std::span<float>(data).subspan(i * dim, dim));
    }
  };
  fill(entities_, entity_dim_, num_entities_);
  fill(relations_, relation_dim_, num_relations_);
  SetIdentityProjections();
}

bool ModelParams::AllFinite() const {
  const auto finite = [](const std::vector<float>& v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
  };
  return finite(entities_) && finite(relations_) && finite(projections_);
}

void ModelParams::Write(std::ostream& out) const {
  io::WriteMagic(out, "PTRM");
  io::WriteU32(out, kModelVersion);
  io::WriteU32(out, static_cast<std::uint32_t>(entity_dim_));
  io::WriteU32(out, static_cast<std::uint32_t>(relation_dim_));
  io::WriteU32(out, static_cast<std::uint32_t>(num_entities_));
  io::WriteU32(out, static_cast<std::uint32_t>(num_relations_));
  for (const auto* block : {&entities_, &relations_, &projections_}) {
    for (float x : *block) io::WriteF32(out, x);
  }
}

ModelParams ModelParams::Read(std::istream& in) {
  io::ExpectMagic(in, "PTRM");
  const auto version = io::ReadU32(in);
  if (version != kModelVersion) throw Error("unsupported model version " + std::to_string(version));
  const std::size_t k = io::ReadU32(in);
  const std::size_t d = io::ReadU32(in);
  const std::size_t n_ent = io::ReadU32(in);
  const std::size_t n_rel = io::ReadU32(in);
  ModelParams m(n_ent, n_rel, k, d);
  for (auto* block : {&m.entities_, &m.relations_, &m.projections_}) {
    for (float& x : *block) x = io::ReadF32(in);
  }
  return m;
}

void ModelParams::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  Write(out);
  if (!out) throw Error("write failed: " + path.string());
}

ModelParams ModelParams::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model " + path.string());
  return Read(in);
}

double ScoreTransE(const ModelParams& m, EntityId h, RelationId r, EntityId t, Norm norm) {
  return TransEDistance(m.entity(h), m.relation(r), m.entity(t), norm);
}

double ScoreTransR(const ModelParams& m, EntityId h, RelationId r, EntityId t) {
  return TransREnergy(m.projection(r), m.entity(h), m.relation(r), m.entity(t));
}

std::vector<double> PathVector(const ModelParams& m, const RelPath& p) {
  if (p.length() == 1) return ComposePath<float>(m.relation(p.first()), {});
  return ComposePath(m.relation(p.first()), m.relation(p.second()));
}

double PathEnergy(const ModelParams& m, const RelPath& p, RelationId r, double reliability) {
  if (reliability < 0.0) throw Error("path reliability must be non-negative");
  return PathEnergyKernel(std::span<const double>(PathVector(m, p)), m.relation(r), reliability);
}

double PathTerm(const ModelParams& m, const PathTable* table, EntityId h, RelationId r,
                EntityId t) {
  if (table == nullptr) return 0.0;
  double z = 0.0, energy = 0.0;
  for (const auto& entry : table->Paths(h, t)) {
    if (entry.path.IsSingle(r)) continue;
    const double reliability = table->Reliability(r, entry);
    if (reliability <= 0.0) continue;
    z += reliability;
    energy += PathEnergy(m, entry.path, r, reliability);
  }
  return z > 0.0 ? energy / z : 0.0;
}

double ScorePTransR(const ModelParams& m, const PathTable* table, EntityId h, RelationId r,
                    EntityId t) {
  return ScoreTransR(m, h, r, t) + PathTerm(m, table, h, r, t);
}

TransRGradient GradScoreTransR(const ModelParams& m, EntityId h, RelationId r, EntityId t) {
  return TransREnergyGrad(m.projection(r), m.entity(h), m.relation(r), m.entity(t));
}

void NormalizeToUnit(std::span<float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * static_cast<double>(x);
  const double norm = std::sqrt(sq);
  if (norm == 0.0 || std::abs(norm - 1.0) <= kUnitNormTolerance) return;
  for (float& x : v) x = static_cast<float>(static_cast<double>(x) / norm);
}

void ProjectConstraints(ModelParams& m, TouchedRows touched) {
  auto& ents = touched.entities;
  std::sort(ents.begin(), ents.end());
  ents.erase(std::unique(ents.begin(), ents.end()), ents.end());
  for (EntityId e : ents) NormalizeToUnit(m.entity(e));

  auto& rels = touched.relations;
  std::sort(rels.begin(), rels.end());
  rels.erase(std::unique(rels.begin(), rels.end()), rels.end());
  for (RelationId r : rels) NormalizeToUnit(m.relation(r));

  auto& proj = touched.projected;
  std::sort(proj.begin(), proj.end());
  proj.erase(std::unique(proj.begin(), proj.end()), proj.end());
  std::vector<double> buf(m.relation_dim());
  for (const auto& [r, e] : proj) {
    auto matrix = m.projection(r);
    Project<float>(matrix, m.entity(e), buf);
    double sq = 0.0;
    for (double x : buf) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm <= 1.0 + kProjectedNormTolerance) continue;
    const double scale = 1.0 / norm;
    for (float& x : matrix) x = static_cast<float>(static_cast<double>(x) * scale);
  }
}

}  // namespace ptransr
