#pragma once

// Embedding parameters and the TransE / TransR / path scoring functions with
// hand-derived gradients.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "ptransr/kgdata.hpp"
#include "ptransr/paths.hpp"

namespace ptransr {

using Rng = std::mt19937_64;

enum class Norm { kL1, kL2 };

// ---------------------------------------------------------------------------
// Kernels. Templated on the storage type so gradient checks can run in double
// precision; accumulation is always double.

template <typename T>
double TransEDistance(std::span<const T> h, std::span<const T> r, std::span<const T> t,
                      Norm norm) {
  if (h.size() != r.size() || t.size() != r.size()) {
    throw Error("TransE requires equal entity and relation dimensions");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double x = static_cast<double>(h[i]) + static_cast<double>(r[i]) - static_cast<double>(t[i]);
    acc += norm == Norm::kL1 ? std::abs(x) : x * x;
  }
  return norm == Norm::kL1 ? acc : std::sqrt(acc);
}

// out = M e, M stored row-major with shape (out.size() x e.size()).
template <typename T>
void Project(std::span<const T> matrix, std::span<const T> e, std::span<double> out) {
  const std::size_t k = e.size();
  if (matrix.size() != out.size() * k) throw Error("projection matrix shape mismatch");
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    const T* row = matrix.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) acc += static_cast<double>(row[j]) * static_cast<double>(e[j]);
    out[i] = acc;
  }
}

// ||M h + r - M t||_2^2 given the already projected head and tail.
template <typename T>
double TransRFromProjected(std::span<const double> proj_h, std::span<const T> r,
                           std::span<const double> proj_t) {
  double acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double x = proj_h[i] + static_cast<double>(r[i]) - proj_t[i];
    acc += x * x;
  }
  return acc;
}

template <typename T>
double TransREnergy(std::span<const T> matrix, std::span<const T> h, std::span<const T> r,
                    std::span<const T> t) {
  if (h.size() != t.size() || matrix.size() != r.size() * h.size()) {
    throw Error("TransR dimension mismatch: matrix must be d x k");
  }
  std::vector<double> ph(r.size()), pt(r.size());
  Project(matrix, h, std::span<double>(ph));
  Project(matrix, t, std::span<double>(pt));
  return TransRFromProjected<T>(ph, r, pt);
}

struct TransRGradient {
  std::vector<double> h, t, r, matrix;  // matrix is d x k row-major
};

// With u = M h + r - M t: dE/dr = 2u, dE/dh = 2 M^T u, dE/dt = -2 M^T u,
// dE/dM = 2 u (h - t)^T.
template <typename T>
TransRGradient TransREnergyGrad(std::span<const T> matrix, std::span<const T> h,
                                std::span<const T> r, std::span<const T> t) {
  const std::size_t k = h.size(), d = r.size();
  if (t.size() != k || matrix.size() != d * k) throw Error("TransR dimension mismatch");
  std::vector<double> ph(d), pt(d);
  Project(matrix, h, std::span<double>(ph));
  Project(matrix, t, std::span<double>(pt));
  TransRGradient g{std::vector<double>(k, 0.0), std::vector<double>(k, 0.0),
                   std::vector<double>(d, 0.0), std::vector<double>(d * k, 0.0)};
  for (std::size_t i = 0; i < d; ++i) {
    const double u2 = 2.0 * (ph[i] + static_cast<double>(r[i]) - pt[i]);
    g.r[i] = u2;
    const T* row = matrix.data() + i * k;
    double* grow = g.matrix.data() + i * k;
    for (std::size_t j = 0; j < k; ++j) {
      g.h[j] += static_cast<double>(row[j]) * u2;
      grow[j] = u2 * (static_cast<double>(h[j]) - static_cast<double>(t[j]));
    }
  }
  for (std::size_t j = 0; j < k; ++j) g.t[j] = -g.h[j];
  return g;
}

// p = r1 (+ r2); an empty `second` means a one-hop path.
template <typename T>
std::vector<double> ComposePath(std::span<const T> first, std::span<const T> second) {
  std::vector<double> p(first.begin(), first.end());
  if (!second.empty()) {
    if (second.size() != first.size()) throw Error("path relation dimension mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += static_cast<double>(second[i]);
  }
  return p;
}

// R * ||p - r||_2^2.
template <typename T>
double PathEnergyKernel(std::span<const double> path_vec, std::span<const T> r,
                        double reliability) {
  if (path_vec.size() != r.size()) throw Error("path relation dimension mismatch");
  if (reliability == 0.0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double x = path_vec[i] - static_cast<double>(r[i]);
    acc += x * x;
  }
  return reliability * acc;
}

// Gradient of R ||p - r||^2: each relation composing p receives `path`, the
// direct relation receives `-path`.
template <typename T>
std::vector<double> PathEnergyGrad(std::span<const double> path_vec, std::span<const T> r,
                                   double reliability) {
  std::vector<double> g(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    g[i] = 2.0 * reliability * (path_vec[i] - static_cast<double>(r[i]));
  }
  return g;
}

// ---------------------------------------------------------------------------

class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(std::size_t num_entities, std::size_t num_relations, std::size_t entity_dim,
              std::size_t relation_dim);

  std::size_t num_entities() const { return num_entities_; }
  std::size_t num_relations() const { return num_relations_; }
  std::size_t entity_dim() const { return entity_dim_; }      // k
  std::size_t relation_dim() const { return relation_dim_; }  // d

  std::span<float> entity(EntityId e) {
    return std::span<float>(entities_).subspan(e * entity_dim_, entity_dim_);
  }
  std::span<const float> entity(EntityId e) const {
    return std::span<const float>(entities_).subspan(e * entity_dim_, entity_dim_);
  }
  std::span<float> relation(RelationId r) {
    return std::span<float>(relations_).subspan(r * relation_dim_, relation_dim_);
  }
  std::span<const float> relation(RelationId r) const {
    return std::span<const float>(relations_).subspan(r * relation_dim_, relation_dim_);
  }
  // d x k, row-major.
  std::span<float> projection(RelationId r) {
    const std::size_t n = relation_dim_ * entity_dim_;
    return std::span<float>(projections_).subspan(r * n, n);
  }
  std::span<const float> projection(RelationId r) const {
    const std::size_t n = relation_dim_ * entity_dim_;
    return std::span<const float>(projections_).subspan(r * n, n);
  }

  std::span<const float> entity_data() const { return entities_; }
  std::span<const float> relation_data() const { return relations_; }
  std::span<const float> projection_data() const { return projections_; }

  // Ones on the diagonal of every d x k matrix.
  void SetIdentityProjections();
  // Uniform in +-6/sqrt(dim), then unit-normalized.
  void InitUniform(Rng& rng);

  bool AllFinite() const;

  void Save(const std::filesystem::path& path) const;
  static ModelParams Load(const std::filesystem::path& path);
  void Write(std::ostream& out) const;
  static ModelParams Read(std::istream& in);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::size_t num_entities_ = 0, num_relations_ = 0;
  std::size_t entity_dim_ = 0, relation_dim_ = 0;
  std::vector<float> entities_, relations_, projections_;
};

double ScoreTransE(const ModelParams& m, EntityId h, RelationId r, EntityId t, Norm norm);
double ScoreTransR(const ModelParams& m, EntityId h, RelationId r, EntityId t);

std::vector<double> PathVector(const ModelParams& m, const RelPath& p);
double PathEnergy(const ModelParams& m, const RelPath& p, RelationId r, double reliability);

// (1/Z) sum_p R(p|h,r,t) ||p - r||^2 over the stored paths of (h, t), with
// Z = sum_p R(p|h,r,t). The one-hop path equal to r is skipped. Zero when the
// pair has no paths or Z = 0.
double PathTerm(const ModelParams& m, const PathTable* table, EntityId h, RelationId r, EntityId t);

double ScorePTransR(const ModelParams& m, const PathTable* table, EntityId h, RelationId r,
                    EntityId t);

TransRGradient GradScoreTransR(const ModelParams& m, EntityId h, RelationId r, EntityId t);

// Rows touched by an SGD step; the constraint projection only revisits these.
struct TouchedRows {
  std::vector<EntityId> entities;
  std::vector<RelationId> relations;
  std::vector<std::pair<RelationId, EntityId>> projected;  // (r, e) with ||M_r e|| <= 1

  void AddTriple(const Triple& x) {
    entities.push_back(x.h);
    entities.push_back(x.t);
    relations.push_back(x.r);
    projected.emplace_back(x.r, x.h);
    projected.emplace_back(x.r, x.t);
  }
  void Clear() {
    entities.clear();
    relations.clear();
    projected.clear();
  }
};

// Tolerances beyond which a vector is considered off the constraint set.
inline constexpr double kUnitNormTolerance = 1e-6;
inline constexpr double kProjectedNormTolerance = 1e-6;

// Scales v to unit L2 norm unless it is already within tolerance (or zero).
void NormalizeToUnit(std::span<float> v);

// Entity and relation rows renormalized to the unit sphere; each (r, e) with
// ||M_r e|| > 1 has M_r rescaled so that ||M_r e|| = 1.
void ProjectConstraints(ModelParams& m, TouchedRows touched);

}  // namespace ptransr
