#include "ptransr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

namespace ptransr {

CompositionRule ParseRule(const std::string& text) {
  unsigned a = 0, b = 0, c = 0;
  char comma = 0, colon = 0, extra = 0;
  if (std::sscanf(text.c_str(), "%u %c %u %c %u %c", &a, &comma, &b, &colon, &c, &extra) != 5 ||
      comma != ',' || colon != ':') {
    throw ConfigError("composition rule must look like 'first,second:implied', got '" + text + "'");
  }
  return {a, b, c};
}

void SyntheticKGSpec::Validate() const {
  if (rules.empty()) throw ConfigError("at least one composition rule is required");
  std::set<RelationId> implied;
  for (const auto& rule : rules) {
    for (RelationId r : {rule.first, rule.second, rule.implied}) {
      if (r >= n_relations) {
        throw ConfigError("composition rule references relation " + std::to_string(r) +
                          " but only " + std::to_string(n_relations) + " exist");
      }
    }
    implied.insert(rule.implied);
  }
  for (const auto& rule : rules) {
    if (implied.count(rule.first) || implied.count(rule.second)) {
      throw ConfigError("composition inputs must be base relations, not implied ones");
    }
  }
  if (fanout == 0) throw ConfigError("fanout must be positive");
  if (n_entities < fanout + 1) {
    throw ConfigError("infeasible: need more than " + std::to_string(fanout) + " entities");
  }
  if (!(noise >= 0.0 && noise < 1.0)) throw ConfigError("noise must lie in [0, 1)");
  if (!(holdout > 0.0 && holdout < 1.0)) throw ConfigError("holdout must lie in (0, 1)");
  if (!(valid_fraction >= 0.0 && holdout + valid_fraction < 1.0)) {
    throw ConfigError("valid fraction must be non-negative and leave implied facts for training");
  }
}

namespace {

using Fact = std::tuple<std::size_t, std::size_t, std::size_t>;  // (h, r, t)

NamedTriple Name(const Fact& f, const std::vector<std::size_t>& names) {
  return {"e" + std::to_string(names[std::get<0>(f)]), "r" + std::to_string(std::get<1>(f)),
          "e" + std::to_string(names[std::get<2>(f)])};
}

}  // namespace

SyntheticKG GenerateSyntheticKG(const SyntheticKGSpec& spec) {
  spec.Validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t n = spec.n_entities;
  std::vector<std::size_t> names(n);
  std::iota(names.begin(), names.end(), std::size_t{0});
  std::shuffle(names.begin(), names.end(), rng);

  std::set<std::size_t> implied_relations;
  for (const auto& rule : spec.rules) implied_relations.insert(rule.implied);

  // tails[r][i]: positions reached from position i under base relation r.
  std::vector<std::vector<std::vector<std::size_t>>> tails(spec.n_relations);
  std::vector<Fact> base;
  std::size_t base_rank = 0;
  for (std::size_t r = 0; r < spec.n_relations; ++r) {
    if (implied_relations.count(r)) continue;
    const std::size_t offset = 3 + 2 * base_rank++;
    tails[r].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < spec.fanout && i + offset + j < n; ++j) {
        tails[r][i].push_back(i + offset + j);
        base.emplace_back(i, r, i + offset + j);
      }
    }
  }

  std::set<Fact> implied_set;
  for (const auto& rule : spec.rules) {
    for (std::size_t h = 0; h < n; ++h) {
      for (std::size_t mid : tails[rule.first][h]) {
        for (std::size_t t : tails[rule.second][mid]) {
          if (t != h) implied_set.emplace(h, rule.implied, t);
        }
      }
    }
  }
  for (const auto& rule : spec.rules) {
    const bool witnessed = std::any_of(implied_set.begin(), implied_set.end(), [&](const Fact& f) {
      return std::get<1>(f) == rule.implied;
    });
    if (!witnessed) throw ConfigError("infeasible: a composition rule produced no facts");
  }

  std::vector<Fact> implied(implied_set.begin(), implied_set.end());
  std::shuffle(implied.begin(), implied.end(), rng);
  const auto count_for = [&](double fraction) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(implied.size())));
  };
  const std::size_t n_test = std::max<std::size_t>(1, count_for(spec.holdout));
  const std::size_t n_valid = std::max<std::size_t>(1, count_for(spec.valid_fraction));
  if (n_test + n_valid >= implied.size()) {
    throw ConfigError("infeasible: too few implied facts to hold out test and valid triples");
  }

  std::vector<Fact> test(implied.begin(), implied.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<Fact> valid(implied.begin() + static_cast<std::ptrdiff_t>(n_test),
                          implied.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid));
  std::vector<Fact> train = base;
  train.insert(train.end(), implied.begin() + static_cast<std::ptrdiff_t>(n_test + n_valid),
               implied.end());

  // noise / (1 - noise) random facts per clean fact.
  const std::size_t clean = train.size();
  const auto n_noise = static_cast<std::size_t>(
      std::llround(static_cast<double>(clean) * spec.noise / (1.0 - spec.noise)));
  std::set<Fact> taken(base.begin(), base.end());
  taken.insert(implied.begin(), implied.end());
  std::uniform_int_distribution<std::size_t> pick_entity(0, n - 1);
  std::uniform_int_distribution<std::size_t> pick_relation(0, spec.n_relations - 1);
  std::size_t added = 0, attempts = 0;
  const std::size_t max_attempts = 100 * (n_noise + 1);
  while (added < n_noise) {
    if (++attempts > max_attempts) throw ConfigError("infeasible: graph too dense for the noise rate");
    const Fact f{pick_entity(rng), pick_relation(rng), pick_entity(rng)};
    if (std::get<0>(f) == std::get<2>(f) || !taken.insert(f).second) continue;
    train.push_back(f);
    ++added;
  }
  std::shuffle(train.begin(), train.end(), rng);

  SyntheticKG kg;
  kg.implied_facts = implied.size();
  kg.noise_facts = added;
  for (const auto& f : train) kg.train.push_back(Name(f, names));
  for (const auto& f : valid) kg.valid.push_back(Name(f, names));
  for (const auto& f : test) kg.test.push_back(Name(f, names));
  return kg;
}

void WriteDataset(const SyntheticKG& kg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto write = [&](const std::string& name, const std::vector<NamedTriple>& rows) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    for (const auto& row : rows) out << row[0] << '\t' << row[1] << '\t' << row[2] << '\n';
  };
  write("train.txt", kg.train);
  write("valid.txt", kg.valid);
  write("test.txt", kg.test);
}

}  // namespace ptransr
