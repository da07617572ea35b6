// Copyright 2026 The cafata Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Forward pass of the context-aware feature-attribution model.
//
//   1. factor importance   pi_f  = softmax_f LeakyReLU(u . cf_f)        over all schema factors
//      contextual user     u_cs  = u + sum_{(f, cd) in cs} pi_f * cd
//   2. type importance     pi_t  = softmax_t LeakyReLU(u_cs . t)        over the item's own types
//   3. feature rating      P_a   = u_cs . at_a
//   4. contribution        contr_t = mean_{a of type t} P_a
//      prediction          r     = sum_t pi_t * contr_t
//
// Every intermediate is recorded in a PredictionBreakdown so that explanations can be
// read off the trace instead of being approximated after the fact.

#ifndef CAFATA_MODEL_HPP
#define CAFATA_MODEL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cafata/catalog.hpp"
#include "cafata/core.hpp"

namespace cafata {

enum class Variant {
  kCaFata,     // context-aware, learned type importance
  kFata,       // no context
  kAvgCaFata,  // context-aware, uniform type importance
  kAvgFata,    // no context, uniform type importance
};

inline bool uses_context(Variant v) { return v == Variant::kCaFata || v == Variant::kAvgCaFata; }
inline bool learns_type_importance(Variant v) { return v == Variant::kCaFata || v == Variant::kFata; }

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::kCaFata: return "ca-fata";
    case Variant::kFata: return "fata";
    case Variant::kAvgCaFata: return "avg-ca-fata";
    case Variant::kAvgFata: return "avg-fata";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::kCaFata, Variant::kFata, Variant::kAvgCaFata, Variant::kAvgFata})
    if (to_string(v) == s) return v;
  throw InvalidArgument("unknown variant '" + s + "'");
}

struct ModelConfig {
  std::size_t dim = 32;
  Variant variant = Variant::kCaFata;
  double leaky_relu_slope = 0.01;
  std::uint64_t seed = 0;

  void validate() const {
    if (dim == 0) throw InvalidArgument("embedding dimension must be positive");
    if (!(leaky_relu_slope > 0.0 && leaky_relu_slope < 1.0))
      throw InvalidArgument("leaky_relu_slope must lie in (0, 1)");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// The five embedding tables, all sharing one dimension.
enum class Table { kUser = 0, kFeature, kType, kFactor, kCondition };
inline constexpr std::array<Table, 5> kAllTables = {Table::kUser, Table::kFeature, Table::kType, Table::kFactor,
                                                    Table::kCondition};

inline const char* to_string(Table t) {
  switch (t) {
    case Table::kUser: return "users";
    case Table::kFeature: return "features";
    case Table::kType: return "types";
    case Table::kFactor: return "factors";
    case Table::kCondition: return "conditions";
  }
  return "?";
}

struct EmbeddingSpace {
  std::size_t dim = 0;
  Matrix users;
  Matrix features;
  Matrix types;
  Matrix factors;
  Matrix conditions;

  Matrix& table(Table t) {
    switch (t) {
      case Table::kUser: return users;
      case Table::kFeature: return features;
      case Table::kType: return types;
      case Table::kFactor: return factors;
      case Table::kCondition: return conditions;
    }
    return users;
  }
  const Matrix& table(Table t) const { return const_cast<EmbeddingSpace*>(this)->table(t); }

  /// Zero-filled tables sized for `catalog`.
  static EmbeddingSpace zeros(const Catalog& catalog, std::size_t dim) {
    EmbeddingSpace s;
    s.dim = dim;
    s.users = Matrix(catalog.users.size(), dim);
    s.features = Matrix(catalog.features.size(), dim);
    s.types = Matrix(catalog.types.size(), dim);
    s.factors = Matrix(catalog.factors.size(), dim);
    s.conditions = Matrix(catalog.num_conditions(), dim);
    return s;
  }

  /// Each table drawn uniformly from (-1/sqrt(d), 1/sqrt(d)), in table order, from one seeded stream.
  static EmbeddingSpace random(const Catalog& catalog, std::size_t dim, std::uint64_t seed) {
    EmbeddingSpace s = zeros(catalog, dim);
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Table t : kAllTables)
      for (double& v : s.table(t).data()) v = dist(rng);
    return s;
  }

  bool all_finite() const {
    for (Table t : kAllTables)
      for (double v : table(t).data())
        if (!std::isfinite(v)) return false;
    return true;
  }

  /// Throws unless table shapes match the catalog's id tables.
  void check_shape(const Catalog& catalog) const {
    auto expect = [&](const Matrix& m, std::size_t rows, const char* what) {
      if (m.rows() != rows || (rows > 0 && m.cols() != dim))
        throw InvalidArgument(std::string("embedding table '") + what + "' has shape " + std::to_string(m.rows()) +
                              "x" + std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                              std::to_string(dim));
    };
    expect(users, catalog.users.size(), "users");
    expect(features, catalog.features.size(), "features");
    expect(types, catalog.types.size(), "types");
    expect(factors, catalog.factors.size(), "factors");
    expect(conditions, catalog.num_conditions(), "conditions");
  }

  friend bool operator==(const EmbeddingSpace&, const EmbeddingSpace&) = default;
};

/// Per-user feature-rating replacements applied before type contributions are averaged.
using Overrides = std::unordered_map<FeatureId, double>;

struct FactorTrace {
  FactorId factor;
  double score = 0.0;       // u . cf
  double importance = 0.0;  // softmax of LeakyReLU(score)
};

struct FeatureTrace {
  FeatureId feature;
  double rating = 0.0;  // effective P (override applied)
  double model_rating = 0.0;  // u_cs . at before overrides
  bool overridden = false;
};

struct TypeTrace {
  TypeId type;
  std::optional<double> score;  // u_cs . t; absent for uniform-importance variants
  double importance = 0.0;
  double contribution = 0.0;
  std::vector<FeatureTrace> features;

  /// Share of r-hat carried per unit of feature rating: pi_t / |features of type t|.
  double feature_weight() const { return importance / static_cast<double>(features.size()); }
};

/// Full trace of one forward pass.
struct PredictionBreakdown {
  UserId user;
  ItemId item;
  ContextualSituation context;
  Variant variant = Variant::kCaFata;
  std::vector<FactorTrace> factors;  // empty unless the variant uses context and cs is non-empty
  std::vector<double> contextual_user;
  std::vector<TypeTrace> types;
  double rating = 0.0;

  const FeatureTrace* find(FeatureId a) const {
    for (const auto& t : types)
      for (const auto& f : t.features)
        if (f.feature == a) return &f;
    return nullptr;
  }

  const TypeTrace* type_of(FeatureId a) const {
    for (const auto& t : types)
      for (const auto& f : t.features)
        if (f.feature == a) return &t;
    return nullptr;
  }

  std::size_t feature_count() const {
    std::size_t n = 0;
    for (const auto& t : types) n += t.features.size();
    return n;
  }
};

// -- Step 1 -----------------------------------------------------------------

struct FactorImportance {
  std::vector<double> scores;      // indexed by factor id
  std::vector<double> importance;  // indexed by factor id
};

/// Importance of every factor of the schema for `user`.
inline FactorImportance context_factor_importance(UserId user, const EmbeddingSpace& space, const Catalog& catalog,
                                                  double slope) {
  if (catalog.factors.size() == 0) throw InvalidArgument("context schema has no factors");
  if (user.index() >= space.users.rows()) throw LookupError("unknown user index " + std::to_string(user.value));
  FactorImportance out;
  const auto u = space.users.row(user.index());
  out.scores.resize(catalog.factors.size());
  std::vector<double> activated(catalog.factors.size());
  for (std::size_t f = 0; f < catalog.factors.size(); ++f) {
    out.scores[f] = dot(u, space.factors.row(f));
    activated[f] = leaky_relu(out.scores[f], slope);
  }
  out.importance = softmax(activated);
  return out;
}

/// u_cs = u + sum over cs of pi_f * cd. Returns u unchanged for context-free variants or empty cs.
inline std::vector<double> contextual_user_embedding(UserId user, const ContextualSituation& cs,
                                                     const EmbeddingSpace& space, const Catalog& catalog,
                                                     const ModelConfig& config,
                                                     std::vector<FactorTrace>* trace = nullptr) {
  if (user.index() >= space.users.rows()) throw LookupError("unknown user index " + std::to_string(user.value));
  const auto u = space.users.row(user.index());
  std::vector<double> ucs(u.begin(), u.end());
  if (!uses_context(config.variant) || cs.empty()) return ucs;
  catalog.validate(cs);
  const auto imp = context_factor_importance(user, space, catalog, config.leaky_relu_slope);
  for (const auto& [f, cd] : cs) axpy(imp.importance[f.index()], space.conditions.row(cd.index()), ucs);
  if (trace) {
    trace->clear();
    for (std::size_t f = 0; f < catalog.factors.size(); ++f)
      trace->push_back({FactorId{f}, imp.scores[f], imp.importance[f]});
  }
  return ucs;
}

// -- Step 2 -----------------------------------------------------------------

struct TypeImportance {
  std::vector<TypeId> types;                  // item storage order
  std::vector<std::optional<double>> scores;  // empty optionals for uniform variants
  std::vector<double> importance;
};

/// Importance of each of `item`'s own types, normalised over those types only.
inline TypeImportance feature_type_importance(std::span<const double> ucs, ItemId item, const EmbeddingSpace& space,
                                              const Catalog& catalog, const ModelConfig& config) {
  const auto& groups = catalog.groups(item);
  if (groups.empty()) throw InvalidArgument("item '" + catalog.items.name(item.index()) + "' has no feature types");
  TypeImportance out;
  const std::size_t n = groups.size();
  out.types.reserve(n);
  for (const auto& g : groups) out.types.push_back(g.type);
  if (!learns_type_importance(config.variant)) {
    out.scores.assign(n, std::nullopt);
    out.importance.assign(n, 1.0 / static_cast<double>(n));
    return out;
  }
  std::vector<double> activated(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = dot(ucs, space.types.row(groups[k].type.index()));
    out.scores.push_back(s);
    activated[k] = leaky_relu(s, config.leaky_relu_slope);
  }
  out.importance = softmax(activated);
  return out;
}

// -- Step 3 -----------------------------------------------------------------

inline double feature_rating(std::span<const double> ucs, FeatureId feature, const EmbeddingSpace& space) {
  return dot(ucs, space.features.row(feature.index()));
}

// -- Steps 1-4 ----------------------------------------------------------------

inline PredictionBreakdown predict(UserId user, ItemId item, const ContextualSituation& cs,
                                   const EmbeddingSpace& space, const Catalog& catalog, const ModelConfig& config,
                                   const Overrides& overrides = {}) {
  if (item.index() >= catalog.items.size()) throw LookupError("unknown item index " + std::to_string(item.value));
  PredictionBreakdown b;
  b.user = user;
  b.item = item;
  b.context = uses_context(config.variant) ? cs : ContextualSituation{};
  b.variant = config.variant;
  b.contextual_user = contextual_user_embedding(user, cs, space, catalog, config, &b.factors);

  const auto ti = feature_type_importance(b.contextual_user, item, space, catalog, config);
  const auto& groups = catalog.groups(item);
  b.types.resize(groups.size());
  double r = 0.0;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    TypeTrace& tt = b.types[k];
    tt.type = groups[k].type;
    tt.score = ti.scores[k];
    tt.importance = ti.importance[k];
    double sum = 0.0;
    for (FeatureId a : groups[k].features) {
      FeatureTrace ft;
      ft.feature = a;
      ft.model_rating = feature_rating(b.contextual_user, a, space);
      ft.rating = ft.model_rating;
      if (auto it = overrides.find(a); it != overrides.end()) {
        ft.rating = it->second;
        ft.overridden = true;
      }
      sum += ft.rating;
      tt.features.push_back(ft);
    }
    tt.contribution = sum / static_cast<double>(tt.features.size());
    r += tt.importance * tt.contribution;
  }
  b.rating = r;
  return b;
}

/// Catalog, parameters and configuration bundled for callers that serve a single model.
struct Model {
  Catalog catalog;
  ModelConfig config;
  EmbeddingSpace space;

  PredictionBreakdown predict(UserId u, ItemId i, const ContextualSituation& cs, const Overrides& o = {}) const {
    return cafata::predict(u, i, cs, space, catalog, config, o);
  }
};

// -- Matrix-factorisation reference baseline ---------------------------------

struct MfSpace {
  std::size_t dim = 0;
  Matrix users;
  Matrix items;

  static MfSpace random(std::size_t n_users, std::size_t n_items, std::size_t dim, std::uint64_t seed) {
    MfSpace s{dim, Matrix(n_users, dim), Matrix(n_items, dim)};
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : s.users.data()) v = dist(rng);
    for (double& v : s.items.data()) v = dist(rng);
    return s;
  }

  friend bool operator==(const MfSpace&, const MfSpace&) = default;
};

/// r-hat = p_u . q_i
inline double predict_mf_baseline(UserId user, ItemId item, const MfSpace& mf) {
  if (user.index() >= mf.users.rows() || item.index() >= mf.items.rows())
    throw LookupError("id outside the baseline's embedding tables");
  return dot(mf.users.row(user.index()), mf.items.row(item.index()));
}

}  // namespace cafata

#endif  // CAFATA_MODEL_HPP
