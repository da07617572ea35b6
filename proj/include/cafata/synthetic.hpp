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

// Random catalogs and planted "teacher" models, used by the property checkers, the
// recovery experiments and the CLI's random-model mode.

#ifndef CAFATA_SYNTHETIC_HPP
#define CAFATA_SYNTHETIC_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "cafata/catalog.hpp"
#include "cafata/data_ingest.hpp"
#include "cafata/model.hpp"

namespace cafata::synthetic {

struct CatalogShape {
  std::size_t users = 20;
  std::size_t items = 30;
  std::size_t types = 3;
  std::size_t features_per_type = 6;     // size of each type's vocabulary
  std::size_t min_features_per_group = 1;
  std::size_t max_features_per_group = 3;
  std::size_t min_types_per_item = 1;    // items draw a random subset of types of at least this size
  std::size_t factors = 3;
  std::size_t conditions_per_factor = 3;
};

/// Names are positional: u<k>, i<k>, t<k>, t<k>:a<j>, f<k>, f<k>:c<j>.
inline Catalog random_catalog(const CatalogShape& shape, Rng& rng) {
  Catalog c;
  for (std::size_t f = 0; f < shape.factors; ++f) {
    FactorId fid = c.add_factor("f" + std::to_string(f));
    for (std::size_t k = 0; k < shape.conditions_per_factor; ++k)
      c.add_condition(fid, "f" + std::to_string(f) + ":c" + std::to_string(k));
  }
  for (std::size_t u = 0; u < shape.users; ++u) c.users.intern("u" + std::to_string(u));
  std::uniform_int_distribution<std::size_t> group_size(shape.min_features_per_group, shape.max_features_per_group);
  std::uniform_int_distribution<std::size_t> type_count(std::min(shape.min_types_per_item, shape.types), shape.types);
  std::uniform_int_distribution<std::size_t> pick(0, shape.features_per_type - 1);
  std::vector<std::size_t> type_order(shape.types);
  for (std::size_t i = 0; i < shape.items; ++i) {
    const std::string item = "i" + std::to_string(i);
    std::iota(type_order.begin(), type_order.end(), std::size_t{0});
    std::shuffle(type_order.begin(), type_order.end(), rng);
    const std::size_t nt = type_count(rng);
    for (std::size_t k = 0; k < nt; ++k) {
      const std::string type = "t" + std::to_string(type_order[k]);
      const std::size_t want = std::min(group_size(rng), shape.features_per_type);
      std::size_t added = 0;
      while (added < want)
        if (c.add_triple(item, type, type + ":a" + std::to_string(pick(rng)))) ++added;
    }
  }
  return c;
}

/// Gaussian embeddings with per-table scale. Used for teachers whose ratings must span [-1, 1].
struct TeacherScale {
  double user = 0.5;
  double feature = 0.5;
  double type = 1.0;
  double factor = 1.0;
  double condition = 0.5;
};

inline EmbeddingSpace random_teacher(const Catalog& catalog, std::size_t dim, const TeacherScale& s, Rng& rng) {
  EmbeddingSpace space = EmbeddingSpace::zeros(catalog, dim);
  std::normal_distribution<double> n01(0.0, 1.0);
  const double norm = 1.0 / std::pow(static_cast<double>(dim), 0.25);
  auto fill = [&](Matrix& m, double scale) {
    for (double& v : m.data()) v = scale * norm * n01(rng);
  };
  fill(space.users, s.user);
  fill(space.features, s.feature);
  fill(space.types, s.type);
  fill(space.factors, s.factor);
  fill(space.conditions, s.condition);
  return space;
}

/// Uniformly random complete situation.
inline ContextualSituation random_situation(const Catalog& catalog, Rng& rng) {
  ContextualSituation cs;
  for (std::size_t f = 0; f < catalog.factors.size(); ++f) {
    const auto& conds = catalog.conditions_of(FactorId{f});
    std::uniform_int_distribution<std::size_t> pick(0, conds.size() - 1);
    cs.set(FactorId{f}, conds[pick(rng)]);
  }
  return cs;
}

/// Draws `per_user` distinct (item, situation) rows per user, rates them with the teacher plus
/// Gaussian noise, clips to [-1, 1] and returns them on the identity scale [-1, 1].
inline std::vector<Interaction> planted_interactions(const Catalog& catalog, const EmbeddingSpace& teacher,
                                                     const ModelConfig& teacher_config, std::size_t per_user,
                                                     double noise_sigma, Rng& rng) {
  std::vector<Interaction> out;
  std::normal_distribution<double> noise(0.0, noise_sigma);
  std::uniform_int_distribution<std::size_t> pick_item(0, catalog.items.size() - 1);
  for (std::size_t u = 0; u < catalog.users.size(); ++u) {
    for (std::size_t k = 0; k < per_user; ++k) {
      Interaction x;
      x.user = UserId{u};
      x.item = ItemId{pick_item(rng)};
      x.context = random_situation(catalog, rng);
      const double r = predict(x.user, x.item, x.context, teacher, catalog, teacher_config).rating;
      x.value = std::clamp(r + (noise_sigma > 0.0 ? noise(rng) : 0.0), -1.0, 1.0);
      x.rating = x.value;
      out.push_back(std::move(x));
    }
  }
  return out;
}

}  // namespace cafata::synthetic

#endif  // CAFATA_SYNTHETIC_HPP
