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

// Tripolar argumentation view of a single prediction.
//
// The arguments are rec(i) and every feature of item i. Each feature is linked directly to
// rec(i) by exactly one of attack, support or neutralise, chosen by the sign of the user's
// rating of that feature; the strength of a feature is that rating and the strength of
// rec(i) is the predicted rating. The checkers below verify weak balance, weak
// monotonicity and monotone response to feedback on randomly drawn models.

#ifndef CAFATA_ARGUMENTATION_HPP
#define CAFATA_ARGUMENTATION_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cafata/catalog.hpp"
#include "cafata/core.hpp"
#include "cafata/model.hpp"
#include "cafata/synthetic.hpp"

namespace cafata {

enum class Polarity { kAttack, kSupport, kNeutral };

inline const char* symbol(Polarity p) {
  switch (p) {
    case Polarity::kAttack: return "-";
    case Polarity::kSupport: return "+";
    case Polarity::kNeutral: return "0";
  }
  return "?";
}

inline Polarity classify(double strength, double neutral_eps) {
  if (strength < -neutral_eps) return Polarity::kAttack;
  if (strength > neutral_eps) return Polarity::kSupport;
  return Polarity::kNeutral;
}

struct Argument {
  FeatureId feature;
  TypeId type;
  Polarity polarity = Polarity::kNeutral;
  double strength = 0.0;  // sigma(at) = P
  double weight = 0.0;    // pi_t / |features of type t on the item|
};

struct Taf {
  UserId user;
  ItemId item;
  ContextualSituation context;
  double rec_strength = 0.0;  // sigma(rec_i) = r-hat
  double neutral_eps = 0.0;
  std::vector<Argument> arguments;
  std::vector<FeatureId> attacks;   // R-
  std::vector<FeatureId> supports;  // R+
  std::vector<FeatureId> neutrals;  // R0

  const Argument* find(FeatureId a) const {
    for (const auto& arg : arguments)
      if (arg.feature == a) return &arg;
    return nullptr;
  }
};

/// Builds the interaction-tailored framework of a prediction. Use neutral_eps = 0 for the
/// exact-zero neutral relation.
inline Taf build_taf(const PredictionBreakdown& b, double neutral_eps = 0.0) {
  if (!(neutral_eps >= 0.0)) throw InvalidArgument("neutral_eps must be non-negative");
  Taf taf;
  taf.user = b.user;
  taf.item = b.item;
  taf.context = b.context;
  taf.rec_strength = b.rating;
  taf.neutral_eps = neutral_eps;
  for (const auto& tt : b.types) {
    const double w = tt.feature_weight();
    for (const auto& ft : tt.features) {
      Argument arg{ft.feature, tt.type, classify(ft.rating, neutral_eps), ft.rating, w};
      switch (arg.polarity) {
        case Polarity::kAttack: taf.attacks.push_back(ft.feature); break;
        case Polarity::kSupport: taf.supports.push_back(ft.feature); break;
        case Polarity::kNeutral: taf.neutrals.push_back(ft.feature); break;
      }
      taf.arguments.push_back(arg);
    }
  }
  return taf;
}

/// JSON export consumed by the UI.
inline nlohmann::ordered_json taf_to_json(const Taf& taf, const Catalog& catalog) {
  nlohmann::ordered_json ctx = nlohmann::ordered_json::object();
  for (const auto& [f, c] : taf.context) ctx[catalog.factors.name(f.index())] = catalog.condition_name(c);
  nlohmann::ordered_json args = nlohmann::ordered_json::array();
  for (const auto& a : taf.arguments)
    args.push_back({{"feature", catalog.features.name(a.feature.index())},
                    {"type", catalog.types.name(a.type.index())},
                    {"polarity", symbol(a.polarity)},
                    {"strength", a.strength},
                    {"weight", a.weight}});
  return {{"item", catalog.items.name(taf.item.index())},
          {"rec_strength", taf.rec_strength},
          {"neutral_eps", taf.neutral_eps},
          {"context", std::move(ctx)},
          {"arguments", std::move(args)}};
}

using MuteSet = std::set<FeatureId>;

/// Re-runs the forward pass with every muted feature's rating forced to 0. Importances are
/// untouched because they do not depend on feature ratings.
inline PredictionBreakdown mute(const Model& model, UserId user, ItemId item, const ContextualSituation& cs,
                                const MuteSet& mutes, const Overrides& base = {}) {
  for (FeatureId a : mutes)
    if (!model.catalog.has_feature(item, a))
      throw InvalidArgument("cannot mute feature '" + model.catalog.features.name(a.index()) +
                            "': not a feature of item '" + model.catalog.items.name(item.index()) + "'");
  Overrides o = base;
  for (FeatureId a : mutes) o[a] = 0.0;
  return model.predict(user, item, cs, o);
}

// -- property checkers --------------------------------------------------------

/// Forward pass under test. Checkers default to `predict`; tests substitute broken ones.
using Predictor = std::function<PredictionBreakdown(const Model&, UserId, ItemId, const ContextualSituation&,
                                                    const Overrides&)>;

inline PredictionBreakdown default_predictor(const Model& m, UserId u, ItemId i, const ContextualSituation& cs,
                                             const Overrides& o) {
  return m.predict(u, i, cs, o);
}

struct Counterexample {
  std::string property;
  std::string detail;
  nlohmann::ordered_json instance;
};

struct CheckReport {
  std::string property;
  std::size_t trials = 0;
  std::vector<Counterexample> counterexamples;

  bool passed() const { return counterexamples.empty(); }
};

/// Source of random models for the checkers. `catalog_shape` bounds the drawn catalogs.
struct ModelSampler {
  synthetic::CatalogShape shape;
  std::vector<Variant> variants{Variant::kCaFata, Variant::kFata, Variant::kAvgCaFata, Variant::kAvgFata};
  std::size_t max_dim = 8;

  Model draw(Rng& rng) const {
    std::uniform_int_distribution<std::size_t> pick_variant(0, variants.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_dim(1, max_dim);
    Model m;
    m.catalog = synthetic::random_catalog(shape, rng);
    m.config.variant = variants[pick_variant(rng)];
    m.config.dim = pick_dim(rng);
    m.config.leaky_relu_slope = std::uniform_real_distribution<double>(0.001, 0.5)(rng);
    m.space = synthetic::random_teacher(m.catalog, m.config.dim, {}, rng);
    return m;
  }

  Model operator()(Rng& rng) const { return draw(rng); }
};

/// Supplies the model for one trial. Checkers mutate the returned copy freely.
using ModelSource = std::function<Model(Rng&)>;

/// Every trial runs against a copy of `model`, e.g. a loaded checkpoint.
inline ModelSource fixed_model(Model model) {
  return [m = std::move(model)](Rng&) { return m; };
}

namespace detail {

inline nlohmann::ordered_json describe(const Model& m, UserId u, ItemId i, const ContextualSituation& cs) {
  nlohmann::ordered_json ctx = nlohmann::ordered_json::object();
  for (const auto& [f, c] : cs) ctx[m.catalog.factors.name(f.index())] = m.catalog.condition_name(c);
  return {{"variant", to_string(m.config.variant)},
          {"dim", m.config.dim},
          {"user", m.catalog.users.name(u.index())},
          {"item", m.catalog.items.name(i.index())},
          {"context", std::move(ctx)}};
}

/// Replaces item `i`'s features with the single feature `a` (of its own type).
inline void make_single_feature(Catalog& c, ItemId i, FeatureId a) {
  auto& groups = c.mutable_groups(i);
  groups.assign(1, TypeGroup{c.type_of(a), {a}});
}

}  // namespace detail

/// Weak balance: an item whose only argument is a supporter (attacker, neutral) is rated
/// strictly positive (strictly negative, exactly zero). Each trial draws a model, collapses
/// one item to a single feature, and in a third of the trials zeroes that feature's
/// embedding so the neutral case is exercised exactly.
inline CheckReport check_weak_balance(const ModelSource& source, std::size_t trials, std::uint64_t seed,
                                      const Predictor& predictor = default_predictor) {
  if (trials == 0) throw InvalidArgument("trials must be >= 1");
  CheckReport rep{"weak_balance", trials, {}};
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    Model m = source(rng);
    const ItemId i{std::uniform_int_distribution<std::size_t>(0, m.catalog.items.size() - 1)(rng)};
    const auto& groups = m.catalog.groups(i);
    const auto& g = groups[std::uniform_int_distribution<std::size_t>(0, groups.size() - 1)(rng)];
    const FeatureId a = g.features[std::uniform_int_distribution<std::size_t>(0, g.features.size() - 1)(rng)];
    detail::make_single_feature(m.catalog, i, a);
    if (t % 3 == 2)
      for (double& v : m.space.features.row(a.index())) v = 0.0;
    const UserId u{std::uniform_int_distribution<std::size_t>(0, m.catalog.users.size() - 1)(rng)};
    const auto cs = synthetic::random_situation(m.catalog, rng);

    const auto b = predictor(m, u, i, cs, {});
    const Taf taf = build_taf(b, 0.0);
    const double r = taf.rec_strength;
    std::string bad;
    if (taf.arguments.size() != 1)
      bad = "framework does not have exactly one argument";
    else if (!taf.supports.empty() && !(r > 0.0))
      bad = "lone supporter but rec strength " + std::to_string(r) + " <= 0";
    else if (!taf.attacks.empty() && !(r < 0.0))
      bad = "lone attacker but rec strength " + std::to_string(r) + " >= 0";
    else if (!taf.neutrals.empty() && r != 0.0)
      bad = "lone neutral but rec strength " + std::to_string(r) + " != 0";
    if (!bad.empty()) {
      auto inst = detail::describe(m, u, i, cs);
      inst["feature"] = m.catalog.features.name(a.index());
      inst["feature_strength"] = taf.arguments.empty() ? 0.0 : taf.arguments[0].strength;
      inst["rec_strength"] = r;
      rep.counterexamples.push_back({rep.property, bad, std::move(inst)});
    }
  }
  return rep;
}

/// Weak monotonicity: muting an attacker strictly raises rec strength, muting a supporter
/// strictly lowers it, muting a neutral leaves it unchanged (within 1e-12). Each trial
/// draws a model and an item with at least two features; every third trial plants an
/// exactly-neutral feature by zeroing its embedding.
inline CheckReport check_weak_monotonicity(const ModelSource& source, std::size_t trials, std::uint64_t seed,
                                           const Predictor& predictor = default_predictor) {
  if (trials == 0) throw InvalidArgument("trials must be >= 1");
  CheckReport rep{"weak_monotonicity", trials, {}};
  Rng rng(seed);
  std::size_t redraws = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Model m = source(rng);
    std::vector<ItemId> multi;
    for (std::size_t i = 0; i < m.catalog.items.size(); ++i)
      if (m.catalog.feature_count(ItemId{i}) >= 2) multi.push_back(ItemId{i});
    if (multi.empty()) {
      if (++redraws > 100 + 10 * trials) throw InvalidArgument("no item with at least two features to mute");
      --t;
      continue;
    }
    const ItemId i = multi[std::uniform_int_distribution<std::size_t>(0, multi.size() - 1)(rng)];
    std::vector<FeatureId> feats;
    for (const auto& g : m.catalog.groups(i)) feats.insert(feats.end(), g.features.begin(), g.features.end());
    const FeatureId a = feats[std::uniform_int_distribution<std::size_t>(0, feats.size() - 1)(rng)];
    if (t % 3 == 2)
      for (double& v : m.space.features.row(a.index())) v = 0.0;
    const UserId u{std::uniform_int_distribution<std::size_t>(0, m.catalog.users.size() - 1)(rng)};
    const auto cs = synthetic::random_situation(m.catalog, rng);

    const auto before = predictor(m, u, i, cs, {});
    const Taf taf = build_taf(before, 0.0);
    const Argument* arg = taf.find(a);
    const auto* tt = before.type_of(a);
    Overrides muted{{a, 0.0}};
    const auto after = predictor(m, u, i, cs, muted);
    const double v = before.rating, v2 = after.rating;
    std::string bad;
    if (!arg || !tt)
      bad = "feature missing from the framework";
    else if (!(tt->importance > 0.0))
      bad = "type importance is not strictly positive";
    else if (arg->polarity == Polarity::kAttack && !(v2 > v))
      bad = "muting an attacker did not raise rec strength";
    else if (arg->polarity == Polarity::kSupport && !(v2 < v))
      bad = "muting a supporter did not lower rec strength";
    else if (arg->polarity == Polarity::kNeutral && std::abs(v2 - v) > 1e-12)
      bad = "muting a neutral changed rec strength";
    if (!bad.empty()) {
      auto inst = detail::describe(m, u, i, cs);
      inst["feature"] = m.catalog.features.name(a.index());
      inst["feature_strength"] = arg ? arg->strength : 0.0;
      inst["rec_strength_before"] = v;
      inst["rec_strength_after"] = v2;
      rep.counterexamples.push_back({rep.property, bad, std::move(inst)});
    }
  }
  return rep;
}

/// Raising one feature's rating by delta > 0 through an override raises rec strength by
/// exactly pi_t * delta / |features of type t| (1e-9); lowering lowers it symmetrically.
inline CheckReport check_feedback_monotonicity(const ModelSource& source, std::size_t trials, std::uint64_t seed,
                                               const Predictor& predictor = default_predictor) {
  if (trials == 0) throw InvalidArgument("trials must be >= 1");
  CheckReport rep{"feedback_monotonicity", trials, {}};
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    Model m = source(rng);
    const ItemId i{std::uniform_int_distribution<std::size_t>(0, m.catalog.items.size() - 1)(rng)};
    std::vector<FeatureId> feats;
    for (const auto& g : m.catalog.groups(i)) feats.insert(feats.end(), g.features.begin(), g.features.end());
    const FeatureId a = feats[std::uniform_int_distribution<std::size_t>(0, feats.size() - 1)(rng)];
    const UserId u{std::uniform_int_distribution<std::size_t>(0, m.catalog.users.size() - 1)(rng)};
    const auto cs = synthetic::random_situation(m.catalog, rng);
    const double delta = std::uniform_real_distribution<double>(0.01, 1.0)(rng) * (t % 2 == 0 ? 1.0 : -1.0);

    const auto before = predictor(m, u, i, cs, {});
    const auto* ft = before.find(a);
    const auto* tt = before.type_of(a);
    if (!ft || !tt) {
      rep.counterexamples.push_back({rep.property, "feature missing from the breakdown", detail::describe(m, u, i, cs)});
      continue;
    }
    const auto after = predictor(m, u, i, cs, Overrides{{a, ft->rating + delta}});
    const double expected = tt->importance * delta / static_cast<double>(tt->features.size());
    const double change = after.rating - before.rating;
    std::string bad;
    if (delta > 0.0 && !(change > 0.0))
      bad = "raising a feature rating did not raise rec strength";
    else if (delta < 0.0 && !(change < 0.0))
      bad = "lowering a feature rating did not lower rec strength";
    else if (std::abs(change - expected) > 1e-9)
      bad = "change " + std::to_string(change) + " differs from pi_t*delta/|at_t| = " + std::to_string(expected);
    if (!bad.empty()) {
      auto inst = detail::describe(m, u, i, cs);
      inst["feature"] = m.catalog.features.name(a.index());
      inst["delta"] = delta;
      inst["rec_strength_before"] = before.rating;
      inst["rec_strength_after"] = after.rating;
      rep.counterexamples.push_back({rep.property, bad, std::move(inst)});
    }
  }
  return rep;
}

inline nlohmann::ordered_json report_to_json(const CheckReport& r) {
  nlohmann::ordered_json ces = nlohmann::ordered_json::array();
  for (const auto& c : r.counterexamples)
    ces.push_back({{"property", c.property}, {"detail", c.detail}, {"instance", c.instance}});
  return {{"property", r.property},
          {"trials", r.trials},
          {"passed", r.passed()},
          {"counterexamples", std::move(ces)}};
}

}  // namespace cafata

#endif  // CAFATA_ARGUMENTATION_HPP
