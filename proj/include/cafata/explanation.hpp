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

#ifndef CAFATA_EXPLANATION_HPP
#define CAFATA_EXPLANATION_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "cafata/argumentation.hpp"
#include "cafata/catalog.hpp"
#include "cafata/core.hpp"
#include "cafata/model.hpp"

namespace cafata {

enum class Scenario { kStrongRecommendation, kWeakRecommendation, kNotRecommended };

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::kStrongRecommendation: return "strong_recommendation";
    case Scenario::kWeakRecommendation: return "weak_recommendation";
    case Scenario::kNotRecommended: return "not_recommended";
  }
  return "?";
}

struct Thresholds {
  double low = 0.0;
  double high = 0.5;
};

inline Scenario classify_scenario(double rating, Thresholds th = {}) {
  if (!(th.low < th.high)) throw InvalidArgument("scenario thresholds require low < high");
  if (rating >= th.high) return Scenario::kStrongRecommendation;
  if (rating >= th.low) return Scenario::kWeakRecommendation;
  return Scenario::kNotRecommended;
}

/// How "strongest argument" is measured.
enum class ArgumentRanking {
  kWeighted,  // w * sigma, the argument's additive share of r-hat
  kRaw,       // sigma alone
};

struct CitedArgument {
  FeatureId feature;
  TypeId type;
  Polarity polarity = Polarity::kNeutral;
  double strength = 0.0;
  double weight = 0.0;
};

struct ContextCitation {
  FactorId factor;
  ConditionId condition;
  double importance = 0.0;
};

struct ContrastiveDetail {
  ItemId recommended;
  ItemId contrasted;
  double recommended_rating = 0.0;
  double contrasted_rating = 0.0;
  FeatureId pro_feature;
  FeatureId con_feature;
  TypeId pro_type;
  bool cross_type_fallback = false;  // contrasted item had no feature of the pro type
};

struct Explanation {
  Scenario scenario = Scenario::kWeakRecommendation;
  ItemId item;
  double rating = 0.0;
  std::optional<ContextCitation> top_context;
  std::vector<CitedArgument> cited;
  std::optional<ContrastiveDetail> contrastive;
  std::string text;
};

namespace detail {

inline std::string join_and(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (k > 0) out += (k + 1 == parts.size()) ? " and " : ", ";
    out += parts[k];
  }
  return out;
}

inline std::string feature_phrase(const Catalog& c, const CitedArgument& a) {
  return c.features.name(a.feature.index()) + " (" + c.types.name(a.type.index()) + ")";
}

inline double rank_key(const Argument& a, ArgumentRanking r) {
  return r == ArgumentRanking::kWeighted ? a.weight * a.strength : a.strength;
}

}  // namespace detail

/// The condition of the factor the user weighs most under this situation, if any.
inline std::optional<ContextCitation> top_context(const PredictionBreakdown& b) {
  std::optional<ContextCitation> best;
  for (const auto& [f, c] : b.context) {
    if (f.index() >= b.factors.size()) continue;
    const double pi = b.factors[f.index()].importance;
    if (!best || pi > best->importance) best = ContextCitation{f, c, pi};
  }
  return best;
}

/// Template explanation for one prediction:
///   strong  -> the two strongest supporters
///   weak    -> the strongest supporter and the strongest attacker
///   not     -> the two strongest attackers
/// plus the most important contextual condition. Fewer arguments are cited when the
/// framework lacks them. Ties break towards the lower feature id.
inline Explanation template_explanation(const PredictionBreakdown& b, const Taf& taf, Scenario scenario,
                                        const Catalog& catalog,
                                        ArgumentRanking ranking = ArgumentRanking::kWeighted) {
  if (taf.arguments.empty())
    throw InvalidArgument("item '" + catalog.items.name(b.item.index()) + "' has no features to explain");
  std::vector<const Argument*> sup, att;
  for (const auto& a : taf.arguments) {
    if (a.polarity == Polarity::kSupport) sup.push_back(&a);
    if (a.polarity == Polarity::kAttack) att.push_back(&a);
  }
  auto by_strength = [ranking](const Argument* x, const Argument* y) {
    const double kx = std::abs(detail::rank_key(*x, ranking)), ky = std::abs(detail::rank_key(*y, ranking));
    if (kx != ky) return kx > ky;
    return x->feature < y->feature;
  };
  std::sort(sup.begin(), sup.end(), by_strength);
  std::sort(att.begin(), att.end(), by_strength);

  Explanation e;
  e.scenario = scenario;
  e.item = b.item;
  e.rating = b.rating;
  e.top_context = top_context(b);
  auto cite = [&](const Argument* a) { e.cited.push_back({a->feature, a->type, a->polarity, a->strength, a->weight}); };
  switch (scenario) {
    case Scenario::kStrongRecommendation:
      for (std::size_t k = 0; k < std::min<std::size_t>(2, sup.size()); ++k) cite(sup[k]);
      break;
    case Scenario::kWeakRecommendation:
      if (!sup.empty()) cite(sup[0]);
      if (!att.empty()) cite(att[0]);
      break;
    case Scenario::kNotRecommended:
      for (std::size_t k = 0; k < std::min<std::size_t>(2, att.size()); ++k) cite(att[k]);
      break;
  }

  std::vector<std::string> liked, disliked;
  for (const auto& c : e.cited)
    (c.polarity == Polarity::kSupport ? liked : disliked).push_back(detail::feature_phrase(catalog, c));
  std::string ctx;
  if (e.top_context)
    ctx = " when " + catalog.factors.name(e.top_context->factor.index()) + " is " +
          catalog.condition_name(e.top_context->condition);
  const std::string item = catalog.items.name(b.item.index());
  std::string text;
  switch (scenario) {
    case Scenario::kStrongRecommendation:
      text = "We strongly recommend " + item + ctx;
      if (!liked.empty()) text += " because you like " + detail::join_and(liked);
      break;
    case Scenario::kWeakRecommendation:
      text = "We recommend " + item + ctx;
      if (!liked.empty()) text += " because you like " + detail::join_and(liked);
      if (!disliked.empty())
        text += (liked.empty() ? " even though you dislike " : ", although you dislike ") + detail::join_and(disliked);
      break;
    case Scenario::kNotRecommended:
      text = "We do not recommend " + item + ctx;
      if (!disliked.empty()) text += " because you dislike " + detail::join_and(disliked);
      break;
  }
  e.text = text + ".";
  return e;
}

/// Contrastive explanation over a candidate set:
///   i_rec  = argmax r-hat
///   at_pro = argmax over i_rec's features of pi_t * P, t_pro its type
///   i_con  = argmin r-hat over the remaining candidates
///   at_con = argmin over i_con's features of type t_pro of pi_t * P
/// Falls back to i_con's overall argmin feature (flagged) when it has no feature of type
/// t_pro. Ties break towards the lower item / feature id.
inline Explanation contrastive_explanation(const Model& model, UserId user, const ContextualSituation& cs,
                                           std::vector<ItemId> candidates, const Overrides& overrides = {},
                                           Thresholds th = {}) {
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  if (candidates.size() < 2) throw InvalidArgument("contrastive explanation needs at least two candidate items");
  const Catalog& cat = model.catalog;

  std::vector<PredictionBreakdown> preds;
  preds.reserve(candidates.size());
  for (ItemId i : candidates) preds.push_back(model.predict(user, i, cs, overrides));

  std::size_t rec = 0;
  for (std::size_t k = 1; k < preds.size(); ++k)
    if (preds[k].rating > preds[rec].rating) rec = k;
  std::size_t con = rec == 0 ? 1 : 0;
  for (std::size_t k = 0; k < preds.size(); ++k)
    if (k != rec && preds[k].rating < preds[con].rating) con = k;

  struct Pick {
    FeatureId feature;
    TypeId type;
    double strength = 0.0;
    double importance = 0.0;
    double weight = 0.0;
    bool found = false;
  };
  auto extreme = [](const PredictionBreakdown& b, std::optional<TypeId> only, bool want_max) {
    Pick best;
    double best_key = 0.0;
    for (const auto& tt : b.types) {
      if (only && tt.type != *only) continue;
      for (const auto& ft : tt.features) {
        const double key = tt.importance * ft.rating;
        const bool better = !best.found || (want_max ? key > best_key : key < best_key) ||
                            (key == best_key && ft.feature < best.feature);
        if (better) {
          best = {ft.feature, tt.type, ft.rating, tt.importance, tt.feature_weight(), true};
          best_key = key;
        }
      }
    }
    return best;
  };

  const auto& brec = preds[rec];
  const auto& bcon = preds[con];
  const Pick pro = extreme(brec, std::nullopt, true);
  Pick against = extreme(bcon, pro.type, false);
  const bool fallback = !against.found;
  if (fallback) against = extreme(bcon, std::nullopt, false);

  Explanation e;
  e.item = brec.item;
  e.rating = brec.rating;
  e.scenario = classify_scenario(brec.rating, th);
  e.top_context = top_context(brec);
  e.cited.push_back({pro.feature, pro.type, classify(pro.strength, 0.0), pro.strength, pro.weight});
  e.cited.push_back({against.feature, against.type, classify(against.strength, 0.0), against.strength, against.weight});
  e.contrastive = ContrastiveDetail{brec.item,  bcon.item,       brec.rating, bcon.rating,
                                    pro.feature, against.feature, pro.type,    fallback};
  const std::string ir = cat.items.name(brec.item.index()), ic = cat.items.name(bcon.item.index());
  const std::string ap = cat.features.name(pro.feature.index()), ac = cat.features.name(against.feature.index());
  e.text = "We recommend " + ir + " instead of " + ic + " because you prefer " + ap + " and " + ir + " is " + ap +
           " while " + ic + " is " + ac + ".";
  return e;
}

inline nlohmann::ordered_json explanation_to_json(const Explanation& e, const Catalog& c) {
  nlohmann::ordered_json ctx = nullptr;
  if (e.top_context)
    ctx = {{"factor", c.factors.name(e.top_context->factor.index())},
           {"condition", c.condition_name(e.top_context->condition)},
           {"importance", e.top_context->importance}};
  nlohmann::ordered_json args = nlohmann::ordered_json::array();
  for (const auto& a : e.cited)
    args.push_back({{"feature", c.features.name(a.feature.index())},
                    {"type", c.types.name(a.type.index())},
                    {"polarity", symbol(a.polarity)},
                    {"strength", a.strength},
                    {"weight", a.weight}});
  nlohmann::ordered_json j = {{"scenario", to_string(e.scenario)},
                              {"item", c.items.name(e.item.index())},
                              {"rating", e.rating},
                              {"context", std::move(ctx)},
                              {"arguments", std::move(args)},
                              {"text", e.text}};
  if (e.contrastive) {
    const auto& d = *e.contrastive;
    j["contrastive"] = {{"recommended", c.items.name(d.recommended.index())},
                        {"contrasted", c.items.name(d.contrasted.index())},
                        {"recommended_rating", d.recommended_rating},
                        {"contrasted_rating", d.contrasted_rating},
                        {"pro_feature", c.features.name(d.pro_feature.index())},
                        {"con_feature", c.features.name(d.con_feature.index())},
                        {"pro_type", c.types.name(d.pro_type.index())},
                        {"cross_type_fallback", d.cross_type_fallback}};
  }
  return j;
}

// -- interactive feedback -----------------------------------------------------

enum class Direction { kLike, kDislike };

inline Direction parse_direction(const std::string& s) {
  if (s == "like") return Direction::kLike;
  if (s == "dislike") return Direction::kDislike;
  throw InvalidArgument("direction must be 'like' or 'dislike', got '" + s + "'");
}

struct JournalEntry {
  std::int64_t timestamp_ms = 0;
  UserId user;
  FeatureId feature;
  double old_rating = 0.0;
  double new_rating = 0.0;
};

inline constexpr double kFeedbackBound = 1.5;

/// Per-(user, feature) rating overrides plus an append-only journal of every change.
/// Writers are serialised per user; readers take consistent per-user snapshots. When a
/// journal file is attached, each entry is flushed to disk before it is applied in memory.
class FeedbackStore {
 public:
  FeedbackStore() = default;
  FeedbackStore(const FeedbackStore&) = delete;
  FeedbackStore& operator=(const FeedbackStore&) = delete;

  /// Appends future entries to `path` as JSON lines, naming users and features via `catalog`.
  void attach_journal(const std::string& path, const Catalog& catalog) {
    std::lock_guard lk(file_mu_);
    file_.open(path, std::ios::app);
    if (!file_) throw Error("cannot open feedback journal '" + path + "'");
    catalog_ = &catalog;
  }

  std::optional<double> find(UserId u, FeatureId a) const {
    std::shared_lock lk(mu_);
    auto it = overrides_.find(u);
    if (it == overrides_.end()) return std::nullopt;
    auto jt = it->second.find(a);
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
  }

  Overrides snapshot(UserId u) const {
    std::shared_lock lk(mu_);
    auto it = overrides_.find(u);
    return it == overrides_.end() ? Overrides{} : it->second;
  }

  std::vector<JournalEntry> journal() const {
    std::shared_lock lk(mu_);
    return journal_;
  }

  std::map<std::pair<std::uint32_t, std::uint32_t>, double> overrides() const {
    std::shared_lock lk(mu_);
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> out;
    for (const auto& [u, m] : overrides_)
      for (const auto& [a, v] : m) out[{u.value, a.value}] = v;
    return out;
  }

  /// Atomically (per user) reads the effective rating, computes the replacement with `rule`
  /// and records it. `model_rating` is used when no override exists yet.
  JournalEntry update(UserId u, FeatureId a, double model_rating, const std::function<double(double)>& rule) {
    std::mutex& user_mu = user_lock(u);
    std::lock_guard user_lk(user_mu);
    JournalEntry e;
    e.timestamp_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    e.user = u;
    e.feature = a;
    e.old_rating = find(u, a).value_or(model_rating);
    e.new_rating = rule(e.old_rating);
    persist(e);
    std::unique_lock lk(mu_);
    overrides_[u][a] = e.new_rating;
    journal_.push_back(e);
    return e;
  }

  /// Rebuilds the override map implied by a journal.
  static std::map<std::pair<std::uint32_t, std::uint32_t>, double> replay(const std::vector<JournalEntry>& journal) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> out;
    for (const auto& e : journal) out[{e.user.value, e.feature.value}] = e.new_rating;
    return out;
  }

  /// Loads entries from a JSON-lines journal, e.g. after a restart.
  void load_journal(const std::string& path, const Catalog& catalog) {
    std::ifstream in(path);
    if (!in) return;
    std::string line;
    std::size_t lineno = 0;
    std::unique_lock lk(mu_);
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        JournalEntry e;
        e.timestamp_ms = j.at("ts").get<std::int64_t>();
        e.user = catalog.user(j.at("user").get<std::string>());
        e.feature = catalog.feature(j.at("feature").get<std::string>());
        e.old_rating = j.at("old").get<double>();
        e.new_rating = j.at("new").get<double>();
        overrides_[e.user][e.feature] = e.new_rating;
        journal_.push_back(e);
      } catch (const nlohmann::json::exception& ex) {
        throw ParseError(path, lineno, ex.what());
      }
    }
  }

 private:
  std::mutex& user_lock(UserId u) {
    std::lock_guard lk(locks_mu_);
    auto& p = user_locks_[u];
    if (!p) p = std::make_unique<std::mutex>();
    return *p;
  }

  void persist(const JournalEntry& e) {
    std::lock_guard lk(file_mu_);
    if (!file_.is_open()) return;
    nlohmann::ordered_json j{{"ts", e.timestamp_ms},
                             {"user", catalog_->users.name(e.user.index())},
                             {"feature", catalog_->features.name(e.feature.index())},
                             {"old", e.old_rating},
                             {"new", e.new_rating}};
    file_ << j.dump() << '\n';
    file_.flush();
    if (!file_) throw Error("failed writing feedback journal");
  }

  mutable std::shared_mutex mu_;
  std::unordered_map<UserId, Overrides> overrides_;
  std::vector<JournalEntry> journal_;

  std::mutex locks_mu_;
  std::unordered_map<UserId, std::unique_ptr<std::mutex>> user_locks_;

  std::mutex file_mu_;
  std::ofstream file_;
  const Catalog* catalog_ = nullptr;
};

/// dislike: P' = min(P, 0) - step;  like: P' = max(P, 0) + step;  P' clamped to [-1.5, 1.5].
inline double feedback_rule(double current, Direction dir, double step) {
  const double next = dir == Direction::kDislike ? std::min(current, 0.0) - step : std::max(current, 0.0) + step;
  return std::clamp(next, -kFeedbackBound, kFeedbackBound);
}

/// Records a like/dislike of `feature` by `user`. `model_rating` is the model's P for the
/// pair, used when the user has no override for the feature yet.
inline JournalEntry apply_feedback(FeedbackStore& store, const Catalog& catalog, UserId user, FeatureId feature,
                                   Direction dir, double step, double model_rating) {
  if (!(step > 0.0)) throw InvalidArgument("feedback step must be positive");
  if (feature.index() >= catalog.features.size())
    throw LookupError("unknown feature index " + std::to_string(feature.value));
  if (user.index() >= catalog.users.size()) throw LookupError("unknown user index " + std::to_string(user.value));
  return store.update(user, feature, model_rating, [&](double p) { return feedback_rule(p, dir, step); });
}

/// The model's rating of `feature` for `user` under `cs` (no overrides).
inline double model_feature_rating(const Model& model, UserId user, const ContextualSituation& cs, FeatureId feature) {
  if (feature.index() >= model.catalog.features.size())
    throw LookupError("unknown feature index " + std::to_string(feature.value));
  const auto ucs = contextual_user_embedding(user, cs, model.space, model.catalog, model.config);
  return feature_rating(ucs, feature, model.space);
}

}  // namespace cafata

#endif  // CAFATA_EXPLANATION_HPP
