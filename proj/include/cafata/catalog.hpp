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

#ifndef CAFATA_CATALOG_HPP
#define CAFATA_CATALOG_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cafata/core.hpp"

namespace cafata {

/// Bidirectional mapping between external string ids and dense indices.
class IdTable {
 public:
  std::uint32_t intern(const std::string& name) {
    auto [it, inserted] = index_.try_emplace(name, static_cast<std::uint32_t>(names_.size()));
    if (inserted) names_.push_back(name);
    return it->second;
  }

  std::optional<std::uint32_t> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& name(std::size_t idx) const { return names_.at(idx); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t size() const noexcept { return names_.size(); }

  friend bool operator==(const IdTable& a, const IdTable& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// The features an item carries for a single feature type.
struct TypeGroup {
  TypeId type;
  std::vector<FeatureId> features;

  friend bool operator==(const TypeGroup&, const TypeGroup&) = default;
};

/// A (possibly partial) assignment of one condition per contextual factor, kept sorted by factor.
class ContextualSituation {
 public:
  using Entry = std::pair<FactorId, ConditionId>;

  ContextualSituation() = default;
  ContextualSituation(std::initializer_list<Entry> entries) {
    for (const auto& [f, c] : entries) set(f, c);
  }

  void set(FactorId factor, ConditionId condition) {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), factor,
                               [](const Entry& e, FactorId f) { return e.first < f; });
    if (it != entries_.end() && it->first == factor)
      it->second = condition;
    else
      entries_.insert(it, {factor, condition});
  }

  std::optional<ConditionId> find(FactorId factor) const {
    for (const auto& [f, c] : entries_)
      if (f == factor) return c;
    return std::nullopt;
  }

  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  friend bool operator==(const ContextualSituation&, const ContextualSituation&) = default;

 private:
  std::vector<Entry> entries_;
};

/// Condition assigned to a factor whose value is missing from an interaction log.
inline constexpr std::string_view kUnknownCondition = "unknown";

/// Items with their typed features, plus the context schema and every id table.
class Catalog {
 public:
  IdTable users;
  IdTable items;
  IdTable features;
  IdTable types;
  IdTable factors;

  // -- context schema ------------------------------------------------------

  FactorId add_factor(const std::string& name) {
    FactorId f{factors.intern(name)};
    if (factor_conditions_.size() < factors.size()) factor_conditions_.resize(factors.size());
    return f;
  }

  ConditionId add_condition(FactorId factor, const std::string& name) {
    if (factor.index() >= factors.size()) throw LookupError("unknown factor index " + std::to_string(factor.value));
    if (auto existing = find_condition(factor, name)) return *existing;
    ConditionId c{condition_names_.size()};
    condition_names_.push_back(name);
    condition_factor_.push_back(factor);
    factor_conditions_[factor.index()].push_back(c);
    return c;
  }

  std::optional<ConditionId> find_condition(FactorId factor, const std::string& name) const {
    for (ConditionId c : factor_conditions_.at(factor.index()))
      if (condition_names_[c.index()] == name) return c;
    return std::nullopt;
  }

  std::size_t num_conditions() const noexcept { return condition_names_.size(); }
  const std::string& condition_name(ConditionId c) const { return condition_names_.at(c.index()); }
  FactorId factor_of(ConditionId c) const { return condition_factor_.at(c.index()); }
  const std::vector<ConditionId>& conditions_of(FactorId f) const { return factor_conditions_.at(f.index()); }

  /// Parses factor-name -> condition-name pairs into a situation, validating against the schema.
  ContextualSituation situation(const std::map<std::string, std::string>& named) const {
    ContextualSituation cs;
    for (const auto& [factor_name, condition_name] : named) {
      auto f = factors.find(factor_name);
      if (!f) throw LookupError("unknown contextual factor '" + factor_name + "'");
      auto c = find_condition(FactorId{*f}, condition_name);
      if (!c) throw LookupError("unknown condition '" + condition_name + "' for factor '" + factor_name + "'");
      cs.set(FactorId{*f}, *c);
    }
    return cs;
  }

  /// Throws unless every condition belongs to the factor it is keyed under.
  void validate(const ContextualSituation& cs) const {
    for (const auto& [f, c] : cs) {
      if (f.index() >= factors.size()) throw LookupError("unknown factor index " + std::to_string(f.value));
      if (c.index() >= num_conditions()) throw LookupError("unknown condition index " + std::to_string(c.value));
      if (factor_of(c) != f)
        throw InvalidArgument("condition '" + condition_name(c) + "' does not belong to factor '" +
                              factors.name(f.index()) + "'");
    }
  }

  bool is_complete(const ContextualSituation& cs) const { return cs.size() == factors.size(); }

  std::map<std::string, std::string> named(const ContextualSituation& cs) const {
    std::map<std::string, std::string> out;
    for (const auto& [f, c] : cs) out[factors.name(f.index())] = condition_name(c);
    return out;
  }

  // -- items ---------------------------------------------------------------

  /// Registers `feature` under `type`. A feature belongs to exactly one type.
  FeatureId add_feature(const std::string& feature, TypeId type) {
    if (type.index() >= types.size()) throw LookupError("unknown type index " + std::to_string(type.value));
    auto existing = features.find(feature);
    FeatureId a{features.intern(feature)};
    if (!existing) {
      feature_type_.push_back(type);
    } else if (feature_type_[a.index()] != type) {
      throw InvalidArgument("feature '" + feature + "' already belongs to type '" +
                            types.name(feature_type_[a.index()].index()) + "'");
    }
    return a;
  }

  /// Adds one (item, type, feature) triple. Returns false when the triple was already present.
  bool add_triple(const std::string& item, const std::string& type, const std::string& feature) {
    TypeId t{types.intern(type)};
    FeatureId a = add_feature(feature, t);
    ItemId i{items.intern(item)};
    if (item_groups_.size() < items.size()) item_groups_.resize(items.size());
    auto& groups = item_groups_[i.index()];
    auto g = std::find_if(groups.begin(), groups.end(), [t](const TypeGroup& tg) { return tg.type == t; });
    if (g == groups.end()) {
      groups.push_back({t, {}});
      g = std::prev(groups.end());
    }
    if (std::find(g->features.begin(), g->features.end(), a) != g->features.end()) return false;
    g->features.push_back(a);
    return true;
  }

  const std::vector<TypeGroup>& groups(ItemId item) const {
    if (item.index() >= item_groups_.size()) throw LookupError("unknown item index " + std::to_string(item.value));
    return item_groups_[item.index()];
  }
  std::vector<TypeGroup>& mutable_groups(ItemId item) { return item_groups_.at(item.index()); }

  TypeId type_of(FeatureId a) const { return feature_type_.at(a.index()); }

  std::size_t feature_count(ItemId item) const {
    std::size_t n = 0;
    for (const auto& g : groups(item)) n += g.features.size();
    return n;
  }

  bool has_feature(ItemId item, FeatureId a) const {
    for (const auto& g : groups(item))
      if (std::find(g.features.begin(), g.features.end(), a) != g.features.end()) return true;
    return false;
  }

  std::vector<ItemId> items_with(FeatureId a) const {
    std::vector<ItemId> out;
    for (std::size_t i = 0; i < item_groups_.size(); ++i)
      if (has_feature(ItemId{i}, a)) out.push_back(ItemId{i});
    return out;
  }

  /// Throws unless every item carries at least one type with at least one feature.
  void validate_items() const {
    if (items.size() == 0) throw InvalidArgument("catalog has no items");
    for (std::size_t i = 0; i < items.size(); ++i) {
      bool any = false;
      for (const auto& g : groups(ItemId{i})) any = any || !g.features.empty();
      if (!any) throw InvalidArgument("item '" + items.name(i) + "' has no features");
    }
  }

  UserId user(const std::string& name) const { return UserId{require(users, name, "user")}; }
  ItemId item(const std::string& name) const { return ItemId{require(items, name, "item")}; }
  FeatureId feature(const std::string& name) const { return FeatureId{require(features, name, "feature")}; }

  friend bool operator==(const Catalog&, const Catalog&) = default;

 private:
  static std::uint32_t require(const IdTable& table, const std::string& name, const char* what) {
    auto idx = table.find(name);
    if (!idx) throw LookupError(std::string("unknown ") + what + " '" + name + "'");
    return *idx;
  }

  std::vector<std::string> condition_names_;
  std::vector<FactorId> condition_factor_;
  std::vector<std::vector<ConditionId>> factor_conditions_;
  std::vector<TypeId> feature_type_;
  std::vector<std::vector<TypeGroup>> item_groups_;
};

}  // namespace cafata

#endif  // CAFATA_CATALOG_HPP
