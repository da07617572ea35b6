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

// Loading and preprocessing of interaction logs, item-feature triples and
// context schemas.
//
// File formats:
//   interactions   CSV, header `user,item,value,<factor1>,<factor2>,...`
//   feature triples TSV, `item<TAB>type<TAB>feature` (no header)
//   context schema JSON, `{ "factor": ["condition", ...], ... }`

#ifndef CAFATA_DATA_INGEST_HPP
#define CAFATA_DATA_INGEST_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "cafata/catalog.hpp"
#include "cafata/core.hpp"

namespace cafata {

/// One log row before id resolution.
struct RawInteraction {
  std::string user;
  std::string item;
  double value = 0.0;
  std::map<std::string, std::string> context;
};

/// One log row resolved against a Catalog. `value` is the raw-scale target, `rating` the [-1, 1] one.
struct Interaction {
  UserId user;
  ItemId item;
  ContextualSituation context;
  double value = 0.0;
  double rating = 0.0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Non-fatal issues found while loading (duplicates, dropped rows).
using Warnings = std::vector<std::string>;

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  return in;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Splits one CSV record. Double quotes group fields and `""` escapes a quote.
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    char ch = line[k];
    if (quoted) {
      if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline double parse_real(const std::string& text, const std::string& path, std::size_t line) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    if (!std::isfinite(v)) throw ParseError(path, line, "non-finite value '" + text + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ParseError(path, line, "not a number: '" + text + "'");
  }
}

}  // namespace detail

/// Adds the factors and conditions of a JSON schema file to `catalog`, keeping file order.
/// Every factor also receives the reserved `unknown` condition.
inline void load_context_schema(const std::string& path, Catalog& catalog) {
  auto in = detail::open_input(path);
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, 0, e.what());
  }
  if (!doc.is_object()) throw ParseError(path, 0, "context schema must be a JSON object");
  for (const auto& [factor, conditions] : doc.items()) {
    if (!conditions.is_array()) throw ParseError(path, 0, "conditions of factor '" + factor + "' must be an array");
    FactorId f = catalog.add_factor(factor);
    for (const auto& c : conditions) {
      if (!c.is_string()) throw ParseError(path, 0, "condition names of factor '" + factor + "' must be strings");
      catalog.add_condition(f, c.get<std::string>());
    }
    catalog.add_condition(f, std::string(kUnknownCondition));
  }
}

/// Builds a Catalog from a feature-triples TSV and a context schema JSON.
/// Duplicate triples are dropped with a warning.
inline Catalog load_catalog(const std::string& triples_path, const std::string& schema_path,
                            Warnings* warnings = nullptr) {
  Catalog catalog;
  load_context_schema(schema_path, catalog);

  auto in = detail::open_input(triples_path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(detail::trim(col));
    if (cols.size() != 3)
      throw ParseError(triples_path, lineno,
                       "expected 3 tab-separated columns (item, type, feature), got " + std::to_string(cols.size()));
    if (cols[0].empty() || cols[1].empty() || cols[2].empty()) throw ParseError(triples_path, lineno, "empty column");
    try {
      if (!catalog.add_triple(cols[0], cols[1], cols[2]) && warnings)
        warnings->push_back(triples_path + ":" + std::to_string(lineno) + ": duplicate triple (" + cols[0] + ", " +
                            cols[1] + ", " + cols[2] + ") ignored");
    } catch (const InvalidArgument& e) {
      throw ParseError(triples_path, lineno, e.what());
    }
  }
  if (catalog.items.size() == 0) throw ParseError(triples_path, 0, "catalog has no items");
  catalog.validate_items();
  return catalog;
}

/// Reads an interactions CSV. Context columns must name factors of the schema; empty
/// cells and factors absent from the header map to the `unknown` condition.
inline std::vector<RawInteraction> read_interactions(const std::string& path, const Catalog& catalog) {
  auto in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = detail::split_csv(line);
  if (header.size() < 3 || header[0] != "user" || header[1] != "item" || header[2] != "value")
    throw ParseError(path, 1, "header must start with user,item,value");
  for (std::size_t k = 3; k < header.size(); ++k)
    if (!catalog.factors.find(header[k])) throw ParseError(path, 1, "unknown contextual factor '" + header[k] + "'");

  std::vector<RawInteraction> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto cols = detail::split_csv(line);
    if (cols.size() != header.size())
      throw ParseError(path, lineno,
                       "expected " + std::to_string(header.size()) + " columns, got " + std::to_string(cols.size()));
    RawInteraction r;
    r.user = cols[0];
    r.item = cols[1];
    if (r.user.empty() || r.item.empty()) throw ParseError(path, lineno, "empty user or item");
    r.value = detail::parse_real(cols[2], path, lineno);
    for (std::size_t k = 3; k < header.size(); ++k) {
      FactorId f{*catalog.factors.find(header[k])};
      std::string cond = cols[k].empty() ? std::string(kUnknownCondition) : cols[k];
      if (!catalog.find_condition(f, cond))
        throw ParseError(path, lineno, "unknown condition '" + cond + "' for factor '" + header[k] + "'");
      r.context[header[k]] = cond;
    }
    for (std::size_t f = 0; f < catalog.factors.size(); ++f)
      r.context.try_emplace(catalog.factors.name(f), std::string(kUnknownCondition));
    out.push_back(std::move(r));
  }
  return out;
}

/// value <- ln(1 + count). Counts must be non-negative.
inline std::vector<RawInteraction> log_transform_counts(std::vector<RawInteraction> interactions) {
  for (auto& r : interactions) {
    if (!(r.value >= 0.0))
      throw InvalidArgument("negative usage count " + std::to_string(r.value) + " for (" + r.user + ", " + r.item +
                            ")");
    r.value = std::log1p(r.value);
  }
  return interactions;
}

/// Resolves external ids. Users are interned into the catalog; rows whose item is not in
/// the catalog are dropped and counted in `dropped`.
inline std::vector<Interaction> resolve_interactions(const std::vector<RawInteraction>& raw, Catalog& catalog,
                                                     std::size_t* dropped = nullptr) {
  std::vector<Interaction> out;
  out.reserve(raw.size());
  std::size_t skipped = 0;
  for (const auto& r : raw) {
    auto item = catalog.items.find(r.item);
    if (!item) {
      ++skipped;
      continue;
    }
    Interaction x;
    x.user = UserId{catalog.users.intern(r.user)};
    x.item = ItemId{*item};
    x.context = catalog.situation(r.context);
    x.value = r.value;
    out.push_back(std::move(x));
  }
  if (dropped) *dropped = skipped;
  return out;
}

/// Iteratively removes users and items with fewer than `k` interactions until every
/// remaining user and item has at least `k`. `user_of` / `item_of` project a row to hashable keys.
template <class Row, class UserOf, class ItemOf>
std::vector<Row> k_core_filter(std::vector<Row> rows, std::size_t k, UserOf user_of, ItemOf item_of) {
  if (k == 0) throw InvalidArgument("k_core_filter: k must be >= 1");
  using UserKey = std::decay_t<decltype(user_of(rows.front()))>;
  using ItemKey = std::decay_t<decltype(item_of(rows.front()))>;
  while (true) {
    std::unordered_map<UserKey, std::size_t> user_deg;
    std::unordered_map<ItemKey, std::size_t> item_deg;
    for (const auto& r : rows) {
      ++user_deg[user_of(r)];
      ++item_deg[item_of(r)];
    }
    std::vector<Row> kept;
    kept.reserve(rows.size());
    for (auto& r : rows)
      if (user_deg[user_of(r)] >= k && item_deg[item_of(r)] >= k) kept.push_back(std::move(r));
    if (kept.size() == rows.size()) return kept;
    rows = std::move(kept);
  }
}

inline std::vector<Interaction> k_core_filter(std::vector<Interaction> rows, std::size_t k) {
  return k_core_filter(
      std::move(rows), k, [](const Interaction& x) { return x.user; }, [](const Interaction& x) { return x.item; });
}

inline std::vector<RawInteraction> k_core_filter(std::vector<RawInteraction> rows, std::size_t k) {
  return k_core_filter(
      std::move(rows), k, [](const RawInteraction& x) { return x.user; },
      [](const RawInteraction& x) { return x.item; });
}

/// Raw rating range mapped linearly onto [-1, 1].
struct RatingScale {
  double raw_min = 0.0;
  double raw_max = 1.0;

  RatingScale() = default;
  RatingScale(double lo, double hi) : raw_min(lo), raw_max(hi) {
    if (!(lo < hi)) throw InvalidArgument("rating scale requires raw_min < raw_max");
  }

  friend bool operator==(const RatingScale&, const RatingScale&) = default;
};

inline double scale_rating(double value, const RatingScale& s) {
  if (!(value >= s.raw_min && value <= s.raw_max))
    throw InvalidArgument("value " + std::to_string(value) + " outside rating scale [" + std::to_string(s.raw_min) +
                          ", " + std::to_string(s.raw_max) + "]");
  return 2.0 * (value - s.raw_min) / (s.raw_max - s.raw_min) - 1.0;
}

inline double inverse_scale(double scaled, const RatingScale& s) {
  return s.raw_min + (scaled + 1.0) * 0.5 * (s.raw_max - s.raw_min);
}

/// Smallest scale covering every value.
inline RatingScale observed_scale(const std::vector<Interaction>& rows) {
  if (rows.empty()) throw InvalidArgument("cannot infer a rating scale from no interactions");
  auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                      [](const Interaction& a, const Interaction& b) { return a.value < b.value; });
  return RatingScale(lo->value, hi->value > lo->value ? hi->value : lo->value + 1.0);
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;

  friend bool operator==(const Split&, const Split&) = default;
};

struct Dataset {
  std::vector<Interaction> interactions;
  Split split;
  RatingScale scale;

  std::vector<Interaction> rows(const std::vector<std::size_t>& idx) const {
    std::vector<Interaction> out;
    out.reserve(idx.size());
    for (auto k : idx) out.push_back(interactions.at(k));
    return out;
  }
  std::vector<Interaction> train() const { return rows(split.train); }
  std::vector<Interaction> valid() const { return rows(split.valid); }
  std::vector<Interaction> test() const { return rows(split.test); }
};

/// Seeded random train/valid/test partition. Every user with at least three interactions
/// keeps at least one of them in the training split.
inline Split split_dataset(const std::vector<Interaction>& rows, std::array<double, 3> ratios, std::uint64_t seed) {
  for (double r : ratios)
    if (!(r > 0.0)) throw InvalidArgument("split ratios must be positive");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw InvalidArgument("split ratios must sum to 1");

  const std::size_t n = rows.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::unordered_map<UserId, std::size_t> degree;
  for (const auto& r : rows) ++degree[r.user];
  std::vector<bool> reserved(n, false);
  std::unordered_set<UserId> anchored;
  std::size_t n_reserved = 0;
  for (auto k : order) {
    const UserId u = rows[k].user;
    if (degree[u] >= 3 && anchored.insert(u).second) {
      reserved[k] = true;
      ++n_reserved;
    }
  }

  const std::size_t free = n - n_reserved;
  std::size_t n_valid = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1]));
  std::size_t n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[2]));
  n_valid = std::min(n_valid, free);
  n_test = std::min(n_test, free - n_valid);

  Split s;
  for (auto k : order) {
    if (!reserved[k] && s.valid.size() < n_valid)
      s.valid.push_back(k);
    else if (!reserved[k] && s.test.size() < n_test)
      s.test.push_back(k);
    else
      s.train.push_back(k);
  }
  return s;
}

/// Fills `rating` from `value` under `scale`.
inline void apply_scale(std::vector<Interaction>& rows, const RatingScale& scale) {
  for (auto& r : rows) r.rating = scale_rating(r.value, scale);
}

}  // namespace cafata

#endif  // CAFATA_DATA_INGEST_HPP
