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

// JSON documents for catalogs, prepared datasets and model checkpoints.
// Every document carries `format` and `version`; readers reject anything else.

#ifndef CAFATA_CHECKPOINT_HPP
#define CAFATA_CHECKPOINT_HPP

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cafata/catalog.hpp"
#include "cafata/data_ingest.hpp"
#include "cafata/model.hpp"

namespace cafata {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

namespace detail {

inline void check_header(const Json& doc, const std::string& format, const std::string& path) {
  if (!doc.is_object() || doc.value("format", "") != format)
    throw ParseError(path, 0, "not a " + format + " document");
  if (doc.value("version", 0) != kFormatVersion)
    throw ParseError(path, 0, "unsupported " + format + " version " + doc.value("version", Json(0)).dump());
}

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 0, e.what());
  }
}

inline void write_json(const std::string& path, const Json& doc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << doc.dump(1) << '\n';
  if (!out) throw Error("failed writing '" + path + "'");
}

inline Json matrix_to_json(const Matrix& m) { return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}}; }

inline Matrix matrix_from_json(const Json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.rows() * m.cols()) throw InvalidArgument("matrix data length does not match its shape");
  m.data() = std::move(data);
  return m;
}

}  // namespace detail

// -- catalog ------------------------------------------------------------------

inline Json catalog_to_json(const Catalog& c) {
  Json j;
  j["users"] = c.users.names();
  j["types"] = c.types.names();
  Json feats = Json::array();
  for (std::size_t a = 0; a < c.features.size(); ++a)
    feats.push_back({{"name", c.features.name(a)}, {"type", c.types.name(c.type_of(FeatureId{a}).index())}});
  j["features"] = std::move(feats);
  Json factors = Json::array();
  for (std::size_t f = 0; f < c.factors.size(); ++f) {
    Json conds = Json::array();
    for (ConditionId cd : c.conditions_of(FactorId{f})) conds.push_back(c.condition_name(cd));
    factors.push_back({{"name", c.factors.name(f)}, {"conditions", std::move(conds)}});
  }
  j["factors"] = std::move(factors);
  Json items = Json::array();
  for (std::size_t i = 0; i < c.items.size(); ++i) {
    Json groups = Json::array();
    for (const auto& g : c.groups(ItemId{i})) {
      Json fs = Json::array();
      for (FeatureId a : g.features) fs.push_back(c.features.name(a.index()));
      groups.push_back({{"type", c.types.name(g.type.index())}, {"features", std::move(fs)}});
    }
    items.push_back({{"id", c.items.name(i)}, {"groups", std::move(groups)}});
  }
  j["items"] = std::move(items);
  return j;
}

/// Rebuilds a catalog with exactly the dense ids of the serialised one.
inline Catalog catalog_from_json(const Json& j) {
  Catalog c;
  for (const auto& u : j.at("users")) c.users.intern(u.get<std::string>());
  for (const auto& t : j.at("types")) c.types.intern(t.get<std::string>());
  for (const auto& a : j.at("features")) {
    const auto type = c.types.find(a.at("type").get<std::string>());
    if (!type) throw LookupError("feature table references unknown type '" + a.at("type").get<std::string>() + "'");
    c.add_feature(a.at("name").get<std::string>(), TypeId{*type});
  }
  for (const auto& f : j.at("factors")) {
    FactorId fid = c.add_factor(f.at("name").get<std::string>());
    for (const auto& cd : f.at("conditions")) c.add_condition(fid, cd.get<std::string>());
  }
  for (const auto& item : j.at("items")) {
    const auto id = item.at("id").get<std::string>();
    for (const auto& g : item.at("groups"))
      for (const auto& a : g.at("features"))
        c.add_triple(id, g.at("type").get<std::string>(), a.get<std::string>());
  }
  return c;
}

inline void save_catalog(const std::string& path, const Catalog& c) {
  Json doc{{"format", "cafata-catalog"}, {"version", kFormatVersion}};
  const Json body = catalog_to_json(c);
  for (const auto& [k, v] : body.items()) doc[k] = v;
  detail::write_json(path, doc);
}

inline Catalog load_catalog_json(const std::string& path) {
  const Json doc = detail::read_json(path);
  detail::check_header(doc, "cafata-catalog", path);
  try {
    return catalog_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 0, e.what());
  }
}

// -- dataset --------------------------------------------------------------------

inline Json dataset_to_json(const Dataset& d) {
  Json rows = Json::array();
  for (const auto& x : d.interactions) {
    Json ctx = Json::array();
    for (const auto& [f, c] : x.context) ctx.push_back(c.value);
    rows.push_back(Json::array({x.user.value, x.item.value, std::move(ctx), x.value, x.rating}));
  }
  return Json{{"format", "cafata-dataset"},
              {"version", kFormatVersion},
              {"scale", {{"raw_min", d.scale.raw_min}, {"raw_max", d.scale.raw_max}}},
              {"columns", {"user", "item", "conditions", "value", "rating"}},
              {"interactions", std::move(rows)},
              {"split", {{"train", d.split.train}, {"valid", d.split.valid}, {"test", d.split.test}}}};
}

inline Dataset dataset_from_json(const Json& j, const Catalog& catalog) {
  Dataset d;
  d.scale = RatingScale(j.at("scale").at("raw_min").get<double>(), j.at("scale").at("raw_max").get<double>());
  for (const auto& row : j.at("interactions")) {
    Interaction x;
    x.user = UserId{row.at(0).get<std::uint32_t>()};
    x.item = ItemId{row.at(1).get<std::uint32_t>()};
    if (x.user.index() >= catalog.users.size() || x.item.index() >= catalog.items.size())
      throw LookupError("dataset references ids outside the catalog");
    for (const auto& c : row.at(2)) {
      ConditionId cd{c.get<std::uint32_t>()};
      if (cd.index() >= catalog.num_conditions()) throw LookupError("dataset references an unknown condition");
      x.context.set(catalog.factor_of(cd), cd);
    }
    x.value = row.at(3).get<double>();
    x.rating = row.at(4).get<double>();
    d.interactions.push_back(std::move(x));
  }
  const auto& s = j.at("split");
  d.split.train = s.at("train").get<std::vector<std::size_t>>();
  d.split.valid = s.at("valid").get<std::vector<std::size_t>>();
  d.split.test = s.at("test").get<std::vector<std::size_t>>();
  for (const auto* part : {&d.split.train, &d.split.valid, &d.split.test})
    for (auto k : *part)
      if (k >= d.interactions.size()) throw LookupError("split index out of range");
  return d;
}

inline void save_dataset(const std::string& path, const Dataset& d) { detail::write_json(path, dataset_to_json(d)); }

inline Dataset load_dataset(const std::string& path, const Catalog& catalog) {
  const Json doc = detail::read_json(path);
  detail::check_header(doc, "cafata-dataset", path);
  try {
    return dataset_from_json(doc, catalog);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 0, e.what());
  }
}

// -- checkpoint -----------------------------------------------------------------

/// Everything needed to serve a trained model: configuration, id tables, parameters,
/// the rating scale and each user's training items (excluded from recommendations).
struct Checkpoint {
  std::string variant;  // one of the Variant names, or "mf"
  ModelConfig config;
  Catalog catalog;
  RatingScale scale;
  EmbeddingSpace space;               // unused for "mf"
  std::optional<MfSpace> mf;          // set for "mf"
  std::map<std::uint32_t, std::set<std::uint32_t>> history;  // user -> consumed items

  bool is_mf() const { return variant == "mf"; }
  Model model() const {
    if (is_mf()) throw InvalidArgument("matrix-factorisation checkpoints have no argumentation model");
    return Model{catalog, config, space};
  }
};

inline std::map<std::uint32_t, std::set<std::uint32_t>> history_of(const std::vector<Interaction>& rows) {
  std::map<std::uint32_t, std::set<std::uint32_t>> h;
  for (const auto& x : rows) h[x.user.value].insert(x.item.value);
  return h;
}

inline Json checkpoint_to_json(const Checkpoint& ck) {
  Json emb;
  if (ck.is_mf()) {
    emb["users"] = detail::matrix_to_json(ck.mf->users);
    emb["items"] = detail::matrix_to_json(ck.mf->items);
  } else {
    for (Table t : kAllTables) emb[to_string(t)] = detail::matrix_to_json(ck.space.table(t));
  }
  Json hist = Json::object();
  for (const auto& [u, items] : ck.history) {
    Json names = Json::array();
    for (auto i : items) names.push_back(ck.catalog.items.name(i));
    hist[ck.catalog.users.name(u)] = std::move(names);
  }
  return Json{{"format", "cafata-checkpoint"},
              {"version", kFormatVersion},
              {"variant", ck.variant},
              {"model_config",
               {{"dim", ck.config.dim},
                {"variant", ck.variant},
                {"leaky_relu_slope", ck.config.leaky_relu_slope},
                {"seed", ck.config.seed}}},
              {"scale", {{"raw_min", ck.scale.raw_min}, {"raw_max", ck.scale.raw_max}}},
              {"catalog", catalog_to_json(ck.catalog)},
              {"history", std::move(hist)},
              {"embeddings", std::move(emb)}};
}

inline Checkpoint checkpoint_from_json(const Json& doc) {
  Checkpoint ck;
  ck.variant = doc.at("variant").get<std::string>();
  const auto& mc = doc.at("model_config");
  ck.config.dim = mc.at("dim").get<std::size_t>();
  ck.config.leaky_relu_slope = mc.at("leaky_relu_slope").get<double>();
  ck.config.seed = mc.at("seed").get<std::uint64_t>();
  ck.scale = RatingScale(doc.at("scale").at("raw_min").get<double>(), doc.at("scale").at("raw_max").get<double>());
  ck.catalog = catalog_from_json(doc.at("catalog"));
  for (const auto& [user, items] : doc.at("history").items()) {
    auto& set = ck.history[ck.catalog.user(user).value];
    for (const auto& i : items) set.insert(ck.catalog.item(i.get<std::string>()).value);
  }
  const auto& emb = doc.at("embeddings");
  if (ck.variant == "mf") {
    MfSpace mf;
    mf.dim = ck.config.dim;
    mf.users = detail::matrix_from_json(emb.at("users"));
    mf.items = detail::matrix_from_json(emb.at("items"));
    ck.mf = std::move(mf);
  } else {
    ck.config.variant = parse_variant(ck.variant);
    ck.space.dim = ck.config.dim;
    for (Table t : kAllTables) ck.space.table(t) = detail::matrix_from_json(emb.at(to_string(t)));
    ck.space.check_shape(ck.catalog);
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  detail::write_json(path, checkpoint_to_json(ck));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  const Json doc = detail::read_json(path);
  detail::check_header(doc, "cafata-checkpoint", path);
  try {
    return checkpoint_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 0, e.what());
  }
}

}  // namespace cafata

#endif  // CAFATA_CHECKPOINT_HPP
