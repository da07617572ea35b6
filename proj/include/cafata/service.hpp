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

// HTTP/JSON front end over a loaded checkpoint. Requires cpp-httplib and a thread library.

#ifndef CAFATA_SERVICE_HPP
#define CAFATA_SERVICE_HPP

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <httplib.h>

#include "cafata/argumentation.hpp"
#include "cafata/checkpoint.hpp"
#include "cafata/explanation.hpp"
#include "cafata/model.hpp"

namespace cafata {

/// An error that maps directly onto an HTTP status and a machine-readable code.
class HttpError : public Error {
 public:
  HttpError(int status, std::string code, const std::string& message)
      : Error(message), status_(status), code_(std::move(code)) {}
  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }

 private:
  int status_;
  std::string code_;
};

struct ServiceOptions {
  std::chrono::seconds session_ttl{3600};
  std::string journal_path;  // empty: feedback is kept in memory only
  std::string cors_origin = "*";
  double feedback_step = 0.5;
  double neutral_eps = 0.05;  // |P| at or below this is displayed as neutral
  Thresholds thresholds;
  std::size_t default_n = 10;
};

class RecommenderService {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  explicit RecommenderService(const Checkpoint& ck, ServiceOptions opts = {},
                              Clock clock = [] { return std::chrono::steady_clock::now(); })
      : model_(ck.model()), scale_(ck.scale), history_(ck.history), opts_(std::move(opts)), clock_(std::move(clock)),
        id_rng_(std::random_device{}()) {
    if (!opts_.journal_path.empty()) {
      store_.load_journal(opts_.journal_path, model_.catalog);
      store_.attach_journal(opts_.journal_path, model_.catalog);
    }
  }

  const Model& model() const noexcept { return model_; }
  FeedbackStore& store() noexcept { return store_; }

  /// Returns the session id and whether it was newly created.
  std::pair<Json, bool> create_session(const Json& body) {
    if (!body.is_object()) throw HttpError(400, "bad_request", "request body must be a JSON object");
    if (!body.contains("user") || !body["user"].is_string())
      throw HttpError(400, "bad_request", "field 'user' (string) is required");
    const Catalog& cat = model_.catalog;
    const std::string user_name = body["user"].get<std::string>();
    const auto uid = cat.users.find(user_name);
    if (!uid) throw HttpError(404, "unknown_user", "unknown user '" + user_name + "'");

    std::map<std::string, std::string> named;
    if (body.contains("context") && !body["context"].is_null()) {
      if (!body["context"].is_object()) throw HttpError(400, "bad_request", "field 'context' must be an object");
      for (const auto& [k, v] : body["context"].items()) {
        if (!v.is_string()) throw HttpError(400, "bad_request", "condition for factor '" + k + "' must be a string");
        named[k] = v.get<std::string>();
      }
    }
    ContextualSituation cs;
    try {
      cs = cat.situation(named);
    } catch (const LookupError& e) {
      throw HttpError(404, "unknown_condition", e.what());
    }
    if (uses_context(model_.config.variant) && !cat.is_complete(cs))
      throw HttpError(400, "incomplete_context", "context must assign a condition to every factor (" +
                                                     std::to_string(cat.factors.size()) + " expected, " +
                                                     std::to_string(cs.size()) + " given)");
    if (!uses_context(model_.config.variant)) cs = {};

    std::lock_guard lk(sessions_mu_);
    expire_locked();
    const Key key{*uid, cs};
    if (auto it = by_key_.find(key); it != by_key_.end()) return {session_json(sessions_.at(it->second)), false};
    Session s{new_id_locked(), UserId{*uid}, cs, clock_()};
    by_key_[key] = s.id;
    auto [it, _] = sessions_.emplace(s.id, std::move(s));
    return {session_json(it->second), true};
  }

  Json recommendations(const std::string& id, std::optional<std::size_t> n) const {
    const Session s = session(id);
    const std::size_t limit = n.value_or(opts_.default_n);
    if (limit == 0) throw HttpError(400, "bad_request", "n must be positive");
    const auto ranked = rank(s, store_.snapshot(s.user));
    Json items = Json::array();
    for (std::size_t k = 0; k < std::min(limit, ranked.size()); ++k) {
      const auto& [r, i] = ranked[k];
      items.push_back({{"item", model_.catalog.items.name(i.index())},
                       {"rating", r},
                       {"predicted_value", inverse_scale(std::clamp(r, -1.0, 1.0), scale_)},
                       {"scenario", to_string(classify_scenario(r, opts_.thresholds))}});
    }
    return {{"session_id", s.id}, {"user", model_.catalog.users.name(s.user.index())}, {"items", std::move(items)}};
  }

  Json explanation(const std::string& id, const std::string& item_name, const std::string& mode) const {
    const Session s = session(id);
    const Catalog& cat = model_.catalog;
    const auto iid = cat.items.find(item_name);
    if (!iid) throw HttpError(404, "unknown_item", "unknown item '" + item_name + "'");
    const ItemId item{*iid};
    const Overrides o = store_.snapshot(s.user);
    if (mode == "template" || mode == "taf") {
      const auto b = model_.predict(s.user, item, s.context, o);
      const Taf taf = build_taf(b, opts_.neutral_eps);
      if (mode == "taf") return taf_to_json(taf, cat);
      return explanation_to_json(
          template_explanation(b, taf, classify_scenario(b.rating, opts_.thresholds), cat), cat);
    }
    if (mode == "contrastive") {
      std::vector<ItemId> candidates{item};
      for (const auto& [r, i] : rank(s, o)) candidates.push_back(i);
      std::sort(candidates.begin(), candidates.end());
      candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
      if (candidates.size() < 2)
        throw HttpError(409, "too_few_candidates", "contrastive explanation needs at least two candidate items");
      return explanation_to_json(contrastive_explanation(model_, s.user, s.context, candidates, o, opts_.thresholds),
                                 cat);
    }
    throw HttpError(400, "bad_request", "mode must be one of template, taf, contrastive");
  }

  Json feedback(const std::string& id, const Json& body) {
    const Session s = session(id);
    if (!body.is_object() || !body.contains("feature") || !body["feature"].is_string() ||
        !body.contains("direction") || !body["direction"].is_string())
      throw HttpError(400, "bad_request", "fields 'feature' and 'direction' (strings) are required");
    const Catalog& cat = model_.catalog;
    const std::string fname = body["feature"].get<std::string>();
    const auto fid = cat.features.find(fname);
    if (!fid) throw HttpError(404, "unknown_feature", "unknown feature '" + fname + "'");
    const FeatureId a{*fid};
    Direction dir;
    try {
      dir = parse_direction(body["direction"].get<std::string>());
    } catch (const InvalidArgument& e) {
      throw HttpError(400, "bad_request", e.what());
    }

    const auto affected = cat.items_with(a);
    const Overrides before = store_.snapshot(s.user);
    std::vector<double> old_r;
    for (ItemId i : affected) old_r.push_back(model_.predict(s.user, i, s.context, before).rating);
    const double model_p = model_feature_rating(model_, s.user, s.context, a);
    const JournalEntry e = apply_feedback(store_, cat, s.user, a, dir, opts_.feedback_step, model_p);

    const Overrides after = store_.snapshot(s.user);
    Json updated = Json::array();
    for (std::size_t k = 0; k < affected.size(); ++k)
      updated.push_back({{"item", cat.items.name(affected[k].index())},
                         {"old_rating", old_r[k]},
                         {"new_rating", model_.predict(s.user, affected[k], s.context, after).rating}});
    return {{"feature", fname},
            {"direction", dir == Direction::kLike ? "like" : "dislike"},
            {"old_strength", e.old_rating},
            {"new_strength", e.new_rating},
            {"updated", std::move(updated)}};
  }

  /// Users, factors and conditions, for clients building context pickers.
  Json schema() const {
    const Catalog& cat = model_.catalog;
    Json factors = Json::array();
    for (std::size_t f = 0; f < cat.factors.size(); ++f) {
      Json conds = Json::array();
      for (ConditionId c : cat.conditions_of(FactorId{f})) conds.push_back(cat.condition_name(c));
      factors.push_back({{"name", cat.factors.name(f)}, {"conditions", std::move(conds)}});
    }
    return {{"variant", to_string(model_.config.variant)},
            {"users", cat.users.names()},
            {"factors", std::move(factors)},
            {"items", cat.items.size()}};
  }

  /// Registers every route on `srv`.
  void mount(httplib::Server& srv) {
    srv.set_default_headers({{"Access-Control-Allow-Origin", opts_.cors_origin},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                             {"Access-Control-Allow-Headers", "Content-Type"}});
    srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    srv.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      guard(res, [&] { reply(res, 200, {{"status", "ok"}}); });
    });
    srv.Get("/schema", [this](const httplib::Request&, httplib::Response& res) {
      guard(res, [&] { reply(res, 200, schema()); });
    });
    srv.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guard(res, [&] {
        auto [body, created] = create_session(parse_body(req));
        reply(res, created ? 201 : 200, body);
      });
    });
    srv.Get(R"(/sessions/([^/]+)/recommendations)", [this](const httplib::Request& req, httplib::Response& res) {
      guard(res, [&] {
        std::optional<std::size_t> n;
        if (req.has_param("n")) n = parse_count(req.get_param_value("n"));
        reply(res, 200, recommendations(req.matches[1], n));
      });
    });
    srv.Get(R"(/sessions/([^/]+)/explanations/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guard(res, [&] {
        const std::string mode = req.has_param("mode") ? req.get_param_value("mode") : "template";
        reply(res, 200, explanation(req.matches[1], req.matches[2], mode));
      });
    });
    srv.Post(R"(/sessions/([^/]+)/feedback)", [this](const httplib::Request& req, httplib::Response& res) {
      guard(res, [&] { reply(res, 200, feedback(req.matches[1], parse_body(req))); });
    });
  }

 private:
  struct Session {
    std::string id;
    UserId user;
    ContextualSituation context;
    std::chrono::steady_clock::time_point created;
  };
  using Key = std::pair<std::uint32_t, ContextualSituation>;
  struct KeyLess {
    bool operator()(const Key& a, const Key& b) const {
      if (a.first != b.first) return a.first < b.first;
      return std::lexicographical_compare(a.second.begin(), a.second.end(), b.second.begin(), b.second.end());
    }
  };

  static Json session_json(const Session& s) { return {{"session_id", s.id}}; }

  static Json parse_body(const httplib::Request& req) {
    try {
      return Json::parse(req.body);
    } catch (const Json::parse_error& e) {
      throw HttpError(400, "bad_request", std::string("malformed JSON body: ") + e.what());
    }
  }

  static std::size_t parse_count(const std::string& s) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || s.empty() || s[0] == '-') throw HttpError(400, "bad_request", "n must be a positive integer");
    return static_cast<std::size_t>(v);
  }

  static void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <class F>
  static void guard(httplib::Response& res, F&& f) {
    auto fail = [&](int status, const char* code, const std::string& msg) {
      reply(res, status, {{"code", code}, {"message", msg}});
    };
    try {
      f();
    } catch (const HttpError& e) {
      reply(res, e.status(), {{"code", e.code()}, {"message", e.what()}});
    } catch (const LookupError& e) {
      fail(404, "not_found", e.what());
    } catch (const InvalidArgument& e) {
      fail(400, "bad_request", e.what());
    } catch (const std::exception& e) {
      fail(500, "internal", e.what());
    }
  }

  Session session(const std::string& id) const {
    std::lock_guard lk(sessions_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end() || clock_() - it->second.created >= opts_.session_ttl)
      throw HttpError(404, "unknown_session", "unknown or expired session '" + id + "'");
    return it->second;
  }

  void expire_locked() {
    const auto now = clock_();
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      if (now - it->second.created >= opts_.session_ttl) {
        by_key_.erase(Key{it->second.user.value, it->second.context});
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }

  std::string new_id_locked() {
    for (;;) {
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id_rng_()));
      if (!sessions_.count(buf)) return buf;
    }
  }

  /// Unconsumed items by descending r-hat, ties by ascending item id.
  std::vector<std::pair<double, ItemId>> rank(const Session& s, const Overrides& o) const {
    std::vector<std::pair<double, ItemId>> out;
    const auto hist = history_.find(s.user.value);
    for (std::size_t i = 0; i < model_.catalog.items.size(); ++i) {
      if (hist != history_.end() && hist->second.count(static_cast<std::uint32_t>(i))) continue;
      out.emplace_back(model_.predict(s.user, ItemId{i}, s.context, o).rating, ItemId{i});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    return out;
  }

  const Model model_;
  const RatingScale scale_;
  const std::map<std::uint32_t, std::set<std::uint32_t>> history_;
  const ServiceOptions opts_;
  Clock clock_;
  FeedbackStore store_;

  mutable std::mutex sessions_mu_;
  std::map<std::string, Session> sessions_;
  std::map<Key, std::string, KeyLess> by_key_;
  Rng id_rng_;
};

}  // namespace cafata

#endif  // CAFATA_SERVICE_HPP
