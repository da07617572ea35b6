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

// The `cafata` command line. Exit codes: 0 success, 1 failure, 2 usage error.

#ifndef CAFATA_TOOLS_CLI_HPP
#define CAFATA_TOOLS_CLI_HPP

#include <array>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cafata/cafata.hpp"
#include "cafata/service.hpp"

namespace cafata::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Bad flag values discovered after parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Reads `--config` files of the form {"<subcommand>": {"<flag>": value, ...}, "<global flag>": value}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (!opt->get_configurable() || opt->get_single_name().empty()) continue;
      const auto& res = opt->results();
      if (res.empty() && !default_also) continue;
      if (res.empty()) {
        if (!opt->get_default_str().empty()) j[opt->get_single_name()] = opt->get_default_str();
      } else if (res.size() == 1) {
        j[opt->get_single_name()] = res.front();
      } else {
        j[opt->get_single_name()] = res;
      }
    }
    return j.dump(2) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> out;
    collect(j, {}, out);
    return out;
  }

 private:
  static void collect(const nlohmann::json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        collect(value, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      auto scalar = [](const nlohmann::json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
        return v.dump();
      };
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else if (!value.is_null()) {
        item.inputs.push_back(scalar(value));
      }
      out.push_back(std::move(item));
    }
  }
};

struct PrepareFlags {
  std::string interactions, triples, schema, out_dir;
  bool log_transform = false;
  std::size_t k_core = 1;
  std::vector<double> scale;
  std::vector<double> split{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
};

struct TrainFlags {
  std::string data_dir, out, log;
  std::string variant = "ca-fata";
  ModelConfig model;
  TrainConfig train;
};

struct EvalFlags {
  std::string checkpoint, data_dir;
  std::string split = "test";
};

struct ExplainFlags {
  std::string checkpoint, user, item;
  std::vector<std::string> context;
  std::vector<std::string> candidates;
  bool contrastive = false;
  bool taf = false;
  bool text = false;
  double neutral_eps = 0.05;
  double low = 0.0, high = 0.5;
  std::string ranking = "weighted";
};

struct CheckFlags {
  std::string checkpoint;
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  std::size_t max_dim = 8;
  bool sign_flip = false;
};

struct ClusterFlags {
  std::string checkpoint, out, report;
  std::size_t k = 4;
  std::uint64_t seed = 0;
  std::size_t max_iter = 300;
  bool sweep = false;
  bool table = false;
};

struct ServeFlags {
  std::string checkpoint, journal;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
  long ttl_seconds = 3600;
};

namespace detail {

inline std::string path_in(const std::string& dir, const char* file) {
  return (std::filesystem::path(dir) / file).string();
}

inline void print_json(std::ostream& out, const nlohmann::ordered_json& j) { out << j.dump(2) << '\n'; }

inline nlohmann::ordered_json report_json(const EvalReport& r) {
  return {{"variant", r.variant}, {"n_test", r.n_test},   {"rmse_raw", r.rmse_raw},
          {"mae_raw", r.mae_raw}, {"rmse_scaled", r.rmse_scaled}, {"mae_scaled", r.mae_scaled}};
}

/// Parses repeated `factor=condition` flags.
inline std::map<std::string, std::string> parse_context(const std::vector<std::string>& pairs) {
  std::map<std::string, std::string> out;
  for (const auto& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == p.size())
      throw UsageError("context must be given as factor=condition, got '" + p + "'");
    if (!out.emplace(p.substr(0, eq), p.substr(eq + 1)).second)
      throw UsageError("factor '" + p.substr(0, eq) + "' given twice");
  }
  return out;
}

inline ContextualSituation situation_for(const Model& m, const std::vector<std::string>& pairs) {
  const auto named = parse_context(pairs);
  if (!uses_context(m.config.variant)) return {};
  const ContextualSituation cs = m.catalog.situation(named);
  if (!m.catalog.is_complete(cs)) {
    std::string missing;
    for (const auto& f : m.catalog.factors.names())
      if (!named.count(f)) missing += (missing.empty() ? "" : ", ") + f;
    throw UsageError("a full contextual situation is required for " + to_string(m.config.variant) +
                     " checkpoints; missing --context for: " + missing);
  }
  return cs;
}

}  // namespace detail

inline int cmd_prepare(const PrepareFlags& f, std::ostream& out, std::ostream& err) {
  if (f.k_core == 0) throw UsageError("--k-core must be >= 1");
  if (f.split.size() != 3) throw UsageError("--split takes three ratios");
  std::optional<RatingScale> scale;
  if (!f.scale.empty()) {
    if (f.scale.size() != 2 || !(f.scale[0] < f.scale[1])) throw UsageError("--scale takes MIN MAX with MIN < MAX");
    scale = RatingScale(f.scale[0], f.scale[1]);
  }

  Warnings warnings;
  Catalog catalog = load_catalog(f.triples, f.schema, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  std::vector<RawInteraction> raw = read_interactions(f.interactions, catalog);
  const std::size_t n_read = raw.size();
  if (f.log_transform) raw = log_transform_counts(std::move(raw));
  std::size_t unknown_items = 0;
  std::erase_if(raw, [&](const RawInteraction& r) {
    const bool unknown = !catalog.items.find(r.item);
    unknown_items += unknown;
    return unknown;
  });
  if (unknown_items > 0) err << "warning: dropped " << unknown_items << " interactions with items missing from the catalog\n";
  raw = k_core_filter(std::move(raw), f.k_core);

  Dataset data;
  data.interactions = resolve_interactions(raw, catalog);
  if (data.interactions.empty()) throw Error("no interactions left after preprocessing");
  data.scale = scale ? *scale : observed_scale(data.interactions);
  apply_scale(data.interactions, data.scale);
  data.split = split_dataset(data.interactions, {f.split[0], f.split[1], f.split[2]}, f.seed);

  std::filesystem::create_directories(f.out_dir);
  save_catalog(detail::path_in(f.out_dir, "catalog.json"), catalog);
  save_dataset(detail::path_in(f.out_dir, "dataset.json"), data);
  detail::print_json(out, {{"interactions_read", n_read},
                           {"dropped_unknown_items", unknown_items},
                           {"interactions", data.interactions.size()},
                           {"users", catalog.users.size()},
                           {"items", catalog.items.size()},
                           {"features", catalog.features.size()},
                           {"factors", catalog.factors.size()},
                           {"train", data.split.train.size()},
                           {"valid", data.split.valid.size()},
                           {"test", data.split.test.size()},
                           {"scale", {{"raw_min", data.scale.raw_min}, {"raw_max", data.scale.raw_max}}}});
  return kExitOk;
}

inline int cmd_train(TrainFlags f, std::ostream& out, std::ostream&) {
  const bool mf = f.variant == "mf";
  try {
    if (!mf) f.model.variant = parse_variant(f.variant);
    f.model.validate();
    f.train.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const Catalog catalog = load_catalog_json(detail::path_in(f.data_dir, "catalog.json"));
  const Dataset data = load_dataset(detail::path_in(f.data_dir, "dataset.json"), catalog);

  Checkpoint ck;
  ck.variant = f.variant;
  ck.config = f.model;
  ck.catalog = catalog;
  ck.scale = data.scale;
  ck.history = history_of(data.interactions);
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  bool parallel = false;
  std::optional<EvalReport> test_report;
  if (mf) {
    auto res = train_mf(data, catalog.users.size(), catalog.items.size(), f.model.dim, f.model.seed, f.train);
    ck.mf = std::move(res.space);
    log = std::move(res.log);
    best_epoch = res.best_epoch;
    if (!data.test().empty()) test_report = evaluate_mf(*ck.mf, data.test(), data.scale);
  } else {
    auto res = train(data, catalog, f.model, f.train);
    ck.space = std::move(res.space);
    log = std::move(res.log);
    best_epoch = res.best_epoch;
    parallel = res.data_parallel;
    if (!data.test().empty()) test_report = evaluate(ck.space, data.test(), catalog, f.model, data.scale);
  }
  save_checkpoint(f.out, ck);

  const std::string log_path = f.log.empty() ? f.out + ".log.jsonl" : f.log;
  std::ofstream lf(log_path);
  if (!lf) throw Error("cannot write training log '" + log_path + "'");
  for (const auto& r : log) {
    nlohmann::ordered_json j{{"epoch", r.epoch},
                             {"train_loss", r.train_loss},
                             {"valid_rmse_raw", std::isfinite(r.valid_rmse_raw) ? nlohmann::ordered_json(r.valid_rmse_raw)
                                                                                : nlohmann::ordered_json(nullptr)},
                             {"wall_ms", r.wall_ms}};
    if (parallel) j["mode"] = "data_parallel";
    lf << j.dump() << '\n';
  }

  nlohmann::ordered_json summary{{"variant", f.variant},
                                 {"checkpoint", f.out},
                                 {"log", log_path},
                                 {"epochs_run", log.size()},
                                 {"best_epoch", best_epoch},
                                 {"mode", parallel ? "data_parallel" : "sequential"}};
  if (best_epoch > 0 && std::isfinite(log[best_epoch - 1].valid_rmse_raw))
    summary["best_valid_rmse_raw"] = log[best_epoch - 1].valid_rmse_raw;
  if (test_report) summary["test"] = detail::report_json(*test_report);
  detail::print_json(out, summary);
  return kExitOk;
}

inline int cmd_eval(const EvalFlags& f, std::ostream& out, std::ostream&) {
  if (f.split != "test" && f.split != "valid" && f.split != "train")
    throw UsageError("--split must be one of train, valid, test");
  const Checkpoint ck = load_checkpoint(f.checkpoint);
  const Dataset data = load_dataset(detail::path_in(f.data_dir, "dataset.json"), ck.catalog);
  const auto rows = f.split == "test" ? data.test() : f.split == "valid" ? data.valid() : data.train();
  const EvalReport r =
      ck.is_mf() ? evaluate_mf(*ck.mf, rows, ck.scale) : evaluate(ck.space, rows, ck.catalog, ck.config, ck.scale);
  auto j = detail::report_json(r);
  j["split"] = f.split;
  detail::print_json(out, j);
  return kExitOk;
}

inline int cmd_explain(const ExplainFlags& f, std::ostream& out, std::ostream&) {
  if (f.contrastive == !f.item.empty() && !f.taf)
    throw UsageError(f.contrastive ? "--item cannot be combined with --contrastive" : "either --item or --contrastive is required");
  if (f.taf && (f.contrastive || f.item.empty())) throw UsageError("--taf needs --item and excludes --contrastive");
  if (!(f.low < f.high)) throw UsageError("--low must be below --high");
  if (f.ranking != "weighted" && f.ranking != "raw") throw UsageError("--ranking must be weighted or raw");
  if (!(f.neutral_eps >= 0.0)) throw UsageError("--neutral-eps must be non-negative");

  const Checkpoint ck = load_checkpoint(f.checkpoint);
  const Model model = ck.model();
  const UserId u = model.catalog.user(f.user);
  const ContextualSituation cs = detail::situation_for(model, f.context);
  const Thresholds th{f.low, f.high};

  nlohmann::ordered_json j;
  if (f.contrastive) {
    std::vector<ItemId> candidates;
    if (!f.candidates.empty()) {
      for (const auto& name : f.candidates) candidates.push_back(model.catalog.item(name));
    } else {
      const auto hist = ck.history.find(u.value);
      for (std::size_t i = 0; i < model.catalog.items.size(); ++i)
        if (hist == ck.history.end() || !hist->second.count(static_cast<std::uint32_t>(i))) candidates.push_back(ItemId{i});
    }
    j = explanation_to_json(contrastive_explanation(model, u, cs, candidates, {}, th), model.catalog);
  } else {
    const ItemId i = model.catalog.item(f.item);
    const auto b = model.predict(u, i, cs);
    const Taf taf = build_taf(b, f.neutral_eps);
    if (f.taf) {
      j = taf_to_json(taf, model.catalog);
    } else {
      const auto ranking = f.ranking == "raw" ? ArgumentRanking::kRaw : ArgumentRanking::kWeighted;
      j = explanation_to_json(template_explanation(b, taf, classify_scenario(b.rating, th), model.catalog, ranking),
                              model.catalog);
    }
  }
  if (f.text && j.contains("text"))
    out << j["text"].get<std::string>() << '\n';
  else
    detail::print_json(out, j);
  return kExitOk;
}

/// A deliberately wrong forward pass (rec strength negated), used to show the checkers bite.
inline PredictionBreakdown sign_flipped_predictor(const Model& m, UserId u, ItemId i, const ContextualSituation& cs,
                                                  const Overrides& o) {
  auto b = m.predict(u, i, cs, o);
  b.rating = -b.rating;
  return b;
}

inline int cmd_check_axioms(const CheckFlags& f, std::ostream& out, std::ostream& err) {
  if (f.trials == 0) throw UsageError("--trials must be >= 1");
  if (f.max_dim == 0) throw UsageError("--max-dim must be >= 1");
  ModelSource source;
  std::string mode;
  if (f.checkpoint.empty()) {
    ModelSampler sampler;
    sampler.max_dim = f.max_dim;
    source = sampler;
    mode = "random-models";
  } else {
    source = fixed_model(load_checkpoint(f.checkpoint).model());
    mode = "checkpoint";
  }
  const Predictor predictor = f.sign_flip ? Predictor(sign_flipped_predictor) : Predictor(default_predictor);
  const std::vector<CheckReport> reports{check_weak_balance(source, f.trials, f.seed, predictor),
                                         check_weak_monotonicity(source, f.trials, f.seed + 1, predictor),
                                         check_feedback_monotonicity(source, f.trials, f.seed + 2, predictor)};
  bool passed = true;
  nlohmann::ordered_json rs = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    passed = passed && r.passed();
    rs.push_back(report_to_json(r));
  }
  detail::print_json(out, {{"mode", mode},
                           {"trials", f.trials},
                           {"seed", f.seed},
                           {"mutation", f.sign_flip ? "sign-flip" : "none"},
                           {"passed", passed},
                           {"reports", std::move(rs)}});
  if (!passed) {
    for (const auto& r : reports)
      if (!r.passed())
        err << r.property << ": " << r.counterexamples.size() << " counterexample(s); first: "
            << r.counterexamples.front().detail << '\n';
  }
  return passed ? kExitOk : kExitFailure;
}

inline int cmd_cluster(const ClusterFlags& f, std::ostream& out, std::ostream&) {
  if (f.k == 0) throw UsageError("--k must be >= 1");
  const Checkpoint ck = load_checkpoint(f.checkpoint);
  if (ck.is_mf()) throw UsageError("clustering needs a context-aware checkpoint, got 'mf'");
  const ImportanceTable t = export_importance(ck.space, ck.catalog, ck.config);
  const KMeansResult km = kmeans(t.values, f.k, f.seed, f.max_iter);
  const ClusterReport rep = cluster_report(km.assignment, t);

  if (!f.out.empty()) {
    std::ofstream o(f.out);
    if (!o) throw Error("cannot write '" + f.out + "'");
    o << cluster_csv(t, km);
  }
  if (!f.report.empty()) {
    std::ofstream o(f.report);
    if (!o) throw Error("cannot write '" + f.report + "'");
    o << report_csv(rep);
  }
  if (f.table) {
    out << report_table(rep);
    return kExitOk;
  }
  nlohmann::ordered_json clusters = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < rep.sizes.size(); ++c) {
    nlohmann::ordered_json mean = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < rep.factors.size(); ++k) mean[rep.factors[k]] = rep.means(c, k);
    clusters.push_back({{"cluster", c}, {"size", rep.sizes[c]}, {"mean_importance", std::move(mean)}});
  }
  nlohmann::ordered_json j{{"k", f.k},
                           {"seed", f.seed},
                           {"inertia", km.inertia},
                           {"iterations", km.iterations},
                           {"converged", km.converged},
                           {"inertia_history", km.inertia_history},
                           {"clusters", std::move(clusters)}};
  if (f.sweep) {
    nlohmann::ordered_json sw = nlohmann::ordered_json::array();
    for (const auto& p : inertia_sweep(t.values, 2, 10, f.seed)) sw.push_back({{"k", p.k}, {"inertia", p.inertia}});
    j["sweep"] = std::move(sw);
  }
  detail::print_json(out, j);
  return kExitOk;
}

inline int cmd_serve(const ServeFlags& f, std::ostream& out, std::ostream&) {
  if (f.port <= 0 || f.port > 65535) throw UsageError("--port must be in 1..65535");
  if (f.ttl_seconds <= 0) throw UsageError("--ttl must be positive");
  const Checkpoint ck = load_checkpoint(f.checkpoint);
  if (ck.is_mf()) throw UsageError("the service needs an argumentation checkpoint, got 'mf'");
  ServiceOptions opts;
  opts.journal_path = f.journal;
  opts.cors_origin = f.cors_origin;
  opts.session_ttl = std::chrono::seconds(f.ttl_seconds);
  RecommenderService service(ck, opts);
  httplib::Server srv;
  service.mount(srv);
  if (!srv.bind_to_port(f.host, f.port)) throw Error("cannot listen on " + f.host + ":" + std::to_string(f.port));
  out << "listening on http://" << f.host << ':' << f.port << std::endl;
  if (!srv.listen_after_bind()) throw Error("server stopped unexpectedly");
  return kExitOk;
}

/// Parses `argv` and runs one subcommand, writing results to `out` and diagnostics to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Context-aware argumentation recommender: prepare data, train, evaluate, explain, check, cluster, serve"};
  app.name("cafata");
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file supplying flags, keyed by subcommand; command-line flags win");

  PrepareFlags pf;
  auto* prep = app.add_subcommand("prepare", "Turn raw logs into a catalog and a split dataset");
  prep->add_option("--interactions", pf.interactions, "Interactions CSV (user,item,value,<factors>...)")->required();
  prep->add_option("--triples", pf.triples, "Item features TSV (item, type, feature)")->required();
  prep->add_option("--schema", pf.schema, "Context schema JSON")->required();
  prep->add_option("--out", pf.out_dir, "Output directory")->required();
  prep->add_flag("--log-transform", pf.log_transform, "Replace counts with ln(1 + count)");
  prep->add_option("--k-core", pf.k_core, "Keep the k-core of the user-item graph")->capture_default_str();
  prep->add_option("--scale", pf.scale, "Raw rating range MIN MAX (default: observed)")->expected(2);
  prep->add_option("--split", pf.split, "Train, valid, test ratios")->expected(3)->capture_default_str();
  prep->add_option("--seed", pf.seed, "Split seed")->capture_default_str();

  TrainFlags tf;
  auto* trn = app.add_subcommand("train", "Fit a model and write a checkpoint");
  trn->add_option("--data", tf.data_dir, "Directory written by prepare")->required();
  trn->add_option("--out", tf.out, "Checkpoint path")->required();
  trn->add_option("--log", tf.log, "Training log (JSON lines); default <out>.log.jsonl");
  trn->add_option("--variant", tf.variant, "ca-fata, fata, avg-ca-fata, avg-fata or mf")
      ->check(CLI::IsMember({"ca-fata", "fata", "avg-ca-fata", "avg-fata", "mf"}))
      ->capture_default_str();
  trn->add_option("--dim", tf.model.dim, "Embedding dimension")->capture_default_str();
  trn->add_option("--slope", tf.model.leaky_relu_slope, "LeakyReLU negative slope")->capture_default_str();
  trn->add_option("--epochs", tf.train.epochs, "Maximum epochs")->capture_default_str();
  trn->add_option("--batch-size", tf.train.batch_size, "Mini-batch size")->capture_default_str();
  trn->add_option("--lr", tf.train.learning_rate, "Learning rate")->capture_default_str();
  trn->add_option("--l2", tf.train.l2_reg, "L2 penalty on touched rows")->capture_default_str();
  trn->add_option("--patience", tf.train.early_stop_patience, "Early-stopping patience (0 disables)")
      ->capture_default_str();
  trn->add_option("--threads", tf.train.threads, "Worker threads (>1: data-parallel; reproducible per thread count)")
      ->capture_default_str();
  std::uint64_t train_seed = 0;
  trn->add_option("--seed", train_seed, "Seed for initialisation and shuffling")->capture_default_str();

  EvalFlags ef;
  auto* evl = app.add_subcommand("eval", "Report RMSE and MAE of a checkpoint");
  evl->add_option("--checkpoint", ef.checkpoint, "Checkpoint path")->required();
  evl->add_option("--data", ef.data_dir, "Directory written by prepare")->required();
  evl->add_option("--split", ef.split, "train, valid or test")->capture_default_str();

  ExplainFlags xf;
  auto* exp = app.add_subcommand("explain", "Explain one recommendation or contrast two");
  exp->add_option("--checkpoint", xf.checkpoint, "Checkpoint path")->required();
  exp->add_option("--user", xf.user, "User id")->required();
  exp->add_option("--item", xf.item, "Item id");
  exp->add_flag("--contrastive", xf.contrastive, "Explain the best candidate against the worst");
  exp->add_option("--candidates", xf.candidates, "Candidate items (default: items the user has not consumed)");
  exp->add_option("--context", xf.context, "factor=condition (repeat for every factor)");
  exp->add_flag("--taf", xf.taf, "Print the argumentation framework instead");
  exp->add_flag("--text", xf.text, "Print only the rendered sentence");
  exp->add_option("--neutral-eps", xf.neutral_eps, "Ratings within this band count as neutral")->capture_default_str();
  exp->add_option("--low", xf.low, "Weak recommendation threshold")->capture_default_str();
  exp->add_option("--high", xf.high, "Strong recommendation threshold")->capture_default_str();
  exp->add_option("--ranking", xf.ranking, "Argument ranking: weighted or raw")->capture_default_str();

  CheckFlags cf;
  auto* chk = app.add_subcommand("check-axioms", "Search for violations of the argumentation properties");
  chk->add_option("--checkpoint", cf.checkpoint, "Check this model (default: random models)");
  chk->add_option("--trials", cf.trials, "Trials per property")->capture_default_str();
  chk->add_option("--seed", cf.seed, "Seed")->capture_default_str();
  chk->add_option("--max-dim", cf.max_dim, "Largest dimension of random models")->capture_default_str();
  chk->add_flag("--mutate-sign-flip", cf.sign_flip, "Check a deliberately broken forward pass");

  ClusterFlags kf;
  auto* clu = app.add_subcommand("cluster", "Cluster users by contextual factor importance");
  clu->add_option("--checkpoint", kf.checkpoint, "Checkpoint path")->required();
  clu->add_option("--k", kf.k, "Number of clusters")->capture_default_str();
  clu->add_option("--seed", kf.seed, "Seed")->capture_default_str();
  clu->add_option("--max-iter", kf.max_iter, "Lloyd iteration cap")->capture_default_str();
  clu->add_option("--out", kf.out, "Per-user CSV (user,<factor>_pi...,cluster)");
  clu->add_option("--report", kf.report, "Per-cluster mean importance CSV");
  clu->add_flag("--sweep", kf.sweep, "Also report inertia for k = 2..10");
  clu->add_flag("--table", kf.table, "Print a text table instead of JSON");

  ServeFlags sf;
  auto* srv = app.add_subcommand("serve", "Serve recommendations and explanations over HTTP");
  srv->add_option("--checkpoint", sf.checkpoint, "Checkpoint path")->required()->envname("CAFATA_CHECKPOINT");
  srv->add_option("--host", sf.host, "Listen address")->envname("CAFATA_HOST")->capture_default_str();
  srv->add_option("--port", sf.port, "Listen port")->envname("CAFATA_PORT")->capture_default_str();
  srv->add_option("--journal", sf.journal, "Feedback journal (JSON lines)")->envname("CAFATA_JOURNAL");
  srv->add_option("--cors-origin", sf.cors_origin, "Allowed CORS origin")->capture_default_str();
  srv->add_option("--ttl", sf.ttl_seconds, "Session lifetime in seconds")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*prep) return cmd_prepare(pf, out, err);
    if (*trn) {
      tf.model.seed = train_seed;
      tf.train.seed = train_seed;
      return cmd_train(tf, out, err);
    }
    if (*evl) return cmd_eval(ef, out, err);
    if (*exp) return cmd_explain(xf, out, err);
    if (*chk) return cmd_check_axioms(cf, out, err);
    if (*clu) return cmd_cluster(kf, out, err);
    if (*srv) return cmd_serve(sf, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace cafata::cli

#endif  // CAFATA_TOOLS_CLI_HPP
