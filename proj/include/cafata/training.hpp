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

#ifndef CAFATA_TRAINING_HPP
#define CAFATA_TRAINING_HPP

#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cafata/catalog.hpp"
#include "cafata/core.hpp"
#include "cafata/data_ingest.hpp"
#include "cafata/model.hpp"

namespace cafata {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 256;
  double learning_rate = 12.8;  // 0.05 per example at the default batch size
  double l2_reg = 1e-5;
  std::uint64_t seed = 0;
  std::size_t early_stop_patience = 10;  // 0 disables early stopping
  std::size_t threads = 1;               // >1 enables the data-parallel mode

  void validate() const {
    if (epochs == 0) throw InvalidArgument("epochs must be positive");
    if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw InvalidArgument("learning_rate must be non-negative");
    if (!(l2_reg >= 0.0)) throw InvalidArgument("l2_reg must be non-negative");
    if (threads == 0) throw InvalidArgument("threads must be positive");
  }
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t epoch, const std::string& what)
      : Error("training diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

struct RowKey {
  Table table;
  std::uint32_t row;
  friend auto operator<=>(const RowKey&, const RowKey&) = default;
};

/// Gradient restricted to the embedding rows a batch touched.
class SparseGradient {
 public:
  explicit SparseGradient(std::size_t dim = 0) : dim_(dim) {}

  std::span<double> row(Table t, std::size_t r) {
    auto [it, inserted] = rows_.try_emplace(RowKey{t, static_cast<std::uint32_t>(r)});
    if (inserted) it->second.assign(dim_, 0.0);
    return it->second;
  }

  const std::vector<double>* find(Table t, std::size_t r) const {
    auto it = rows_.find(RowKey{t, static_cast<std::uint32_t>(r)});
    return it == rows_.end() ? nullptr : &it->second;
  }

  void add(const SparseGradient& other) {
    for (const auto& [key, g] : other.rows_) axpy(1.0, g, row(key.table, key.row));
  }

  const std::map<RowKey, std::vector<double>>& rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }

 private:
  std::size_t dim_;
  std::map<RowKey, std::vector<double>> rows_;
};

namespace detail {

/// Rows whose value influences the prediction of `x` (and therefore carry an L2 penalty).
inline void touched_rows(const Interaction& x, const Catalog& catalog, const ModelConfig& config,
                         std::set<RowKey>& out) {
  out.insert({Table::kUser, x.user.value});
  if (uses_context(config.variant) && !x.context.empty()) {
    for (std::size_t f = 0; f < catalog.factors.size(); ++f) out.insert({Table::kFactor, static_cast<std::uint32_t>(f)});
    for (const auto& [f, c] : x.context) out.insert({Table::kCondition, c.value});
  }
  for (const auto& g : catalog.groups(x.item)) {
    if (learns_type_importance(config.variant)) out.insert({Table::kType, g.type.value});
    for (FeatureId a : g.features) out.insert({Table::kFeature, a.value});
  }
}

/// Accumulates `upstream * d r-hat / d params` for one forward pass into `grad`.
inline void backprop_prediction(const PredictionBreakdown& b, double upstream, const EmbeddingSpace& space,
                                const Catalog& /*catalog*/, const ModelConfig& config, SparseGradient& grad) {
  const std::size_t d = space.dim;
  const double slope = config.leaky_relu_slope;
  std::span<const double> ucs = b.contextual_user;
  std::vector<double> g_ucs(d, 0.0);

  // Steps 2-4: r = sum_t pi_t * contr_t, contr_t = mean P_a, P_a = ucs . at_a
  for (const auto& tt : b.types) {
    if (tt.score) {
      // d r / d activated_t = pi_t * (contr_t - r)  (softmax Jacobian contracted with contr)
      const double d_beta = tt.importance * (tt.contribution - b.rating) * leaky_relu_grad(*tt.score, slope);
      const double c = upstream * d_beta;
      axpy(c, ucs, grad.row(Table::kType, tt.type.index()));
      axpy(c, space.types.row(tt.type.index()), g_ucs);
    }
    const double w = upstream * tt.feature_weight();
    for (const auto& ft : tt.features) {
      if (ft.overridden) continue;
      axpy(w, ucs, grad.row(Table::kFeature, ft.feature.index()));
      axpy(w, space.features.row(ft.feature.index()), g_ucs);
    }
  }

  // Step 1: ucs = u + sum_f pi_f * cd_f, pi = softmax(LeakyReLU(u . cf))
  const auto u = space.users.row(b.user.index());
  auto g_u = grad.row(Table::kUser, b.user.index());
  axpy(1.0, g_ucs, g_u);
  if (b.factors.empty()) return;

  std::vector<double> h(b.factors.size(), 0.0);  // d L / d pi_f
  double mean_h = 0.0;
  for (const auto& [f, cd] : b.context) {
    const double pi = b.factors[f.index()].importance;
    axpy(pi, g_ucs, grad.row(Table::kCondition, cd.index()));
    h[f.index()] = dot(g_ucs, space.conditions.row(cd.index()));
    mean_h += pi * h[f.index()];
  }
  for (const auto& ft : b.factors) {
    const double d_beta = ft.importance * (h[ft.factor.index()] - mean_h) * leaky_relu_grad(ft.score, slope);
    axpy(d_beta, u, grad.row(Table::kFactor, ft.factor.index()));
    axpy(d_beta, space.factors.row(ft.factor.index()), g_u);
  }
}

}  // namespace detail

/// Mean squared error of r-hat against scaled ratings, plus l2 * squared norm of every
/// embedding row the batch touches (each row counted once).
inline double loss(std::span<const Interaction> batch, const EmbeddingSpace& space, const Catalog& catalog,
                   const ModelConfig& config, double l2_reg, double mse_weight = 1.0) {
  if (batch.empty()) throw InvalidArgument("loss of an empty batch");
  double sse = 0.0;
  std::set<RowKey> touched;
  for (const auto& x : batch) {
    const double r = predict(x.user, x.item, x.context, space, catalog, config).rating;
    sse += (r - x.rating) * (r - x.rating);
    if (l2_reg > 0.0) detail::touched_rows(x, catalog, config, touched);
  }
  double penalty = 0.0;
  for (const auto& key : touched) {
    const auto row = space.table(key.table).row(key.row);
    penalty += dot(row, row);
  }
  return mse_weight * sse / static_cast<double>(batch.size()) + l2_reg * penalty;
}

/// Exact gradient of `loss` with respect to every embedding row the batch touches.
inline SparseGradient gradients(std::span<const Interaction> batch, const EmbeddingSpace& space,
                                const Catalog& catalog, const ModelConfig& config, double l2_reg,
                                double mse_weight = 1.0, double* loss_out = nullptr) {
  if (batch.empty()) throw InvalidArgument("gradients of an empty batch");
  SparseGradient grad(space.dim);
  std::set<RowKey> touched;
  double sse = 0.0;
  const double n = static_cast<double>(batch.size());
  for (const auto& x : batch) {
    const auto b = predict(x.user, x.item, x.context, space, catalog, config);
    const double resid = b.rating - x.rating;
    sse += resid * resid;
    detail::backprop_prediction(b, mse_weight * 2.0 * resid / n, space, catalog, config, grad);
    if (l2_reg > 0.0) detail::touched_rows(x, catalog, config, touched);
  }
  double penalty = 0.0;
  for (const auto& key : touched) {
    const auto row = space.table(key.table).row(key.row);
    penalty += dot(row, row);
    axpy(2.0 * l2_reg, row, grad.row(key.table, key.row));
  }
  if (loss_out) *loss_out = mse_weight * sse / n + l2_reg * penalty;
  return grad;
}

inline void apply_gradient(EmbeddingSpace& space, const SparseGradient& grad, double learning_rate) {
  for (const auto& [key, g] : grad.rows()) axpy(-learning_rate, g, space.table(key.table).row(key.row));
}

struct EvalReport {
  double rmse_raw = 0.0;
  double mae_raw = 0.0;
  double rmse_scaled = 0.0;
  double mae_scaled = 0.0;
  std::size_t n_test = 0;
  std::string variant;
};

/// RMSE / MAE of `predict_scaled` over `rows`. Predictions are clamped to [-1, 1] before
/// mapping back to the raw scale.
template <class PredictScaled>
EvalReport evaluate_with(std::span<const Interaction> rows, const RatingScale& scale, PredictScaled predict_scaled,
                         std::string variant) {
  if (rows.empty()) throw InvalidArgument("evaluation set is empty");
  EvalReport rep;
  rep.variant = std::move(variant);
  rep.n_test = rows.size();
  double se_raw = 0.0, ae_raw = 0.0, se_s = 0.0, ae_s = 0.0;
  for (const auto& x : rows) {
    const double p = std::clamp(static_cast<double>(predict_scaled(x)), -1.0, 1.0);
    const double e_s = p - x.rating;
    const double e_raw = inverse_scale(p, scale) - inverse_scale(x.rating, scale);
    se_s += e_s * e_s;
    ae_s += std::abs(e_s);
    se_raw += e_raw * e_raw;
    ae_raw += std::abs(e_raw);
  }
  const double n = static_cast<double>(rows.size());
  rep.rmse_raw = std::sqrt(se_raw / n);
  rep.mae_raw = ae_raw / n;
  rep.rmse_scaled = std::sqrt(se_s / n);
  rep.mae_scaled = ae_s / n;
  return rep;
}

inline EvalReport evaluate(const EmbeddingSpace& space, std::span<const Interaction> test, const Catalog& catalog,
                           const ModelConfig& config, const RatingScale& scale) {
  return evaluate_with(
      test, scale,
      [&](const Interaction& x) { return predict(x.user, x.item, x.context, space, catalog, config).rating; },
      to_string(config.variant));
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_rmse_raw = std::numeric_limits<double>::quiet_NaN();  // NaN without a validation split
  double wall_ms = 0.0;
};

template <class Space>
struct TrainOutcome {
  Space space;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;  // epoch whose parameters were kept; 0 = initial parameters
  bool data_parallel = false;
};

using TrainResult = TrainOutcome<EmbeddingSpace>;
using MfTrainResult = TrainOutcome<MfSpace>;

namespace detail {

/// Shared SGD driver. `step(batch) -> loss` updates the parameters in place; `valid_rmse()`
/// scores the current parameters; `space()` exposes them for snapshotting.
template <class Space, class Step, class ValidRmse>
TrainOutcome<Space> run_sgd(Space& space, std::span<const Interaction> train_rows, const TrainConfig& tc,
                            bool has_valid, Step step, ValidRmse valid_rmse, bool data_parallel) {
  TrainOutcome<Space> out;
  out.data_parallel = data_parallel;
  std::vector<std::size_t> order(train_rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(tc.seed);
  double best = has_valid ? valid_rmse() : std::numeric_limits<double>::infinity();
  Space best_space = space;
  std::size_t since_best = 0;
  std::vector<Interaction> batch;
  batch.reserve(tc.batch_size);

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      batch.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + tc.batch_size); ++k)
        batch.push_back(train_rows[order[k]]);
      const double l = step(std::span<const Interaction>(batch));
      if (!std::isfinite(l)) throw TrainingDiverged(epoch, "non-finite training loss");
      total += l * static_cast<double>(batch.size());
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(order.size());
    if (has_valid) {
      rec.valid_rmse_raw = valid_rmse();
      if (!std::isfinite(rec.valid_rmse_raw)) throw TrainingDiverged(epoch, "non-finite validation RMSE");
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.log.push_back(rec);

    if (!has_valid) {
      out.best_epoch = epoch;
      continue;
    }
    if (rec.valid_rmse_raw < best) {
      best = rec.valid_rmse_raw;
      best_space = space;
      out.best_epoch = epoch;
      since_best = 0;
    } else if (tc.early_stop_patience > 0 && ++since_best >= tc.early_stop_patience) {
      break;
    }
  }
  out.space = has_valid ? std::move(best_space) : space;
  return out;
}

}  // namespace detail

/// Mini-batch SGD with L2 decay. With a validation split, the parameters of the best
/// validation epoch are returned and training stops after `early_stop_patience` epochs
/// without improvement.
inline TrainResult train(const Dataset& data, const Catalog& catalog, const ModelConfig& mc, const TrainConfig& tc,
                         const EmbeddingSpace* init = nullptr) {
  mc.validate();
  tc.validate();
  const auto train_rows = data.train();
  if (train_rows.empty()) throw InvalidArgument("training split is empty");
  const auto valid_rows = data.valid();
  EmbeddingSpace space = init ? *init : EmbeddingSpace::random(catalog, mc.dim, mc.seed);
  space.check_shape(catalog);

  auto step = [&](std::span<const Interaction> batch) {
    double l = 0.0;
    if (tc.threads <= 1 || batch.size() < 2 * tc.threads) {
      const auto g = gradients(batch, space, catalog, mc, tc.l2_reg, 1.0, &l);
      apply_gradient(space, g, tc.learning_rate);
      return l;
    }
    // Data-parallel: shard the batch, reduce shard gradients in shard order at a barrier.
    const std::size_t shards = tc.threads;
    const std::size_t per = (batch.size() + shards - 1) / shards;
    std::vector<std::future<SparseGradient>> parts;
    for (std::size_t s = 0; s < shards; ++s) {
      const std::size_t lo = s * per, hi = std::min(batch.size(), lo + per);
      if (lo >= hi) break;
      parts.push_back(std::async(std::launch::async, [&, lo, hi] {
        SparseGradient g(space.dim);
        const double scale = 2.0 / static_cast<double>(batch.size());
        for (std::size_t k = lo; k < hi; ++k) {
          const auto& x = batch[k];
          const auto b = predict(x.user, x.item, x.context, space, catalog, mc);
          detail::backprop_prediction(b, scale * (b.rating - x.rating), space, catalog, mc, g);
        }
        return g;
      }));
    }
    SparseGradient total(space.dim);
    for (auto& p : parts) total.add(p.get());
    std::set<RowKey> touched;
    for (const auto& x : batch) detail::touched_rows(x, catalog, mc, touched);
    for (const auto& key : touched) axpy(2.0 * tc.l2_reg, space.table(key.table).row(key.row), total.row(key.table, key.row));
    l = loss(batch, space, catalog, mc, tc.l2_reg);
    apply_gradient(space, total, tc.learning_rate);
    return l;
  };
  auto valid_rmse = [&] { return evaluate(space, valid_rows, catalog, mc, data.scale).rmse_raw; };
  auto out = detail::run_sgd(space, train_rows, tc, !valid_rows.empty(), step, valid_rmse, tc.threads > 1);
  if (!out.space.all_finite()) throw TrainingDiverged(out.best_epoch, "non-finite embeddings");
  return out;
}

/// Plain matrix factorisation trained with the same objective and optimiser.
inline MfTrainResult train_mf(const Dataset& data, std::size_t n_users, std::size_t n_items, std::size_t dim,
                              std::uint64_t model_seed, const TrainConfig& tc) {
  tc.validate();
  const auto train_rows = data.train();
  if (train_rows.empty()) throw InvalidArgument("training split is empty");
  const auto valid_rows = data.valid();
  MfSpace mf = MfSpace::random(n_users, n_items, dim, model_seed);

  auto step = [&](std::span<const Interaction> batch) {
    const double n = static_cast<double>(batch.size());
    std::map<std::pair<int, std::uint32_t>, std::vector<double>> g;
    auto row = [&](int t, std::uint32_t r) -> std::vector<double>& {
      auto [it, ins] = g.try_emplace({t, r});
      if (ins) it->second.assign(dim, 0.0);
      return it->second;
    };
    double sse = 0.0;
    for (const auto& x : batch) {
      const double resid = predict_mf_baseline(x.user, x.item, mf) - x.rating;
      sse += resid * resid;
      const double c = 2.0 * resid / n;
      axpy(c, mf.items.row(x.item.index()), row(0, x.user.value));
      axpy(c, mf.users.row(x.user.index()), row(1, x.item.value));
    }
    double penalty = 0.0;
    for (auto& [key, grad] : g) {
      auto r = key.first == 0 ? mf.users.row(key.second) : mf.items.row(key.second);
      penalty += dot(r, r);
      axpy(2.0 * tc.l2_reg, r, grad);
    }
    for (auto& [key, grad] : g) {
      auto r = key.first == 0 ? mf.users.row(key.second) : mf.items.row(key.second);
      axpy(-tc.learning_rate, grad, r);
    }
    return sse / n + tc.l2_reg * penalty;
  };
  auto valid_rmse = [&] {
    return evaluate_with(valid_rows, data.scale, [&](const Interaction& x) { return predict_mf_baseline(x.user, x.item, mf); },
                         "mf")
        .rmse_raw;
  };
  return detail::run_sgd(mf, train_rows, tc, !valid_rows.empty(), step, valid_rmse, false);
}

inline EvalReport evaluate_mf(const MfSpace& mf, std::span<const Interaction> test, const RatingScale& scale) {
  return evaluate_with(test, scale, [&](const Interaction& x) { return predict_mf_baseline(x.user, x.item, mf); }, "mf");
}

}  // namespace cafata

#endif  // CAFATA_TRAINING_HPP
