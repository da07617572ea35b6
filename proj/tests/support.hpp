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

// Fixtures shared by the unit and acceptance tests.

#ifndef CAFATA_TESTS_SUPPORT_HPP
#define CAFATA_TESTS_SUPPORT_HPP

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cafata/cafata.hpp"

namespace cafata::testing {

/// A scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cafata-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string write_file(const std::string& path, const std::string& content) {
  std::ofstream(path) << content;
  return path;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// d=2, u_cs=(1,0); item "movie" has type A with feature a=(0.5,0) and type B with
/// feature b=(-0.25,0); both type vectors are equal so pi=(0.5,0.5). r-hat = 0.125.
inline Model worked_example() {
  Model m;
  m.catalog.users.intern("u");
  m.catalog.add_triple("movie", "A", "a");
  m.catalog.add_triple("movie", "B", "b");
  m.config.dim = 2;
  m.config.variant = Variant::kFata;
  m.space = EmbeddingSpace::zeros(m.catalog, 2);
  m.space.users(0, 0) = 1.0;
  m.space.features(0, 0) = 0.5;
  m.space.features(1, 0) = -0.25;
  for (std::size_t t = 0; t < 2; ++t) {
    m.space.types(t, 0) = 0.3;
    m.space.types(t, 1) = 0.7;
  }
  return m;
}

/// Straight-line evaluation of the four model steps, written independently of model.hpp:
/// explicit loops, no shared helpers, no max-subtraction in the softmax.
inline double oracle_rating(const Model& m, std::size_t user, std::size_t item,
                            const std::vector<std::pair<std::size_t, std::size_t>>& cs,
                            const std::vector<std::pair<std::size_t, double>>& overrides = {}) {
  const std::size_t d = m.config.dim;
  const double slope = m.config.leaky_relu_slope;
  const Variant v = m.config.variant;
  const bool ctx = v == Variant::kCaFata || v == Variant::kAvgCaFata;
  const bool learned = v == Variant::kCaFata || v == Variant::kFata;
  auto act = [slope](double x) { return x > 0 ? x : slope * x; };

  std::vector<double> ucs(d);
  for (std::size_t k = 0; k < d; ++k) ucs[k] = m.space.users(user, k);
  if (ctx && !cs.empty()) {
    const std::size_t nf = m.catalog.factors.size();
    std::vector<double> e(nf);
    double z = 0;
    for (std::size_t f = 0; f < nf; ++f) {
      double beta = 0;
      for (std::size_t k = 0; k < d; ++k) beta += m.space.users(user, k) * m.space.factors(f, k);
      e[f] = std::exp(act(beta));
      z += e[f];
    }
    for (const auto& [f, c] : cs)
      for (std::size_t k = 0; k < d; ++k) ucs[k] += e[f] / z * m.space.conditions(c, k);
  }

  const auto& groups = m.catalog.groups(ItemId{item});
  std::vector<double> w(groups.size());
  double z = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double beta = 0;
    for (std::size_t k = 0; k < d; ++k) beta += ucs[k] * m.space.types(groups[g].type.index(), k);
    w[g] = learned ? std::exp(act(beta)) : 1.0;
    z += w[g];
  }
  double r = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double sum = 0;
    for (FeatureId a : groups[g].features) {
      double p = 0;
      for (std::size_t k = 0; k < d; ++k) p += ucs[k] * m.space.features(a.index(), k);
      for (const auto& [fa, val] : overrides)
        if (fa == a.index()) p = val;
      sum += p;
    }
    r += w[g] / z * (sum / static_cast<double>(groups[g].features.size()));
  }
  return r;
}

inline std::vector<std::pair<std::size_t, std::size_t>> plain(const ContextualSituation& cs) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& [f, c] : cs) out.emplace_back(f.index(), c.index());
  return out;
}

/// Smallest |beta| over every LeakyReLU input the batch evaluates; central differences
/// straddling the kink are meaningless, so callers redraw when this is tiny.
inline double min_abs_beta(const Model& m, std::span<const Interaction> batch) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& x : batch) {
    const auto b = m.predict(x.user, x.item, x.context);
    for (const auto& f : b.factors) lo = std::min(lo, std::abs(f.score));
    for (const auto& t : b.types)
      if (t.score) lo = std::min(lo, std::abs(*t.score));
  }
  return lo;
}

struct GradientCheck {
  double max_rel = 0.0;  // max |g - fd| / max(|g|, |fd|) over coordinates with max(|g|, |fd|) > 1e-6
  std::size_t coordinates = 0;
  std::size_t failures = 0;
  std::set<Table> tables;  // tables with at least one nonzero analytic entry
  std::string first_failure;
};

/// Compares `gradients` with central differences on every coordinate of every table. Rows the
/// batch does not touch must have zero finite difference. A coordinate passes when the
/// relative error is within `rel_tol` or the absolute error is below `abs_floor`.
inline GradientCheck finite_difference_check(const Model& m, std::span<const Interaction> batch, double l2,
                                             double eps = 1e-4, double rel_tol = 1e-3, double abs_floor = 1e-8) {
  GradientCheck out;
  const SparseGradient g = gradients(batch, m.space, m.catalog, m.config, l2);
  EmbeddingSpace probe = m.space;
  for (Table t : kAllTables) {
    Matrix& tab = probe.table(t);
    for (std::size_t r = 0; r < tab.rows(); ++r) {
      const auto* grow = g.find(t, r);
      for (std::size_t c = 0; c < tab.cols(); ++c) {
        const double keep = tab(r, c);
        tab(r, c) = keep + eps;
        const double up = loss(batch, probe, m.catalog, m.config, l2);
        tab(r, c) = keep - eps;
        const double down = loss(batch, probe, m.catalog, m.config, l2);
        tab(r, c) = keep;
        const double fd = (up - down) / (2.0 * eps);
        const double an = grow ? (*grow)[c] : 0.0;
        if (an != 0.0) out.tables.insert(t);
        ++out.coordinates;
        const double err = std::abs(an - fd);
        const double scale = std::max(std::abs(an), std::abs(fd));
        if (scale > 1e-6) out.max_rel = std::max(out.max_rel, err / scale);
        if (err > abs_floor && err > rel_tol * scale) {
          if (out.failures++ == 0)
            out.first_failure = std::string(to_string(t)) + "[" + std::to_string(r) + "][" + std::to_string(c) +
                                "] analytic " + std::to_string(an) + " vs fd " + std::to_string(fd);
        }
      }
    }
  }
  return out;
}

/// A small random CA-FATA instance with a random-target batch, redrawn away from the kink.
struct GradientInstance {
  Model model;
  std::vector<Interaction> batch;
};

inline GradientInstance random_gradient_instance(Rng& rng, std::size_t dim, Variant variant = Variant::kCaFata) {
  synthetic::CatalogShape shape;
  shape.users = 3;
  shape.items = 4;
  shape.types = 3;
  shape.features_per_type = 3;
  shape.max_features_per_group = 2;
  shape.factors = 2;
  shape.conditions_per_factor = 2;
  std::uniform_real_distribution<double> target(-1.0, 1.0);
  while (true) {
    GradientInstance gi;
    gi.model.catalog = synthetic::random_catalog(shape, rng);
    gi.model.config.dim = dim;
    gi.model.config.variant = variant;
    gi.model.space = synthetic::random_teacher(gi.model.catalog, dim, {}, rng);
    for (std::size_t k = 0; k < 5; ++k) {
      Interaction x;
      x.user = UserId{std::uniform_int_distribution<std::size_t>(0, shape.users - 1)(rng)};
      x.item = ItemId{std::uniform_int_distribution<std::size_t>(0, shape.items - 1)(rng)};
      x.context = synthetic::random_situation(gi.model.catalog, rng);
      x.rating = x.value = target(rng);
      gi.batch.push_back(x);
    }
    if (min_abs_beta(gi.model, gi.batch) >= 1e-3) return gi;
  }
}

/// A small movie catalog with a two-factor context schema, as files on disk.
struct MovieFiles {
  std::string triples, schema, interactions;
};

inline MovieFiles write_movie_files(const TempDir& dir) {
  MovieFiles f;
  f.triples = write_file(dir.file("items.tsv"),
                         "m1\tdirector\tNewell\nm1\tgenre\tfantasy\nm1\tgenre\tadventure\n"
                         "m2\tdirector\tNolan\nm2\tgenre\taction\n"
                         "m3\tdirector\tNewell\nm3\tgenre\tdrama\n"
                         "m4\tgenre\tcomedy\nm4\tgenre\tdrama\n");
  f.schema = write_file(dir.file("schema.json"),
                        R"({"time": ["morning", "evening"], "companion": ["alone", "family"]})");
  std::ostringstream csv;
  csv << "user,item,value,time,companion\n";
  const char* users[] = {"alice", "bob", "carol", "dave"};
  const char* items[] = {"m1", "m2", "m3", "m4"};
  const char* times[] = {"morning", "evening"};
  const char* comps[] = {"alone", "family"};
  int k = 0;
  for (const char* u : users)
    for (const char* i : items)
      for (int c = 0; c < 2; ++c, ++k)
        csv << u << ',' << i << ',' << (1 + (k * 7) % 5) << ',' << times[(k + c) % 2] << ',' << comps[(k / 2) % 2]
            << '\n';
  f.interactions = write_file(dir.file("interactions.csv"), csv.str());
  return f;
}

}  // namespace cafata::testing

#endif  // CAFATA_TESTS_SUPPORT_HPP
