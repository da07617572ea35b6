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

#ifndef CAFATA_ANALYSIS_HPP
#define CAFATA_ANALYSIS_HPP

#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cafata/catalog.hpp"
#include "cafata/core.hpp"
#include "cafata/model.hpp"

namespace cafata {

/// One row per user: the user's softmax importance over the contextual factors.
struct ImportanceTable {
  std::vector<std::string> users;
  std::vector<std::string> factors;
  Matrix values;
};

inline ImportanceTable export_importance(const EmbeddingSpace& space, const Catalog& catalog,
                                         const ModelConfig& config) {
  if (!uses_context(config.variant))
    throw InvalidArgument("variant '" + to_string(config.variant) + "' has no contextual factor importance");
  if (catalog.factors.size() == 0) throw InvalidArgument("model has no contextual factors");
  ImportanceTable t;
  t.users = catalog.users.names();
  t.factors = catalog.factors.names();
  t.values = Matrix(catalog.users.size(), catalog.factors.size());
  for (std::size_t u = 0; u < catalog.users.size(); ++u) {
    const auto fi = context_factor_importance(UserId{u}, space, catalog, config.leaky_relu_slope);
    for (std::size_t f = 0; f < fi.importance.size(); ++f) t.values(u, f) = fi.importance[f];
  }
  return t;
}

struct KMeansResult {
  std::vector<std::size_t> assignment;
  Matrix centroids;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each assignment step
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. An emptied cluster is re-seeded with the point
/// farthest from its current centroid.
inline KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iter = 300) {
  const std::size_t n = points.rows(), d = points.cols();
  if (k == 0) throw InvalidArgument("k must be positive");
  if (n == 0) throw InvalidArgument("cannot cluster an empty matrix");
  if (k > n) throw InvalidArgument("k=" + std::to_string(k) + " exceeds the number of rows (" + std::to_string(n) + ")");

  Rng rng(seed);
  KMeansResult res;
  res.centroids = Matrix(k, d);
  auto set_centroid = [&](std::size_t c, std::size_t p) {
    std::copy(points.row(p).begin(), points.row(p).end(), res.centroids.row(c).begin());
  };

  // k-means++ seeding
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  set_centroid(0, first);
  chosen[first] = true;
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      d2[p] = std::min(d2[p], detail::sq_dist(points.row(p), res.centroids.row(c - 1)));
      total += chosen[p] ? 0.0 : d2[p];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (std::size_t p = 0; p < n; ++p) {
        if (chosen[p]) continue;
        pick = p;
        r -= d2[p];
        if (r < 0.0) break;
      }
    } else {
      for (std::size_t p = 0; p < n && pick == n; ++p)
        if (!chosen[p]) pick = p;
    }
    set_centroid(c, pick);
    chosen[pick] = true;
  }

  res.assignment.assign(n, k);
  std::vector<std::size_t> counts(k);
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      std::size_t best = 0;
      double best_d = detail::sq_dist(points.row(p), res.centroids.row(0));
      for (std::size_t c = 1; c < k; ++c) {
        const double dc = detail::sq_dist(points.row(p), res.centroids.row(c));
        if (dc < best_d) {
          best_d = dc;
          best = c;
        }
      }
      changed = changed || res.assignment[p] != best;
      res.assignment[p] = best;
      inertia += best_d;
    }
    res.inertia_history.push_back(inertia);
    res.inertia = inertia;
    if (!changed) {
      res.converged = true;
      break;
    }

    Matrix sums(k, d);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t p = 0; p < n; ++p) {
      axpy(1.0, points.row(p), sums.row(res.assignment[p]));
      ++counts[res.assignment[p]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) res.centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t p = 0; p < n; ++p) {
        if (counts[res.assignment[p]] <= 1) continue;
        const double dp = detail::sq_dist(points.row(p), res.centroids.row(res.assignment[p]));
        if (dp > far_d) {
          far_d = dp;
          far = p;
        }
      }
      set_centroid(c, far);
      --counts[res.assignment[far]];
      res.assignment[far] = c;
      counts[c] = 1;
    }
  }
  return res;
}

struct InertiaPoint {
  std::size_t k = 0;
  double inertia = 0.0;
};

/// Final inertia for each k in [k_min, min(k_max, rows)], for choosing k.
inline std::vector<InertiaPoint> inertia_sweep(const Matrix& points, std::size_t k_min, std::size_t k_max,
                                               std::uint64_t seed) {
  if (k_min == 0 || k_min > k_max) throw InvalidArgument("invalid k range");
  std::vector<InertiaPoint> out;
  for (std::size_t k = k_min; k <= std::min(k_max, points.rows()); ++k)
    out.push_back({k, kmeans(points, k, seed).inertia});
  return out;
}

/// Per-user cluster labels next to the importance rows.
inline std::string cluster_csv(const ImportanceTable& t, const KMeansResult& km) {
  std::ostringstream out;
  out.precision(17);
  out << "user";
  for (const auto& f : t.factors) out << ',' << f << "_pi";
  out << ",cluster\n";
  for (std::size_t u = 0; u < t.users.size(); ++u) {
    out << t.users[u];
    for (std::size_t f = 0; f < t.factors.size(); ++f) out << ',' << t.values(u, f);
    out << ',' << km.assignment[u] << '\n';
  }
  return out.str();
}

/// Per-cluster size and mean importance for any assignment vector.
struct ClusterReport {
  std::vector<std::string> factors;
  std::vector<std::size_t> sizes;
  Matrix means;  // clusters x factors
};

inline ClusterReport cluster_report(const std::vector<std::size_t>& assignment, const ImportanceTable& t) {
  if (assignment.size() != t.values.rows())
    throw InvalidArgument("assignment has " + std::to_string(assignment.size()) + " entries for " +
                          std::to_string(t.values.rows()) + " users");
  std::size_t k = 0;
  for (std::size_t c : assignment) k = std::max(k, c + 1);
  ClusterReport r{t.factors, std::vector<std::size_t>(k), Matrix(k, t.values.cols())};
  for (std::size_t u = 0; u < assignment.size(); ++u) {
    ++r.sizes[assignment[u]];
    axpy(1.0, t.values.row(u), r.means.row(assignment[u]));
  }
  for (std::size_t c = 0; c < k; ++c)
    if (r.sizes[c] > 0)
      for (double& v : r.means.row(c)) v /= static_cast<double>(r.sizes[c]);
  return r;
}

inline std::string report_csv(const ClusterReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "cluster,size";
  for (const auto& f : r.factors) out << ',' << f << "_pi";
  out << '\n';
  for (std::size_t c = 0; c < r.sizes.size(); ++c) {
    out << c << ',' << r.sizes[c];
    for (std::size_t f = 0; f < r.factors.size(); ++f) out << ',' << r.means(c, f);
    out << '\n';
  }
  return out.str();
}

inline std::string report_table(const ClusterReport& r) {
  std::ostringstream out;
  char buf[64];
  out << "cluster  size";
  for (const auto& f : r.factors) {
    std::snprintf(buf, sizeof buf, "  %12.12s", f.c_str());
    out << buf;
  }
  out << '\n';
  for (std::size_t c = 0; c < r.sizes.size(); ++c) {
    std::snprintf(buf, sizeof buf, "%7zu  %4zu", c, r.sizes[c]);
    out << buf;
    for (std::size_t f = 0; f < r.factors.size(); ++f) {
      std::snprintf(buf, sizeof buf, "  %12.4f", r.means(c, f));
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace cafata

#endif  // CAFATA_ANALYSIS_HPP
