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

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "support.hpp"

namespace cafata {
namespace {

using testing::TempDir;
using testing::write_file;

std::string empty_schema(const TempDir& d) { return write_file(d.file("schema.json"), "{}"); }

// -- load_catalog ------------------------------------------------------------

TEST(LoadCatalog, OneMovieWithTwoTypesAndThreeFeatures) {
  TempDir d;
  auto triples = write_file(d.file("t.tsv"), "hp4\tdirector\tNewell\nhp4\tgenre\tfantasy\nhp4\tgenre\tadventure\n");
  Catalog c = load_catalog(triples, empty_schema(d));
  ASSERT_EQ(c.items.size(), 1u);
  EXPECT_EQ(c.groups(ItemId{0}).size(), 2u);
  EXPECT_EQ(c.feature_count(ItemId{0}), 3u);
  EXPECT_EQ(c.types.size(), 2u);
}

TEST(LoadCatalog, EmptyFileIsRejected) {
  TempDir d;
  auto triples = write_file(d.file("t.tsv"), "");
  try {
    load_catalog(triples, empty_schema(d));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("catalog has no items"), std::string::npos);
  }
}

TEST(LoadCatalog, WrongColumnCountNamesTheLine) {
  TempDir d;
  auto triples = write_file(d.file("t.tsv"), "a\tgenre\tx\nb\tgenre\ny\tz\tw\n");
  try {
    load_catalog(triples, empty_schema(d));
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
}

TEST(LoadCatalog, DuplicateTripleWarnsAndDeduplicates) {
  TempDir d;
  auto triples = write_file(d.file("t.tsv"), "a\tgenre\tx\na\tgenre\tx\n");
  Warnings w;
  Catalog c = load_catalog(triples, empty_schema(d), &w);
  EXPECT_EQ(c.feature_count(ItemId{0}), 1u);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w[0].find("duplicate"), std::string::npos);
}

TEST(LoadCatalog, FeatureUnderTwoTypesIsAParseError) {
  TempDir d;
  auto triples = write_file(d.file("t.tsv"), "a\tgenre\tx\nb\tmood\tx\n");
  EXPECT_THROW(load_catalog(triples, empty_schema(d)), ParseError);
}

TEST(LoadCatalog, MissingFileNamesThePath) {
  TempDir d;
  try {
    load_catalog(d.file("nope.tsv"), empty_schema(d));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("nope.tsv"), std::string::npos);
  }
}

TEST(LoadCatalog, SchemaAddsUnknownConditionPerFactor) {
  TempDir d;
  auto triples = write_file(d.file("t.tsv"), "a\tgenre\tx\n");
  auto schema = write_file(d.file("s.json"), R"({"time": ["day", "night"], "mood": ["happy"]})");
  Catalog c = load_catalog(triples, schema);
  ASSERT_EQ(c.factors.size(), 2u);
  EXPECT_EQ(c.factors.name(0), "time");
  EXPECT_EQ(c.conditions_of(FactorId{0}).size(), 3u);
  EXPECT_EQ(c.conditions_of(FactorId{1}).size(), 2u);
  EXPECT_TRUE(c.find_condition(FactorId{1}, "unknown").has_value());
  for (std::size_t k = 0; k < c.num_conditions(); ++k)
    EXPECT_EQ(c.conditions_of(c.factor_of(ConditionId{k})).size() > 0, true);
}

// -- read_interactions -------------------------------------------------------

TEST(ReadInteractions, MissingContextCellsMapToUnknown) {
  TempDir d;
  auto triples = write_file(d.file("t.tsv"), "i1\tgenre\tx\n");
  auto schema = write_file(d.file("s.json"), R"({"time": ["day"], "mood": ["happy"]})");
  Catalog c = load_catalog(triples, schema);
  auto csv = write_file(d.file("x.csv"), "user,item,value,time\nu1,i1,3,day\nu1,i1,4,\n");
  auto rows = read_interactions(csv, c);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].context.at("time"), "day");
  EXPECT_EQ(rows[0].context.at("mood"), "unknown");
  EXPECT_EQ(rows[1].context.at("time"), "unknown");
}

TEST(ReadInteractions, UnknownConditionIsAParseErrorWithLine) {
  TempDir d;
  auto triples = write_file(d.file("t.tsv"), "i1\tgenre\tx\n");
  auto schema = write_file(d.file("s.json"), R"({"time": ["day"]})");
  Catalog c = load_catalog(triples, schema);
  auto csv = write_file(d.file("x.csv"), "user,item,value,time\nu1,i1,3,day\nu1,i1,3,dusk\n");
  try {
    read_interactions(csv, c);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(ReadInteractions, RejectsBadHeaderUnknownFactorAndNonNumericValue) {
  TempDir d;
  auto triples = write_file(d.file("t.tsv"), "i1\tgenre\tx\n");
  auto schema = write_file(d.file("s.json"), R"({"time": ["day"]})");
  Catalog c = load_catalog(triples, schema);
  EXPECT_THROW(read_interactions(write_file(d.file("a.csv"), "u,i,v\n"), c), ParseError);
  EXPECT_THROW(read_interactions(write_file(d.file("b.csv"), "user,item,value,weather\n"), c), ParseError);
  EXPECT_THROW(read_interactions(write_file(d.file("c.csv"), "user,item,value\nu,i1,abc\n"), c), ParseError);
  EXPECT_THROW(read_interactions(write_file(d.file("e.csv"), "user,item,value\nu,i1,nan\n"), c), ParseError);
}

TEST(ResolveInteractions, DropsUnknownItemsWithCount) {
  Catalog c;
  c.add_triple("i1", "genre", "x");
  std::vector<RawInteraction> raw{{"u1", "i1", 1.0, {}}, {"u1", "ghost", 2.0, {}}, {"u2", "i1", 3.0, {}}};
  std::size_t dropped = 0;
  auto rows = resolve_interactions(raw, c, &dropped);
  EXPECT_EQ(rows.size(), 2u);
  EXPECT_EQ(dropped, 1u);
  EXPECT_EQ(c.users.size(), 2u);
}

// -- log_transform_counts -----------------------------------------------------

std::vector<RawInteraction> counts(std::initializer_list<double> vs) {
  std::vector<RawInteraction> out;
  for (double v : vs) out.push_back({"u", "i", v, {}});
  return out;
}

TEST(LogTransform, SpecValues) {
  auto r = log_transform_counts(counts({0.0, std::exp(1.0) - 1.0, 1.0, 10.0, 100.0}));
  EXPECT_DOUBLE_EQ(r[0].value, 0.0);
  EXPECT_NEAR(r[1].value, 1.0, 1e-12);
  EXPECT_NEAR(r[2].value, 0.6931, 5e-5);
  EXPECT_NEAR(r[3].value, 2.3979, 5e-5);
  EXPECT_NEAR(r[4].value, 4.6151, 5e-5);
}

TEST(LogTransform, NegativeCountThrows) { EXPECT_THROW(log_transform_counts(counts({1.0, -1.0})), InvalidArgument); }

TEST(LogTransform, PreservesOrdering) {
  Rng rng(3);
  std::uniform_real_distribution<double> U(0, 1000);
  std::vector<RawInteraction> in;
  for (int k = 0; k < 200; ++k) in.push_back({"u", "i", std::floor(U(rng)), {}});
  auto out = log_transform_counts(in);
  for (std::size_t a = 0; a < in.size(); ++a)
    for (std::size_t b = 0; b < in.size(); b += 7)
      if (in[a].value < in[b].value) {
        EXPECT_LT(out[a].value, out[b].value);
      }
}

// -- k_core_filter -------------------------------------------------------------

std::vector<RawInteraction> edges(std::initializer_list<std::pair<const char*, const char*>> es) {
  std::vector<RawInteraction> out;
  for (auto [u, i] : es) out.push_back({u, i, 1.0, {}});
  return out;
}

TEST(KCore, KOneIsNoOp) {
  auto in = edges({{"u1", "i1"}, {"u2", "i2"}, {"u1", "i2"}});
  auto out = k_core_filter(in, 1);
  ASSERT_EQ(out.size(), in.size());
}

TEST(KCore, SingleUserBelowThresholdEmpties) {
  EXPECT_TRUE(k_core_filter(edges({{"u1", "i1"}, {"u1", "i2"}, {"u1", "i3"}}), 5).empty());
}

TEST(KCore, ChainPeelsCompletely) {
  EXPECT_TRUE(k_core_filter(edges({{"u1", "i1"}, {"u1", "i2"}, {"u2", "i2"}}), 2).empty());
}

TEST(KCore, ZeroIsRejected) { EXPECT_THROW(k_core_filter(edges({{"u", "i"}}), 0), InvalidArgument); }

TEST(KCore, RandomGraphsAreIdempotentAndSatisfyMinDegree) {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<RawInteraction> in;
    std::uniform_int_distribution<int> U(0, 14), I(0, 19);
    for (int e = 0; e < 120; ++e)
      in.push_back({"u" + std::to_string(U(rng)), "i" + std::to_string(I(rng)), 1.0, {}});
    const std::size_t k = 1 + trial % 5;
    auto once = k_core_filter(in, k);
    auto twice = k_core_filter(once, k);
    ASSERT_EQ(once.size(), twice.size());
    std::map<std::string, std::size_t> du, di;
    for (const auto& r : once) {
      ++du[r.user];
      ++di[r.item];
    }
    for (const auto& [_, n] : du) EXPECT_GE(n, k);
    for (const auto& [_, n] : di) EXPECT_GE(n, k);
  }
}

// -- scaling ---------------------------------------------------------------------

TEST(Scale, SpecValues) {
  RatingScale five(1, 5);
  EXPECT_DOUBLE_EQ(scale_rating(5, five), 1.0);
  EXPECT_DOUBLE_EQ(scale_rating(1, five), -1.0);
  EXPECT_DOUBLE_EQ(scale_rating(3, five), 0.0);
  EXPECT_NEAR(scale_rating(0.6931, RatingScale(0, 4.46)), -0.6892, 5e-5);
}

TEST(Scale, OutOfRangeAndInvalidScaleThrow) {
  EXPECT_THROW(scale_rating(6, RatingScale(1, 5)), InvalidArgument);
  EXPECT_THROW(scale_rating(0.5, RatingScale(1, 5)), InvalidArgument);
  EXPECT_THROW(RatingScale(2, 2), InvalidArgument);
}

TEST(Scale, InverseRecoversAndIsIncreasing) {
  Rng rng(5);
  std::uniform_real_distribution<double> U(-3, 17);
  RatingScale s(-3, 17);
  double prev_in = -3, prev_out = -1;
  std::vector<double> xs;
  for (int k = 0; k < 1000; ++k) xs.push_back(U(rng));
  std::sort(xs.begin(), xs.end());
  for (double x : xs) {
    const double y = scale_rating(x, s);
    EXPECT_NEAR(inverse_scale(y, s), x, 1e-12);
    if (x > prev_in) {
      EXPECT_GT(y, prev_out);
    }
    prev_in = x;
    prev_out = y;
  }
}

// -- split_dataset ----------------------------------------------------------------

std::vector<Interaction> synthetic_rows(std::size_t users, std::size_t per_user) {
  std::vector<Interaction> rows;
  for (std::size_t u = 0; u < users; ++u)
    for (std::size_t k = 0; k < per_user; ++k) rows.push_back({UserId{u}, ItemId{k}, {}, 1.0, 0.0});
  return rows;
}

TEST(Split, TenRowsGive811) {
  auto s = split_dataset(synthetic_rows(1, 10), {0.8, 0.1, 0.1}, 7);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.valid.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
}

TEST(Split, DeterministicPerSeedAndSeedSensitive) {
  auto rows = synthetic_rows(4, 25);
  auto a = split_dataset(rows, {0.8, 0.1, 0.1}, 7);
  auto b = split_dataset(rows, {0.8, 0.1, 0.1}, 7);
  auto c = split_dataset(rows, {0.8, 0.1, 0.1}, 8);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.train.size(), c.train.size());
  EXPECT_EQ(a.test.size(), c.test.size());
  EXPECT_NE(a, c);
}

TEST(Split, DisjointCoveringAndEveryActiveUserInTrain) {
  std::vector<Interaction> rows;
  Rng rng(2);
  std::uniform_int_distribution<std::size_t> U(0, 29);
  for (int k = 0; k < 200; ++k) rows.push_back({UserId{U(rng)}, ItemId{0}, {}, 1.0, 0.0});
  auto s = split_dataset(rows, {0.6, 0.2, 0.2}, 1);
  std::vector<int> seen(rows.size(), 0);
  for (auto* part : {&s.train, &s.valid, &s.test})
    for (auto k : *part) ++seen[k];
  for (int v : seen) EXPECT_EQ(v, 1);
  std::map<UserId, int> degree;
  std::set<UserId> in_train;
  for (const auto& r : rows) ++degree[r.user];
  for (auto k : s.train) in_train.insert(rows[k].user);
  for (const auto& [u, n] : degree)
    if (n >= 3) {
      EXPECT_TRUE(in_train.count(u)) << "user " << u.value;
    }
}

TEST(Split, BadRatiosThrow) {
  auto rows = synthetic_rows(1, 10);
  EXPECT_THROW(split_dataset(rows, {0.8, 0.1, 0.2}, 1), InvalidArgument);
  EXPECT_THROW(split_dataset(rows, {1.0, 0.0, 0.0}, 1), InvalidArgument);
  EXPECT_THROW(split_dataset(rows, {1.2, -0.1, -0.1}, 1), InvalidArgument);
}

}  // namespace
}  // namespace cafata
