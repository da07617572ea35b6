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

#include "support.hpp"

namespace cafata {
namespace {

using testing::read_file;
using testing::TempDir;
using testing::write_file;

Checkpoint random_checkpoint(std::uint64_t seed, Variant v = Variant::kCaFata) {
  Rng rng(seed);
  synthetic::CatalogShape shape;
  shape.users = 5;
  shape.items = 7;
  Checkpoint ck;
  ck.catalog = synthetic::random_catalog(shape, rng);
  ck.config.dim = 3;
  ck.config.variant = v;
  ck.config.seed = seed;
  ck.config.leaky_relu_slope = 0.2;
  ck.variant = to_string(v);
  ck.scale = RatingScale(1, 5);
  ck.space = EmbeddingSpace::random(ck.catalog, 3, seed);
  ck.history = {{0, {1, 3}}, {4, {0}}};
  return ck;
}

TEST(Checkpoint, RoundTripIsExact) {
  TempDir dir;
  const auto ck = random_checkpoint(1);
  save_checkpoint(dir.file("m.json"), ck);
  const auto back = load_checkpoint(dir.file("m.json"));
  EXPECT_EQ(back.variant, ck.variant);
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.catalog, ck.catalog);
  EXPECT_EQ(back.scale, ck.scale);
  EXPECT_EQ(back.space, ck.space);
  EXPECT_EQ(back.history, ck.history);
  save_checkpoint(dir.file("again.json"), back);
  EXPECT_EQ(read_file(dir.file("m.json")), read_file(dir.file("again.json")));
}

TEST(Checkpoint, PredictionsSurviveReload) {
  TempDir dir;
  const auto ck = random_checkpoint(2, Variant::kAvgCaFata);
  save_checkpoint(dir.file("m.json"), ck);
  const auto a = ck.model(), b = load_checkpoint(dir.file("m.json")).model();
  Rng rng(3);
  for (std::size_t i = 0; i < ck.catalog.items.size(); ++i) {
    const auto cs = synthetic::random_situation(ck.catalog, rng);
    EXPECT_EQ(a.predict(UserId{1}, ItemId{i}, cs).rating, b.predict(UserId{1}, ItemId{i}, cs).rating);
  }
}

TEST(Checkpoint, MfRoundTrip) {
  TempDir dir;
  auto ck = random_checkpoint(4);
  ck.variant = "mf";
  ck.mf = MfSpace::random(5, 7, 3, 9);
  save_checkpoint(dir.file("mf.json"), ck);
  const auto back = load_checkpoint(dir.file("mf.json"));
  ASSERT_TRUE(back.is_mf());
  EXPECT_EQ(*back.mf, *ck.mf);
  EXPECT_THROW(back.model(), InvalidArgument);
}

TEST(Checkpoint, RejectsForeignOrBrokenFiles) {
  TempDir dir;
  EXPECT_THROW(load_checkpoint(dir.file("missing.json")), ParseError);
  write_file(dir.file("junk.json"), "{not json");
  EXPECT_THROW(load_checkpoint(dir.file("junk.json")), ParseError);
  write_file(dir.file("other.json"), R"({"format": "something-else", "version": 1})");
  EXPECT_THROW(load_checkpoint(dir.file("other.json")), ParseError);
  write_file(dir.file("future.json"), R"({"format": "cafata-checkpoint", "version": 99})");
  EXPECT_THROW(load_checkpoint(dir.file("future.json")), ParseError);
  write_file(dir.file("partial.json"), R"({"format": "cafata-checkpoint", "version": 1, "variant": "fata"})");
  EXPECT_THROW(load_checkpoint(dir.file("partial.json")), ParseError);
}

TEST(Checkpoint, ShapeMismatchIsRejected) {
  TempDir dir;
  auto ck = random_checkpoint(5);
  save_checkpoint(dir.file("m.json"), ck);
  auto doc = Json::parse(read_file(dir.file("m.json")));
  doc["embeddings"]["users"]["rows"] = 2;
  doc["embeddings"]["users"]["data"] = std::vector<double>(6, 0.0);
  write_file(dir.file("bad.json"), doc.dump());
  EXPECT_THROW(load_checkpoint(dir.file("bad.json")), InvalidArgument);
}

TEST(Checkpoint, HistoryFromRows) {
  std::vector<Interaction> rows(3);
  rows[0].user = UserId{0};
  rows[0].item = ItemId{2};
  rows[1].user = UserId{0};
  rows[1].item = ItemId{2};
  rows[2].user = UserId{1};
  rows[2].item = ItemId{0};
  const auto h = history_of(rows);
  EXPECT_EQ(h.at(0), (std::set<std::uint32_t>{2}));
  EXPECT_EQ(h.at(1), (std::set<std::uint32_t>{0}));
}

TEST(CatalogFile, RoundTrip) {
  TempDir dir;
  const auto ck = random_checkpoint(6);
  save_catalog(dir.file("c.json"), ck.catalog);
  EXPECT_EQ(load_catalog_json(dir.file("c.json")), ck.catalog);
}

TEST(DatasetFile, RoundTrip) {
  TempDir dir;
  const auto ck = random_checkpoint(7);
  Rng rng(7);
  ModelConfig mc;
  mc.dim = 3;
  Dataset d;
  d.interactions = synthetic::planted_interactions(ck.catalog, ck.space, mc, 4, 0.1, rng);
  d.scale = RatingScale(-1, 1);
  d.split = split_dataset(d.interactions, {0.8, 0.1, 0.1}, 1);
  save_dataset(dir.file("d.json"), d);
  const auto back = load_dataset(dir.file("d.json"), ck.catalog);
  EXPECT_EQ(back.interactions, d.interactions);
  EXPECT_EQ(back.split, d.split);
  EXPECT_EQ(back.scale, d.scale);
}

}  // namespace
}  // namespace cafata
