#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "hfsel/corpus.hpp"
#include "hfsel/error.hpp"
#include "oracle_values.hpp"
#include "test_util.hpp"

using namespace hfsel;

namespace {

Dataset parse(const std::string& text, LoadOptions opts = {}) {
  std::istringstream in(text);
  return load_sparse(in, opts);
}

ErrorCode parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for: " << text;
  return ErrorCode::InvalidArgument;
}

std::vector<double> dense(const Dataset& d, std::size_t i, std::size_t nf) {
  std::vector<double> out(nf, 0.0);
  auto r = d.row(i);
  for (std::size_t k = 0; k < r.size(); ++k) out[r.indices[k]] = r.values[k];
  return out;
}

}  // namespace

TEST(Corpus, ParsesRow) {
  auto d = parse("5 1:2.0 7:1.0\n");
  ASSERT_EQ(d.num_instances(), 1u);
  EXPECT_EQ(d.label(0), 5);
  auto r = d.row(0);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r.indices[0], 1u);
  EXPECT_EQ(r.values[0], 2.0);
  EXPECT_EQ(r.indices[1], 7u);
  EXPECT_EQ(r.values[1], 1.0);
  EXPECT_EQ(d.num_features(), 8u);
}

TEST(Corpus, SortsRow) {
  auto a = parse("5 1:2.0 7:1.0\n");
  auto b = parse("5 7:1.0 1:2.0\n");
  EXPECT_EQ(a.indices(), b.indices());
  EXPECT_EQ(a.values(), b.values());
}

TEST(Corpus, RejectsBadInput) {
  EXPECT_EQ(parse_error("5 1:NaN\n"), ErrorCode::NonFiniteValue);
  EXPECT_EQ(parse_error("5 1:inf\n"), ErrorCode::NonFiniteValue);
  EXPECT_EQ(parse_error("5 1:2 1:3\n"), ErrorCode::DuplicateFeatureInRow);
  EXPECT_EQ(parse_error("x 1:2\n"), ErrorCode::MalformedLine);
  EXPECT_EQ(parse_error("5 1-2\n"), ErrorCode::MalformedLine);
}

TEST(Corpus, OneBasedIndices) {
  LoadOptions o;
  o.one_based = true;
  auto d = parse("3 1:1 4:2\n", o);
  EXPECT_EQ(d.row(0).indices[0], 0u);
  EXPECT_EQ(d.row(0).indices[1], 3u);
  auto e = parse("# index-base: 1\n3 1:1\n");
  EXPECT_EQ(e.row(0).indices[0], 0u);
}

TEST(Corpus, WriteReadRoundTrip) {
  std::mt19937_64 rng(5);
  auto h = testutil::random_tree(rng, 2);
  auto d = testutil::random_dataset(rng, h, 30, 25, 0.2);
  std::ostringstream out;
  write_sparse(out, d);
  LoadOptions o;
  o.min_features = d.num_features();
  auto back = parse(out.str(), o);
  EXPECT_EQ(back.labels(), d.labels());
  EXPECT_EQ(back.indices(), d.indices());
  EXPECT_EQ(back.values(), d.values());
  EXPECT_EQ(back.row_ptr(), d.row_ptr());
}

TEST(Tfidf, UbiquitousTermVanishes) {
  auto d = testutil::make_dataset({{{1}, {1.0}, 0}, {{1}, {1.0}, 0}}, 2);
  auto t = tfidf_transform(d);
  EXPECT_TRUE(t.row(0).empty());
  EXPECT_TRUE(t.row(1).empty());
}

TEST(Tfidf, DisjointRowsBecomeUnitVectors) {
  auto d = testutil::make_dataset({{{1}, {1.0}, 0}, {{2}, {1.0}, 0}}, 3);
  auto t = tfidf_transform(d);
  ASSERT_EQ(t.row(0).size(), 1u);
  EXPECT_DOUBLE_EQ(t.row(0).values[0], 1.0);
  ASSERT_EQ(t.row(1).size(), 1u);
  EXPECT_DOUBLE_EQ(t.row(1).values[0], 1.0);
}

TEST(Tfidf, MatchesReferenceOracle) {
  std::vector<testutil::Row> rows;
  for (int i = 0; i < 5; ++i) {
    testutil::Row r{{}, {}, 0};
    for (int f = 0; f < 4; ++f) {
      const double v = oracle::kTfidfCounts[i * 4 + f];
      if (v != 0.0) {
        r.idx.push_back(f);
        r.val.push_back(v);
      }
    }
    rows.push_back(r);
  }
  auto d = testutil::make_dataset(rows, 4);
  auto idf = fit_idf(d);
  for (int f = 0; f < 4; ++f) EXPECT_NEAR(idf[f], oracle::kTfidfIdf[f], 1e-12);
  auto t = tfidf_transform(d);
  for (int i = 0; i < 5; ++i) {
    auto v = dense(t, i, 4);
    for (int f = 0; f < 4; ++f) EXPECT_NEAR(v[f], oracle::kTfidfOut[i * 4 + f], 1e-9);
  }
}

TEST(Tfidf, IdfFromTrainingAppliesToUnseenFeatures) {
  auto train = testutil::make_dataset({{{0}, {1.0}, 0}, {{1}, {1.0}, 0}}, 2);
  auto idf = fit_idf(train);
  auto test = testutil::make_dataset({{{0, 5}, {2.0, 3.0}, 0}}, 6);
  auto t = apply_idf(test, idf);
  ASSERT_EQ(t.row(0).size(), 1u);  // feature 5 has no idf entry and is dropped
  EXPECT_EQ(t.row(0).indices[0], 0u);
  EXPECT_DOUBLE_EQ(t.row(0).values[0], 1.0);
}

TEST(Tfidf, L2NormalizeGivesUnitRows) {
  std::mt19937_64 rng(9);
  auto h = testutil::random_tree(rng, 1);
  auto d = l2_normalize(testutil::random_dataset(rng, h, 20, 15, 0.4));
  for (std::size_t i = 0; i < d.num_instances(); ++i) {
    auto r = d.row(i);
    if (r.empty()) continue;
    double sq = 0;
    for (double v : r.values) sq += v * v;
    EXPECT_NEAR(sq, 1.0, 1e-12);
  }
}

TEST(Split, TenInstances) {
  testutil::Row r{{0}, {1.0}, 1};
  auto d = testutil::make_dataset(std::vector<testutil::Row>(10, r), 1);
  SplitSpec s;
  s.stratified = false;
  auto idx = split_indices(d, s);
  EXPECT_EQ(idx.train.size(), 9u);
  EXPECT_EQ(idx.validation.size(), 1u);
  s.stratified = true;
  idx = split_indices(d, s);
  EXPECT_EQ(idx.train.size(), 9u);
  EXPECT_EQ(idx.validation.size(), 1u);
}

TEST(Split, Deterministic) {
  std::mt19937_64 rng(1);
  auto h = testutil::random_tree(rng, 2);
  auto d = testutil::random_dataset(rng, h, 200, 10, 0.3);
  SplitSpec s;
  s.seed = 77;
  auto a = split_indices(d, s);
  auto b = split_indices(d, s);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  s.seed = 78;
  auto c = split_indices(d, s);
  EXPECT_NE(a.train, c.train);
}

TEST(Split, StratifiedProportional) {
  std::vector<testutil::Row> rows;
  for (int i = 0; i < 100; ++i) rows.push_back({{0}, {1.0}, i % 5});
  auto d = testutil::make_dataset(rows, 1);
  auto idx = split_indices(d, SplitSpec{});
  std::map<NodeId, int> tr, va;
  for (auto i : idx.train) ++tr[d.label(i)];
  for (auto i : idx.validation) ++va[d.label(i)];
  for (NodeId c = 0; c < 5; ++c) {
    EXPECT_EQ(tr[c], 18);
    EXPECT_EQ(va[c], 2);
  }
}

TEST(Split, PartitionsRows) {
  std::mt19937_64 rng(2);
  auto h = testutil::random_tree(rng, 2);
  auto d = testutil::random_dataset(rng, h, 137, 5, 0.3);
  auto idx = split_indices(d, SplitSpec{});
  std::vector<int> seen(d.num_instances(), 0);
  for (auto i : idx.train) ++seen[i];
  for (auto i : idx.validation) ++seen[i];
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Split, EmptyDatasetIsDegenerate) {
  Dataset d;
  EXPECT_THROW(split_indices(d, SplitSpec{}), Error);
}

TEST(Sample, PerClassCounts) {
  std::vector<testutil::Row> rows;
  for (int i = 0; i < 60; ++i) rows.push_back({{0}, {1.0}, i % 3});
  auto d = testutil::make_dataset(rows, 1);
  auto pick = sample_per_class(d, 5, 1);
  std::map<NodeId, int> n;
  for (auto i : pick) ++n[d.label(i)];
  for (NodeId c = 0; c < 3; ++c) EXPECT_EQ(n[c], 5);
  EXPECT_EQ(pick, sample_per_class(d, 5, 1));
}
