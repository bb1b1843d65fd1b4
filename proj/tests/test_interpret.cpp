#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "selfreg/interpret.hpp"

using namespace selfreg;

namespace {

TopKSae<float> identity_sae() {
    return {RowMatrix<float>(2, 2, std::vector<float>{1, 0, 0, 1}), 1, 0.0};
}

EmbeddingDataset rows_from(const std::vector<std::array<float, 2>>& xs) {
    EmbeddingDataset ds;
    ds.vectors = RowMatrix<float>(xs.size(), 2);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        ds.vectors(i, 0) = xs[i][0];
        ds.vectors(i, 1) = xs[i][1];
        ds.labels.emplace_back();
        ds.meta.push_back({static_cast<std::int64_t>(i), "d" + std::to_string(i), "row " + std::to_string(i), 3});
    }
    return ds;
}

/// Brute force: score every row, sort by (activation desc, row_id asc), keep m.
std::vector<std::pair<std::int64_t, double>> brute_top(const TopKSae<float>& sae, const EmbeddingDataset& ds,
                                                       std::size_t c, std::size_t m) {
    std::vector<std::pair<std::int64_t, double>> all;
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        if (ds.meta[i].token_count == 0) continue;
        auto a = oracle::top_k_dense(oracle::preacts(sae, ds.row(i)), sae.k_active);
        if (a[c] > 0) all.emplace_back(ds.meta[i].row_id, double(a[c]));
    }
    std::sort(all.begin(), all.end(), [](auto& x, auto& y) { return x.second > y.second || (x.second == y.second && x.first < y.first); });
    if (all.size() > m) all.resize(m);
    return all;
}

} // namespace

TEST(TopSpans, PicksTheStrongestRowsInOrder) {
    std::vector<std::array<float, 2>> xs(10, {0.1f, 0.5f});
    xs[3] = {2.0f, 0.0f};
    xs[7] = {3.0f, 0.0f};
    xs[5] = {0.2f, 0.0f};
    auto e = top_spans(identity_sae(), rows_from(xs), 0, 2);
    ASSERT_EQ(e.spans.size(), 2u);
    EXPECT_EQ(e.spans[0].row_id, 7);
    EXPECT_EQ(e.spans[1].row_id, 3);
    EXPECT_EQ(e.spans[0].activation, 3.0);
    EXPECT_EQ(e.spans[0].text, "row 7");
    EXPECT_EQ(e.spans[0].doc_id, "d7");
    EXPECT_EQ(e.n_active_rows, 3u);
}

TEST(TopSpans, TiesBreakOnLowerRowId) {
    std::vector<std::array<float, 2>> xs(6, {1.0f, 0.0f});
    auto e = top_spans(identity_sae(), rows_from(xs), 0, 3);
    ASSERT_EQ(e.spans.size(), 3u);
    EXPECT_EQ(e.spans[0].row_id, 0);
    EXPECT_EQ(e.spans[1].row_id, 1);
    EXPECT_EQ(e.spans[2].row_id, 2);
}

TEST(TopSpans, DeadFeatureHasNoSpans) {
    std::vector<std::array<float, 2>> xs(5, {1.0f, 0.5f});
    auto e = top_spans(identity_sae(), rows_from(xs), 1, 4);
    EXPECT_TRUE(e.spans.empty());
    EXPECT_EQ(e.n_active_rows, 0u);
}

TEST(TopSpans, MLargerThanActiveRowsReturnsAllOfThem) {
    std::vector<std::array<float, 2>> xs{{1, 0}, {0, 1}, {2, 0}};
    auto e = top_spans(identity_sae(), rows_from(xs), 0, 10);
    EXPECT_EQ(e.spans.size(), 2u);
    EXPECT_EQ(e.m_requested, 10u);
}

TEST(TopSpans, RowsWithoutTextAreSkipped) {
    std::vector<std::array<float, 2>> xs{{1, 0}, {5, 0}};
    auto ds = rows_from(xs);
    ds.meta[1].text.clear();
    ds.meta[1].token_count = 0;
    auto e = top_spans(identity_sae(), ds, 0, 2);
    ASSERT_EQ(e.spans.size(), 1u);
    EXPECT_EQ(e.spans[0].row_id, 0);
}

TEST(TopSpans, RejectsBadArguments) {
    auto ds = rows_from({{1, 0}});
    EXPECT_THROW(top_spans(identity_sae(), ds, 2, 1), InvalidArgument);
    EXPECT_THROW(top_spans(identity_sae(), ds, 0, 0), InvalidArgument);
}

TEST(TopSpans, MatchesBruteForceOnRandomData) {
    auto sae = init_kaiming<float>(6, 24, 3, 31);
    auto ds = oracle::random_dataset(400, 6, 32, false);
    // a few exact duplicates to exercise ties
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t d = 0; d < 6; ++d) ds.vectors(100 + i, d) = ds.vectors(i, d);
    for (std::uint32_t c = 0; c < 24; ++c) {
        auto e = top_spans(sae, ds, c, 7);
        auto want = brute_top(sae, ds, c, 7);
        ASSERT_EQ(e.spans.size(), want.size()) << "feature " << c;
        for (std::size_t j = 0; j < want.size(); ++j) {
            EXPECT_EQ(e.spans[j].row_id, want[j].first);
            EXPECT_EQ(e.spans[j].activation, want[j].second);
        }
    }
}

TEST(ExplainAll, OmitsDeadFeaturesAndAgreesWithTopSpans) {
    auto sae = init_kaiming<float>(6, 40, 2, 41);
    auto ds = oracle::random_dataset(60, 6, 42, false);
    auto all = explain_all(sae, ds, 5);
    auto dead = detect_dead_features(sae, ds);
    EXPECT_EQ(all.size(), 40u - dead.n_dead);
    std::size_t j = 0;
    for (std::uint32_t c = 0; c < 40; ++c) {
        auto one = top_spans(sae, ds, c, 5);
        if (dead.is_dead[c]) {
            EXPECT_TRUE(one.spans.empty());
            continue;
        }
        ASSERT_LT(j, all.size());
        EXPECT_EQ(all[j], one);
        ++j;
    }
    EXPECT_EQ(explain_all(sae, ds, 5), all);
}

TEST(FeaturesFile, RoundTrip) {
    auto sae = init_kaiming<float>(6, 24, 3, 51);
    auto ds = oracle::random_dataset(50, 6, 52, false);
    ds.meta[3].text = "quote \" and \\ backslash\nnewline and unicode \xc3\xa9";
    auto all = explain_all(sae, ds, 4);
    for (auto& e : all) e.m_requested = e.spans.size();
    const auto path = (std::filesystem::temp_directory_path() / "selfreg_features.jsonl").string();
    write_features(all, path);
    EXPECT_EQ(read_features(path), all);
    EXPECT_EQ(encode_features(decode_features(encode_features(all))), encode_features(all));
    EXPECT_THROW(decode_features("{\"feature_id\": 1}\n"), FormatError);
    EXPECT_THROW(decode_features("not json\n"), FormatError);
}
