#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "selfreg/embedding_store.hpp"

using namespace selfreg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "selfreg_test_store";
    fs::create_directories(dir);
    return dir / name;
}

FormatErrc decode_code(const binary::Bytes& bytes) {
    try {
        decode_embeddings(bytes);
    } catch (const FormatError& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected a FormatError";
    return FormatErrc::io;
}

EmbeddingDataset labeled(std::vector<std::uint8_t> labels, std::size_t dim = 2) {
    auto ds = oracle::random_dataset(labels.size(), dim, 7);
    for (std::size_t i = 0; i < labels.size(); ++i) ds.labels[i] = labels[i];
    return ds;
}

} // namespace

TEST(EmbeddingStore, ZeroRowRoundTripHasHeaderPlusEightBytes) {
    EmbeddingDataset ds;
    ds.vectors = RowMatrix<float>(1, 2, 0.0f);
    ds.labels = {std::uint8_t{0}};
    ds.meta = {{0, "d", "t", 1}};
    auto bytes = encode_embeddings(ds);
    EXPECT_EQ(bytes.size(), 24u + 8u);
    const auto path = scratch("zero.emb").string();
    write_embeddings(ds, path);
    EXPECT_EQ(read_embeddings(path), ds);
}

TEST(EmbeddingStore, RandomRoundTripIsBitExact) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<float> u(-1e3f, 1e3f);
    for (int trial = 0; trial < 20; ++trial) {
        auto ds = oracle::random_dataset(3, 4, 100 + trial);
        for (auto& v : ds.vectors.flat()) v = u(rng);
        ds.vectors(0, 0) = -0.0f;
        ds.vectors(1, 1) = std::numeric_limits<float>::denorm_min();
        const auto path = scratch("rt.emb").string();
        write_embeddings(ds, path);
        auto back = read_embeddings(path);
        ASSERT_EQ(back.n_rows(), 3u);
        EXPECT_EQ(std::memcmp(back.vectors.flat().data(), ds.vectors.flat().data(), 12 * sizeof(float)), 0);
        EXPECT_EQ(back, ds);
    }
}

TEST(EmbeddingStore, NanIsRejectedBeforeWriting) {
    auto ds = oracle::random_dataset(2, 2, 1);
    ds.vectors(1, 0) = std::numeric_limits<float>::quiet_NaN();
    const auto path = scratch("nan.emb");
    fs::remove(path);
    EXPECT_THROW(write_embeddings(ds, path.string()), InvalidArgument);
    EXPECT_FALSE(fs::exists(path));
}

TEST(EmbeddingStore, ValidateCatchesBrokenInvariants) {
    auto ds = oracle::random_dataset(3, 2, 1);
    auto bad = ds;
    bad.labels.pop_back();
    EXPECT_THROW(bad.validate(), InvalidArgument);
    bad = ds;
    bad.labels[0] = std::uint8_t{2};
    EXPECT_THROW(bad.validate(), InvalidArgument);
    bad = ds;
    bad.meta[1].row_id = bad.meta[0].row_id;
    EXPECT_THROW(bad.validate(), InvalidArgument);
    bad = ds;
    bad.meta[2].text.clear();
    EXPECT_THROW(bad.validate(), InvalidArgument);
    bad.meta[2].token_count = 0; // synthetic row without text
    EXPECT_NO_THROW(bad.validate());
}

TEST(EmbeddingStore, BadMagic) {
    auto bytes = encode_embeddings(oracle::random_dataset(2, 3, 1));
    std::memcpy(bytes.data(), "XEM1", 4);
    EXPECT_EQ(decode_code(bytes), FormatErrc::bad_magic);
}

TEST(EmbeddingStore, TruncatedPayload) {
    auto bytes = encode_embeddings(oracle::random_dataset(2, 3, 1));
    ASSERT_EQ(bytes.size(), 24u + 24u);
    bytes.resize(24 + 20);
    EXPECT_EQ(decode_code(bytes), FormatErrc::truncated);
}

TEST(EmbeddingStore, HeaderErrors) {
    const auto good = encode_embeddings(oracle::random_dataset(2, 3, 1));
    auto bytes = good;
    bytes[4] = 2;
    EXPECT_EQ(decode_code(bytes), FormatErrc::unsupported_version);
    bytes = good;
    bytes[20] = 1;
    EXPECT_EQ(decode_code(bytes), FormatErrc::unsupported_dtype);
    bytes = good;
    std::memset(bytes.data() + 16, 0, 4);
    EXPECT_EQ(decode_code(bytes), FormatErrc::bad_header);
    bytes = good;
    bytes.push_back(0);
    EXPECT_EQ(decode_code(bytes), FormatErrc::trailing_data);
    bytes = good;
    bytes.resize(10);
    EXPECT_EQ(decode_code(bytes), FormatErrc::truncated);
    bytes = good;
    std::memset(bytes.data() + 8, 0xff, 8); // n_rows = 2^64 - 1
    EXPECT_EQ(decode_code(bytes), FormatErrc::truncated);
    bytes = good;
    const float inf = std::numeric_limits<float>::infinity();
    std::memcpy(bytes.data() + 28, &inf, 4);
    EXPECT_EQ(decode_code(bytes), FormatErrc::non_finite);
}

TEST(EmbeddingStore, MetaSidecarErrors) {
    const auto ds = oracle::random_dataset(2, 3, 1);
    const auto path = scratch("meta.emb").string();
    write_embeddings(ds, path);
    fs::remove(meta_path(path));
    try {
        read_embeddings(path);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.code(), FormatErrc::meta_missing);
    }

    EmbeddingDataset target;
    target.vectors = ds.vectors;
    auto meta = encode_meta(ds);
    auto first_line = meta.substr(0, meta.find('\n') + 1);
    try {
        decode_meta(first_line, target);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.code(), FormatErrc::meta_mismatch);
    }
    try {
        decode_meta(first_line + "{\"row_id\": 1}\n", target);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.code(), FormatErrc::meta_invalid);
    }
    try {
        decode_meta(first_line + first_line, target);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.code(), FormatErrc::meta_invalid); // duplicate row_id
    }
}

TEST(EmbeddingStore, UnlabeledRowsRoundTripAsNull) {
    auto ds = oracle::random_dataset(4, 2, 9, false);
    const auto path = scratch("unlabeled.emb").string();
    write_embeddings(ds, path);
    auto back = read_embeddings(path);
    EXPECT_FALSE(back.fully_labeled());
    EXPECT_EQ(back, ds);
}

TEST(Split, TenRowsFivePerClass) {
    auto ds = labeled({1, 1, 1, 1, 1, 0, 0, 0, 0, 0});
    auto s = split_dataset(ds, 0.2, 42);
    ASSERT_EQ(s.val.n_rows(), 2u);
    ASSERT_EQ(s.train.n_rows(), 8u);
    int pos = 0;
    for (auto& l : s.val.labels) pos += *l;
    EXPECT_EQ(pos, 1);
}

TEST(Split, SameSeedSamePartition) {
    auto ds = oracle::random_dataset(50, 3, 5);
    auto a = split_dataset(ds, 0.3, 11);
    auto b = split_dataset(ds, 0.3, 11);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.val, b.val);
    auto c = split_dataset(ds, 0.3, 12);
    EXPECT_NE(a.val, c.val);
}

TEST(Split, SkewedClassesStayStratified) {
    std::vector<std::uint8_t> labels(1000, 0);
    for (int i = 0; i < 70; ++i) labels[static_cast<std::size_t>(i * 13 % 1000)] = 1;
    auto ds = labeled(labels);
    auto s = split_dataset(ds, 0.2, 1);
    // recount from scratch
    std::size_t val_pos = 0, train_pos = 0;
    for (auto& l : s.val.labels) val_pos += *l;
    for (auto& l : s.train.labels) train_pos += *l;
    EXPECT_EQ(val_pos + train_pos, 70u);
    EXPECT_EQ(s.val.n_rows() + s.train.n_rows(), 1000u);
    const double expected = 0.07 * static_cast<double>(s.val.n_rows());
    EXPECT_LE(std::abs(static_cast<double>(val_pos) - expected), 1.0);
    // rows are not duplicated across sides
    std::set<std::int64_t> ids;
    for (auto& m : s.val.meta) ids.insert(m.row_id);
    for (auto& m : s.train.meta) EXPECT_FALSE(ids.count(m.row_id));
}

TEST(Split, PerClassCountsArePreservedForRandomInputs) {
    std::mt19937 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng() % 200;
        std::vector<std::uint8_t> labels(n);
        for (auto& l : labels) l = rng() % 2;
        labels[0] = 0;
        labels[1] = 1;
        auto s = split_dataset(labeled(labels), 0.05 + 0.9 * (rng() % 100) / 100.0, trial);
        std::array<std::size_t, 2> total{}, seen{};
        for (auto l : labels) total[l]++;
        for (auto& l : s.train.labels) seen[*l]++;
        for (auto& l : s.val.labels) seen[*l]++;
        EXPECT_EQ(total, seen);
    }
}

TEST(Split, Preconditions) {
    auto ds = labeled({0, 1, 0, 1});
    EXPECT_THROW(split_dataset(ds, 0.0, 1), InvalidArgument);
    EXPECT_THROW(split_dataset(ds, 1.0, 1), InvalidArgument);
    EXPECT_THROW(split_dataset(labeled({1, 1, 1}), 0.5, 1), InvalidArgument);
    EXPECT_THROW(split_dataset(oracle::random_dataset(4, 2, 1, false), 0.5, 1), InvalidArgument);
    auto r = random_split(oracle::random_dataset(10, 2, 1, false), 0.1, 3);
    EXPECT_EQ(r.val.n_rows(), 1u);
}

TEST(ClassWeights, HandComputedValues) {
    std::vector<std::uint8_t> balanced{0, 1, 0, 1};
    auto w = class_weights(balanced);
    EXPECT_DOUBLE_EQ(w.negative, 1.0);
    EXPECT_DOUBLE_EQ(w.positive, 1.0);
    std::vector<std::uint8_t> skewed{1, 0, 0, 0};
    w = class_weights(skewed);
    EXPECT_NEAR(w.negative, 4.0 / 6.0, 1e-12);
    EXPECT_DOUBLE_EQ(w.positive, 2.0);
    std::vector<std::uint8_t> ones{1, 1, 1};
    EXPECT_THROW(class_weights(ones), InvalidArgument);
}

TEST(ClassWeights, WeightedClassMassesAreEqual) {
    std::mt19937 rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::uint8_t> labels(2 + rng() % 500);
        for (auto& l : labels) l = rng() % 2;
        labels[0] = 0;
        labels[1] = 1;
        auto w = class_weights(labels);
        const double n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
        const double n_neg = static_cast<double>(labels.size()) - n_pos;
        const double a = w.positive * n_pos, b = w.negative * n_neg;
        EXPECT_LE(std::abs(a - b), std::numeric_limits<double>::epsilon() * std::max(a, b));
    }
}
