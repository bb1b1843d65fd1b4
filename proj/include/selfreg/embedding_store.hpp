#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfreg/binary_io.hpp"
#include "selfreg/error.hpp"
#include "selfreg/matrix.hpp"

namespace selfreg {

/// Surface text of the span whose hidden state a dataset row holds.
/// token_count == 0 marks purely synthetic rows without text; those rows are
/// never reported in feature explanations.
struct SpanMeta {
    std::int64_t row_id = 0;
    std::string doc_id;
    std::string text;
    std::uint32_t token_count = 1;

    friend bool operator==(const SpanMeta&, const SpanMeta&) = default;
};

using Label = std::optional<std::uint8_t>;

struct EmbeddingDataset {
    RowMatrix<float> vectors;  // n_rows x dim
    std::vector<Label> labels; // one per row, nullopt when unlabeled
    std::vector<SpanMeta> meta;

    std::size_t n_rows() const noexcept { return vectors.rows(); }
    std::size_t dim() const noexcept { return vectors.cols(); }
    std::span<const float> row(std::size_t i) const noexcept { return vectors.row(i); }

    bool fully_labeled() const {
        return std::all_of(labels.begin(), labels.end(), [](const Label& l) { return l.has_value(); });
    }

    /// Throws InvalidArgument describing the first broken invariant.
    void validate() const {
        if (labels.size() != n_rows())
            throw InvalidArgument("labels length " + std::to_string(labels.size()) +
                                  " != n_rows " + std::to_string(n_rows()));
        if (meta.size() != n_rows())
            throw InvalidArgument("meta length " + std::to_string(meta.size()) + " != n_rows " +
                                  std::to_string(n_rows()));
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            if (!std::isfinite(vectors.flat()[i]))
                throw InvalidArgument("non-finite value in row " + std::to_string(i / dim()));
        }
        for (const auto& l : labels) {
            if (l && *l > 1) throw InvalidArgument("label outside {0,1}");
        }
        std::unordered_set<std::int64_t> ids;
        for (const auto& m : meta) {
            if (m.token_count > 0 && m.text.empty())
                throw InvalidArgument("row " + std::to_string(m.row_id) + ": empty text with token_count > 0");
            if (!ids.insert(m.row_id).second)
                throw InvalidArgument("duplicate row_id " + std::to_string(m.row_id));
        }
    }

    EmbeddingDataset subset(std::span<const std::size_t> rows) const {
        EmbeddingDataset out;
        out.vectors = RowMatrix<float>(rows.size(), dim());
        out.labels.reserve(rows.size());
        out.meta.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto src = row(rows[i]);
            std::copy(src.begin(), src.end(), out.vectors.row(i).begin());
            out.labels.push_back(labels[rows[i]]);
            out.meta.push_back(meta[rows[i]]);
        }
        return out;
    }

    /// Rows converted to the requested scalar type.
    template <typename Scalar>
    RowMatrix<Scalar> gather(std::span<const std::size_t> rows) const {
        RowMatrix<Scalar> out(rows.size(), dim());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto src = row(rows[i]);
            std::copy(src.begin(), src.end(), out.row(i).begin());
        }
        return out;
    }

    friend bool operator==(const EmbeddingDataset&, const EmbeddingDataset&) = default;
};

inline std::string meta_path(const std::string& path) { return path + ".meta.jsonl"; }

namespace detail {
inline constexpr char kEmbMagic[] = "EMB1";
inline constexpr std::uint32_t kEmbVersion = 1;
inline constexpr std::uint32_t kDtypeF32 = 0;
inline constexpr std::size_t kEmbHeaderBytes = 24;
} // namespace detail

inline binary::Bytes encode_embeddings(const EmbeddingDataset& ds) {
    if (ds.dim() > std::numeric_limits<std::uint32_t>::max())
        throw InvalidArgument("dim does not fit in u32");
    binary::Bytes out;
    out.reserve(detail::kEmbHeaderBytes + ds.vectors.size() * 4);
    binary::put_magic(out, detail::kEmbMagic);
    binary::put_u32(out, detail::kEmbVersion);
    binary::put_u64(out, ds.n_rows());
    binary::put_u32(out, static_cast<std::uint32_t>(ds.dim()));
    binary::put_u32(out, detail::kDtypeF32);
    for (float v : ds.vectors.flat()) binary::put_f32(out, v);
    return out;
}

inline std::string encode_meta(const EmbeddingDataset& ds) {
    std::string out;
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        const auto& m = ds.meta[i];
        nlohmann::ordered_json j;
        j["row_id"] = m.row_id;
        j["doc_id"] = m.doc_id;
        j["text"] = m.text;
        j["token_count"] = m.token_count;
        if (ds.labels[i]) j["label"] = static_cast<int>(*ds.labels[i]);
        else j["label"] = nullptr;
        out += j.dump();
        out += '\n';
    }
    return out;
}

/// Writes `path` (EMB1) and `path.meta.jsonl`. The dataset is validated before
/// anything touches the filesystem.
inline void write_embeddings(const EmbeddingDataset& ds, const std::string& path) {
    ds.validate();
    auto payload = encode_embeddings(ds);
    auto meta = encode_meta(ds);
    binary::write_file(path, payload);
    binary::write_text(meta_path(path), meta);
}

inline RowMatrix<float> decode_embeddings(std::span<const std::uint8_t> bytes) {
    binary::Reader in(bytes, "EMB1");
    if (in.remaining() < detail::kEmbHeaderBytes)
        throw FormatError(FormatErrc::truncated,
                          "header needs 24 bytes, file has " + std::to_string(in.remaining()));
    if (in.magic() != detail::kEmbMagic) throw FormatError(FormatErrc::bad_magic, "expected EMB1");
    if (auto v = in.u32(); v != detail::kEmbVersion)
        throw FormatError(FormatErrc::unsupported_version, "version " + std::to_string(v));
    const std::uint64_t n_rows = in.u64();
    const std::uint32_t dim = in.u32();
    if (auto dtype = in.u32(); dtype != detail::kDtypeF32)
        throw FormatError(FormatErrc::unsupported_dtype, "dtype " + std::to_string(dtype));
    if (dim == 0) throw FormatError(FormatErrc::bad_header, "dim is zero");

    const std::uint64_t have = in.remaining();
    // Compare without overflowing n_rows * dim * 4.
    const std::uint64_t max_rows = (std::numeric_limits<std::uint64_t>::max() / 4) / dim;
    if (n_rows > max_rows || n_rows * dim * 4 > have)
        throw FormatError(FormatErrc::truncated, "header claims " + std::to_string(n_rows) + "x" +
                                                     std::to_string(dim) + " f32 values, payload has " +
                                                     std::to_string(have) + " bytes");
    const std::uint64_t need = n_rows * dim * 4;
    if (need < have)
        throw FormatError(FormatErrc::trailing_data,
                          std::to_string(have - need) + " bytes after the declared payload");

    RowMatrix<float> vectors(static_cast<std::size_t>(n_rows), dim);
    for (auto& v : vectors.flat()) {
        v = in.f32();
        if (!std::isfinite(v))
            throw FormatError(FormatErrc::non_finite,
                              "non-finite value at byte " + std::to_string(in.position() - 4));
    }
    return vectors;
}

inline void decode_meta(std::string_view text, EmbeddingDataset& ds) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        if (end > start) lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    if (lines.size() != ds.n_rows())
        throw FormatError(FormatErrc::meta_mismatch, std::to_string(lines.size()) +
                                                         " meta lines for " +
                                                         std::to_string(ds.n_rows()) + " rows");
    ds.labels.clear();
    ds.meta.clear();
    std::unordered_set<std::int64_t> ids;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        SpanMeta m;
        Label label;
        try {
            auto j = nlohmann::json::parse(lines[i]);
            m.row_id = j.at("row_id").get<std::int64_t>();
            m.doc_id = j.at("doc_id").get<std::string>();
            m.text = j.at("text").get<std::string>();
            m.token_count = j.at("token_count").get<std::uint32_t>();
            const auto& l = j.at("label");
            if (!l.is_null()) {
                auto v = l.get<int>();
                if (v != 0 && v != 1) throw FormatError(FormatErrc::meta_invalid, "label must be 0, 1 or null");
                label = static_cast<std::uint8_t>(v);
            }
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(FormatErrc::meta_invalid, "line " + std::to_string(i + 1) + ": " + e.what());
        }
        if (m.token_count > 0 && m.text.empty())
            throw FormatError(FormatErrc::meta_invalid,
                              "line " + std::to_string(i + 1) + ": empty text with token_count > 0");
        if (!ids.insert(m.row_id).second)
            throw FormatError(FormatErrc::meta_invalid, "duplicate row_id " + std::to_string(m.row_id));
        ds.meta.push_back(std::move(m));
        ds.labels.push_back(label);
    }
}

inline EmbeddingDataset read_embeddings(const std::string& path) {
    EmbeddingDataset ds;
    ds.vectors = decode_embeddings(binary::read_file(path));
    std::string meta;
    try {
        meta = binary::read_text(meta_path(path));
    } catch (const FormatError&) {
        throw FormatError(FormatErrc::meta_missing, "cannot read " + meta_path(path));
    }
    decode_meta(meta, ds);
    return ds;
}

struct Split {
    EmbeddingDataset train;
    EmbeddingDataset val;
};

namespace detail {
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
partition(std::vector<std::vector<std::size_t>> groups, double val_fraction, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> train, val;
    for (auto& g : groups) {
        std::shuffle(g.begin(), g.end(), rng);
        const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(g.size())));
        val.insert(val.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(n_val));
        train.insert(train.end(), g.begin() + static_cast<std::ptrdiff_t>(n_val), g.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {std::move(train), std::move(val)};
}

inline void check_fraction(double f) {
    if (!(f > 0.0 && f < 1.0)) throw InvalidArgument("val_fraction must lie in (0,1)");
}
} // namespace detail

/// Stratified hold-out split. Each class contributes round(val_fraction * N_c)
/// rows to the validation side; rows keep their original relative order.
inline Split split_dataset(const EmbeddingDataset& ds, double val_fraction, std::uint64_t seed) {
    detail::check_fraction(val_fraction);
    if (!ds.fully_labeled()) throw InvalidArgument("split_dataset needs a fully labeled dataset");
    std::vector<std::vector<std::size_t>> groups(2);
    for (std::size_t i = 0; i < ds.n_rows(); ++i) groups[*ds.labels[i]].push_back(i);
    if (groups[0].empty() || groups[1].empty())
        throw InvalidArgument("split_dataset needs at least one row of each class");
    auto [train, val] = detail::partition(std::move(groups), val_fraction, seed);
    return {ds.subset(train), ds.subset(val)};
}

/// Plain random hold-out split for unlabeled data (SAE pre-training).
inline Split random_split(const EmbeddingDataset& ds, double val_fraction, std::uint64_t seed) {
    detail::check_fraction(val_fraction);
    std::vector<std::vector<std::size_t>> groups(1);
    for (std::size_t i = 0; i < ds.n_rows(); ++i) groups[0].push_back(i);
    auto [train, val] = detail::partition(std::move(groups), val_fraction, seed);
    return {ds.subset(train), ds.subset(val)};
}

struct ClassWeights {
    double negative = 1.0;
    double positive = 1.0;

    double operator()(std::uint8_t label) const noexcept { return label ? positive : negative; }
};

/// Inverse-frequency weights N / (2 * N_c).
inline ClassWeights class_weights(std::span<const std::uint8_t> labels) {
    std::size_t pos = 0;
    for (auto l : labels) {
        if (l > 1) throw InvalidArgument("label outside {0,1}");
        pos += l;
    }
    const std::size_t n = labels.size();
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) throw InvalidArgument("class_weights needs both classes present");
    const auto nd = static_cast<double>(n);
    return {nd / (2.0 * static_cast<double>(neg)), nd / (2.0 * static_cast<double>(pos))};
}

inline std::vector<std::uint8_t> require_labels(const EmbeddingDataset& ds) {
    std::vector<std::uint8_t> out;
    out.reserve(ds.n_rows());
    for (const auto& l : ds.labels) {
        if (!l) throw InvalidArgument("dataset has unlabeled rows");
        out.push_back(*l);
    }
    return out;
}

} // namespace selfreg
