#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfreg/binary_io.hpp"
#include "selfreg/embedding_store.hpp"
#include "selfreg/sae.hpp"

namespace selfreg {

struct ExplainedSpan {
    std::int64_t row_id = 0;
    std::string doc_id;
    std::string text;
    double activation = 0.0;

    friend bool operator==(const ExplainedSpan&, const ExplainedSpan&) = default;
};

/// The rows that most strongly activate one feature, strongest first.
struct FeatureExplanation {
    std::uint32_t feature_id = 0;
    std::vector<ExplainedSpan> spans;
    std::size_t m_requested = 0;
    std::size_t n_active_rows = 0; // rows with text on which the feature survives Top-K

    friend bool operator==(const FeatureExplanation&, const FeatureExplanation&) = default;
};

namespace detail {

struct ScoredRow {
    double activation;
    std::int64_t row_id;
    std::size_t row;
};

/// Strict ranking: higher activation first, then lower row_id.
inline bool ranks_before(const ScoredRow& a, const ScoredRow& b) {
    return a.activation > b.activation || (a.activation == b.activation && a.row_id < b.row_id);
}

/// Keeps the m best rows seen so far. The heap top is the current worst kept row.
class TopRows {
public:
    explicit TopRows(std::size_t m) : m_(m) {}

    void offer(const ScoredRow& r) {
        ++n_seen_;
        if (heap_.size() < m_) {
            heap_.push_back(r);
            std::push_heap(heap_.begin(), heap_.end(), ranks_before);
        } else if (ranks_before(r, heap_.front())) {
            std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
            heap_.back() = r;
            std::push_heap(heap_.begin(), heap_.end(), ranks_before);
        }
    }

    std::size_t n_seen() const noexcept { return n_seen_; }

    std::vector<ScoredRow> sorted() const {
        auto out = heap_;
        std::sort(out.begin(), out.end(), ranks_before);
        return out;
    }

private:
    std::size_t m_;
    std::size_t n_seen_ = 0;
    std::vector<ScoredRow> heap_;
};

inline FeatureExplanation build_explanation(std::uint32_t feature, const TopRows& top, const EmbeddingDataset& ds,
                                            std::size_t m) {
    FeatureExplanation e;
    e.feature_id = feature;
    e.m_requested = m;
    e.n_active_rows = top.n_seen();
    for (const auto& r : top.sorted()) {
        const auto& meta = ds.meta[r.row];
        e.spans.push_back({meta.row_id, meta.doc_id, meta.text, r.activation});
    }
    return e;
}

template <typename Scalar>
void check_explain_inputs(const TopKSae<Scalar>& sae, const EmbeddingDataset& ds, std::size_t m) {
    if (m < 1) throw InvalidArgument("m must be >= 1");
    if (ds.meta.size() != ds.n_rows()) throw InvalidArgument("span metadata missing");
    if (ds.n_rows() > 0 && ds.dim() != sae.dim()) throw InvalidArgument("dataset dim does not match the SAE");
}

} // namespace detail

/// The m rows with the highest post-Top-K activation on `feature_id`. Rows where
/// the feature is outside the Top-K set score zero and are never reported, nor
/// are rows without text (token_count == 0). Identical spans are kept.
template <typename Scalar>
FeatureExplanation top_spans(const TopKSae<Scalar>& sae, const EmbeddingDataset& ds, std::uint32_t feature_id,
                             std::size_t m) {
    if (feature_id >= sae.n_features())
        throw InvalidArgument("feature_id " + std::to_string(feature_id) + " out of range");
    detail::check_explain_inputs(sae, ds, m);
    detail::TopRows top(m);
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        if (ds.meta[i].token_count == 0) continue;
        const double v = static_cast<double>(encode(sae, ds.row(i)).at(feature_id));
        if (v > 0.0) top.offer({v, ds.meta[i].row_id, i});
    }
    return detail::build_explanation(feature_id, top, ds, m);
}

/// One explanation per feature that has at least one reportable span, in
/// feature order, from a single pass over the dataset.
template <typename Scalar>
std::vector<FeatureExplanation> explain_all(const TopKSae<Scalar>& sae, const EmbeddingDataset& ds, std::size_t m) {
    detail::check_explain_inputs(sae, ds, m);
    std::vector<detail::TopRows> tops(sae.n_features(), detail::TopRows(m));
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        if (ds.meta[i].token_count == 0) continue;
        const auto a = encode(sae, ds.row(i));
        for (std::size_t j = 0; j < a.nnz(); ++j)
            tops[a.indices[j]].offer({static_cast<double>(a.values[j]), ds.meta[i].row_id, i});
    }
    std::vector<FeatureExplanation> out;
    for (std::uint32_t c = 0; c < tops.size(); ++c) {
        if (tops[c].n_seen() == 0) continue;
        out.push_back(detail::build_explanation(c, tops[c], ds, m));
    }
    return out;
}

// ---------------------------------------------------------------------------
// features.jsonl

inline nlohmann::ordered_json to_json(const FeatureExplanation& e) {
    nlohmann::ordered_json j;
    j["feature_id"] = e.feature_id;
    auto spans = nlohmann::ordered_json::array();
    for (const auto& s : e.spans) {
        nlohmann::ordered_json sj;
        sj["row_id"] = s.row_id;
        sj["doc_id"] = s.doc_id;
        sj["text"] = s.text;
        sj["activation"] = s.activation;
        spans.push_back(std::move(sj));
    }
    j["spans"] = std::move(spans);
    j["n_active_rows"] = e.n_active_rows;
    return j;
}

inline std::string encode_features(const std::vector<FeatureExplanation>& explanations) {
    std::string out;
    for (const auto& e : explanations) {
        out += to_json(e).dump();
        out += '\n';
    }
    return out;
}

inline void write_features(const std::vector<FeatureExplanation>& explanations, const std::string& path) {
    binary::write_text(path, encode_features(explanations));
}

inline std::vector<FeatureExplanation> decode_features(std::string_view text) {
    std::vector<FeatureExplanation> out;
    std::size_t start = 0, line_no = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        auto line = text.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            FeatureExplanation e;
            e.feature_id = j.at("feature_id").get<std::uint32_t>();
            e.n_active_rows = j.at("n_active_rows").get<std::size_t>();
            for (const auto& s : j.at("spans")) {
                e.spans.push_back({s.at("row_id").get<std::int64_t>(), s.at("doc_id").get<std::string>(),
                                   s.at("text").get<std::string>(), s.at("activation").get<double>()});
            }
            e.m_requested = e.spans.size();
            out.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError(FormatErrc::meta_invalid, "features line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return out;
}

inline std::vector<FeatureExplanation> read_features(const std::string& path) {
    return decode_features(binary::read_text(path));
}

} // namespace selfreg
