#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "selfreg/binary_io.hpp"
#include "selfreg/digest.hpp"
#include "selfreg/embedding_store.hpp"
#include "selfreg/error.hpp"
#include "selfreg/matrix.hpp"

namespace selfreg {

enum class ReconstructionNorm {
    squared,   // ||x - h(x)||^2 (default)
    euclidean, // ||x - h(x)||
};

/// Tied-weight Top-K sparse autoencoder, h(x) = TopK(ReLU(x W)) W^T.
/// `weights` is D x C: row d holds input dimension d, column c is feature c.
template <typename Scalar>
struct TopKSae {
    RowMatrix<Scalar> weights;
    std::size_t k_active = 1;
    double l1_weight = 0.0;

    std::size_t dim() const noexcept { return weights.rows(); }
    std::size_t n_features() const noexcept { return weights.cols(); }

    void validate() const {
        if (dim() == 0) throw InvalidArgument("SAE dim must be >= 1");
        if (n_features() < dim())
            throw InvalidArgument("SAE needs n_features >= dim (" + std::to_string(n_features()) + " < " +
                                  std::to_string(dim()) + ")");
        if (k_active < 1 || k_active > n_features())
            throw InvalidArgument("k_active must lie in [1, n_features]");
        if (!(l1_weight >= 0.0)) throw InvalidArgument("l1_weight must be non-negative");
        if (!all_finite(weights.flat())) throw InvalidArgument("SAE weights contain non-finite values");
    }

    /// Feature vector c (column c of W) copied out.
    std::vector<Scalar> feature(std::size_t c) const {
        std::vector<Scalar> v(dim());
        for (std::size_t d = 0; d < dim(); ++d) v[d] = weights(d, c);
        return v;
    }

    template <typename To>
    TopKSae<To> cast() const {
        return {weights.template cast<To>(), k_active, l1_weight};
    }

    friend bool operator==(const TopKSae&, const TopKSae&) = default;
};

/// Post-Top-K activations: indices strictly increasing, values > 0.
template <typename Scalar>
struct SparseActivation {
    std::vector<std::uint32_t> indices;
    std::vector<Scalar> values;
    std::size_t n_features = 0;

    std::size_t nnz() const noexcept { return indices.size(); }

    /// Activation of feature c, zero when c is not in the support.
    Scalar at(std::size_t c) const {
        auto it = std::lower_bound(indices.begin(), indices.end(), c);
        if (it == indices.end() || *it != c) return Scalar(0);
        return values[static_cast<std::size_t>(it - indices.begin())];
    }
};

/// Features that never survive Top-K on a dataset.
struct DeadMask {
    std::vector<bool> is_dead;
    std::size_t n_dead = 0;

    static DeadMask none(std::size_t n_features) { return {std::vector<bool>(n_features, false), 0}; }

    std::vector<std::uint32_t> dead_ids() const {
        std::vector<std::uint32_t> out;
        for (std::size_t c = 0; c < is_dead.size(); ++c)
            if (is_dead[c]) out.push_back(static_cast<std::uint32_t>(c));
        return out;
    }
};

template <typename Scalar>
TopKSae<Scalar> init_kaiming(std::size_t dim, std::size_t n_features, std::size_t k_active,
                             std::uint64_t seed, double l1_weight = 0.0) {
    if (dim == 0) throw InvalidArgument("init_kaiming: dim must be >= 1");
    if (n_features < dim)
        throw InvalidArgument("init_kaiming: n_features (" + std::to_string(n_features) +
                              ") must be >= dim (" + std::to_string(dim) + ")");
    TopKSae<Scalar> sae{RowMatrix<Scalar>(dim, n_features), k_active, l1_weight};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(dim)));
    for (auto& w : sae.weights.flat()) w = static_cast<Scalar>(normal(rng));
    sae.validate();
    return sae;
}

namespace detail {

/// Pre-activations p = x W for every feature.
template <typename Scalar, typename In>
void preactivations(const TopKSae<Scalar>& sae, std::span<const In> x, std::vector<Scalar>& p) {
    const std::size_t C = sae.n_features();
    p.assign(C, Scalar(0));
    for (std::size_t d = 0; d < sae.dim(); ++d) {
        const Scalar xd = static_cast<Scalar>(x[d]);
        if (xd == Scalar(0)) continue;
        const Scalar* w = sae.weights.row(d).data();
        for (std::size_t c = 0; c < C; ++c) p[c] += xd * w[c];
    }
}

/// Top-k over ReLU(p) restricted to `allowed` (all features when empty).
/// Larger value first, ties toward the lower index; the result is index-sorted.
template <typename Scalar>
SparseActivation<Scalar> select_top_k(std::span<const Scalar> p, std::size_t k,
                                      const std::vector<bool>* allowed = nullptr) {
    struct Cand {
        Scalar v;
        std::uint32_t i;
    };
    std::vector<Cand> cands;
    for (std::size_t c = 0; c < p.size(); ++c) {
        if (p[c] > Scalar(0) && (!allowed || (*allowed)[c])) cands.push_back({p[c], static_cast<std::uint32_t>(c)});
    }
    auto better = [](const Cand& a, const Cand& b) { return a.v > b.v || (a.v == b.v && a.i < b.i); };
    if (cands.size() > k) {
        std::nth_element(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(), better);
        cands.resize(k);
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.i < b.i; });
    SparseActivation<Scalar> a;
    a.n_features = p.size();
    a.indices.reserve(cands.size());
    a.values.reserve(cands.size());
    for (const auto& c : cands) {
        a.indices.push_back(c.i);
        a.values.push_back(c.v);
    }
    return a;
}

template <typename Scalar, typename In>
void check_dim(const TopKSae<Scalar>& sae, std::span<const In> x) {
    if (x.size() != sae.dim())
        throw InvalidArgument("input has dimension " + std::to_string(x.size()) + ", SAE expects " +
                              std::to_string(sae.dim()));
}

} // namespace detail

template <typename Scalar, typename In>
SparseActivation<Scalar> encode(const TopKSae<Scalar>& sae, std::span<const In> x) {
    detail::check_dim(sae, x);
    std::vector<Scalar> p;
    detail::preactivations(sae, x, p);
    return detail::select_top_k<Scalar>(p, sae.k_active);
}

template <typename Scalar>
std::vector<Scalar> decode(const TopKSae<Scalar>& sae, const SparseActivation<Scalar>& a) {
    if (a.n_features != sae.n_features())
        throw InvalidArgument("activation has " + std::to_string(a.n_features) + " features, SAE has " +
                              std::to_string(sae.n_features()));
    std::vector<Scalar> out(sae.dim(), Scalar(0));
    for (std::size_t j = 0; j < a.nnz(); ++j) {
        const std::size_t c = a.indices[j];
        if (c >= sae.n_features()) throw InvalidArgument("activation index out of range");
        for (std::size_t d = 0; d < sae.dim(); ++d) out[d] += a.values[j] * sae.weights(d, c);
    }
    return out;
}

/// h(x) = decode(encode(x)).
template <typename Scalar, typename In>
std::vector<Scalar> reconstruct(const TopKSae<Scalar>& sae, std::span<const In> x) {
    return decode(sae, encode(sae, x));
}

template <typename Scalar>
struct LossAndGrad {
    double loss = 0.0;
    RowMatrix<Scalar> grad; // same shape as the SAE weights
};

namespace detail {

/// Reconstruction error value and dL/dx_hat for error vector e = x_hat - target.
template <typename Scalar>
double reconstruction_term(std::span<const Scalar> e, ReconstructionNorm norm, std::vector<Scalar>& g) {
    double sq = 0.0;
    for (auto v : e) sq += static_cast<double>(v) * static_cast<double>(v);
    g.resize(e.size());
    if (norm == ReconstructionNorm::squared) {
        for (std::size_t i = 0; i < e.size(); ++i) g[i] = Scalar(2) * e[i];
        return sq;
    }
    const double len = std::sqrt(sq);
    for (std::size_t i = 0; i < e.size(); ++i)
        g[i] = len > 0.0 ? static_cast<Scalar>(static_cast<double>(e[i]) / len) : Scalar(0);
    return len;
}

/// Accumulates the gradient of a reconstruction through the tied weights for
/// features in `a`:  dL/dW[d,c] += g_d * a_c + x_d * (g . W[:,c] + l1).
template <typename Scalar>
void accumulate_tied_grad(const TopKSae<Scalar>& sae, std::span<const Scalar> x,
                          const SparseActivation<Scalar>& a, std::span<const Scalar> g, double l1,
                          Scalar scale, RowMatrix<Scalar>& grad) {
    const std::size_t D = sae.dim();
    for (std::size_t j = 0; j < a.nnz(); ++j) {
        const std::size_t c = a.indices[j];
        Scalar gw = Scalar(0);
        for (std::size_t d = 0; d < D; ++d) gw += g[d] * sae.weights(d, c);
        const Scalar through_code = (gw + static_cast<Scalar>(l1)) * scale;
        const Scalar through_decoder = a.values[j] * scale;
        for (std::size_t d = 0; d < D; ++d) grad(d, c) += g[d] * through_decoder + x[d] * through_code;
    }
}

template <typename Scalar>
void check_batch(const TopKSae<Scalar>& sae, const RowMatrix<Scalar>& batch) {
    if (batch.rows() == 0) throw InvalidArgument("empty batch");
    if (batch.cols() != sae.dim())
        throw InvalidArgument("batch has dimension " + std::to_string(batch.cols()) + ", SAE expects " +
                              std::to_string(sae.dim()));
}

/// Per-row work shared by the pre-training and fine-tuning objectives.
template <typename Scalar>
struct RowPass {
    std::vector<Scalar> pre;   // x W
    SparseActivation<Scalar> a;
    std::vector<Scalar> x_hat;
    std::vector<Scalar> err;   // x_hat - x
    std::vector<Scalar> g;

    void run(const TopKSae<Scalar>& sae, std::span<const Scalar> x) {
        preactivations(sae, x, pre);
        a = select_top_k<Scalar>(pre, sae.k_active);
        x_hat = decode(sae, a);
        err.resize(x.size());
        for (std::size_t d = 0; d < x.size(); ++d) err[d] = x_hat[d] - x[d];
    }
};

template <typename Scalar>
double add_sae_row(const TopKSae<Scalar>& sae, std::span<const Scalar> x, RowPass<Scalar>& rp,
                   ReconstructionNorm norm, Scalar scale, RowMatrix<Scalar>& grad) {
    double l1 = 0.0;
    for (auto v : rp.a.values) l1 += static_cast<double>(v);
    const double rec = reconstruction_term<Scalar>(rp.err, norm, rp.g);
    accumulate_tied_grad(sae, x, rp.a, std::span<const Scalar>(rp.g), sae.l1_weight, scale, grad);
    return rec + sae.l1_weight * l1;
}

/// Residual term for one row. `rp` must already hold the normal pass for x.
template <typename Scalar>
double add_residual_row(const TopKSae<Scalar>& sae, const DeadMask& mask, std::size_t dead_k,
                        std::span<const Scalar> x, const RowPass<Scalar>& rp, ReconstructionNorm norm,
                        Scalar scale, RowMatrix<Scalar>& grad, std::vector<Scalar>& g) {
    // r = x - h(x) is a constant target; the dead features fit it on their own.
    auto dead = select_top_k<Scalar>(rp.pre, dead_k, &mask.is_dead);
    auto fit = decode(sae, dead);
    std::vector<Scalar> e(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) e[d] = fit[d] + rp.err[d]; // fit - r, with r = -err
    const double rec = reconstruction_term<Scalar>(e, norm, g);
    accumulate_tied_grad(sae, x, dead, std::span<const Scalar>(g), 0.0, scale, grad);
    return rec;
}

} // namespace detail

/// Mean over the batch of ||x - h(x)||^2 + l1 * ||a||_1, with the gradient taken
/// through the selected Top-K support only.
template <typename Scalar>
LossAndGrad<Scalar> sae_loss(const TopKSae<Scalar>& sae, const RowMatrix<Scalar>& batch,
                             ReconstructionNorm norm = ReconstructionNorm::squared) {
    detail::check_batch(sae, batch);
    LossAndGrad<Scalar> out{0.0, RowMatrix<Scalar>(sae.dim(), sae.n_features())};
    const Scalar scale = Scalar(1) / static_cast<Scalar>(batch.rows());
    detail::RowPass<Scalar> rp;
    for (std::size_t i = 0; i < batch.rows(); ++i) {
        rp.run(sae, batch.row(i));
        out.loss += detail::add_sae_row(sae, batch.row(i), rp, norm, scale, out.grad);
    }
    out.loss /= static_cast<double>(batch.rows());
    return out;
}

/// Mean over the batch of ||r - a~ W~^T||^2, where r = x - h(x) carries no
/// gradient and a~ keeps the `dead_k` largest ReLU activations among dead
/// features. The gradient is zero outside the dead columns.
template <typename Scalar>
LossAndGrad<Scalar> residual_loss(const TopKSae<Scalar>& sae, const DeadMask& mask,
                                  const RowMatrix<Scalar>& batch, std::size_t dead_k,
                                  ReconstructionNorm norm = ReconstructionNorm::squared) {
    detail::check_batch(sae, batch);
    if (mask.is_dead.size() != sae.n_features())
        throw InvalidArgument("dead mask length " + std::to_string(mask.is_dead.size()) + " != n_features " +
                              std::to_string(sae.n_features()));
    LossAndGrad<Scalar> out{0.0, RowMatrix<Scalar>(sae.dim(), sae.n_features())};
    if (mask.n_dead == 0 || dead_k == 0) return out;
    const Scalar scale = Scalar(1) / static_cast<Scalar>(batch.rows());
    detail::RowPass<Scalar> rp;
    std::vector<Scalar> g;
    for (std::size_t i = 0; i < batch.rows(); ++i) {
        rp.run(sae, batch.row(i));
        out.loss += detail::add_residual_row(sae, mask, dead_k, batch.row(i), rp, norm, scale, out.grad, g);
    }
    out.loss /= static_cast<double>(batch.rows());
    return out;
}

/// L_SAE + alpha * L_Residual in one pass over the batch.
template <typename Scalar>
LossAndGrad<Scalar> finetune_loss(const TopKSae<Scalar>& sae, const DeadMask& mask,
                                  const RowMatrix<Scalar>& batch, double alpha, std::size_t dead_k,
                                  ReconstructionNorm norm = ReconstructionNorm::squared) {
    detail::check_batch(sae, batch);
    if (mask.is_dead.size() != sae.n_features()) throw InvalidArgument("dead mask length != n_features");
    LossAndGrad<Scalar> out{0.0, RowMatrix<Scalar>(sae.dim(), sae.n_features())};
    const Scalar scale = Scalar(1) / static_cast<Scalar>(batch.rows());
    const bool with_residual = alpha != 0.0 && mask.n_dead > 0 && dead_k > 0;
    const Scalar res_scale = scale * static_cast<Scalar>(alpha);
    detail::RowPass<Scalar> rp;
    std::vector<Scalar> g;
    for (std::size_t i = 0; i < batch.rows(); ++i) {
        rp.run(sae, batch.row(i));
        out.loss += detail::add_sae_row(sae, batch.row(i), rp, norm, scale, out.grad);
        if (with_residual)
            out.loss += alpha * detail::add_residual_row(sae, mask, dead_k, batch.row(i), rp, norm, res_scale,
                                                         out.grad, g);
    }
    out.loss /= static_cast<double>(batch.rows());
    return out;
}

/// Marks every feature whose post-Top-K activation is zero on all rows.
template <typename Scalar>
DeadMask detect_dead_features(const TopKSae<Scalar>& sae, const EmbeddingDataset& ds) {
    if (ds.n_rows() == 0) throw InvalidArgument("detect_dead_features: empty dataset");
    detail::check_dim(sae, ds.row(0));
    std::vector<bool> alive(sae.n_features(), false);
    std::vector<Scalar> p;
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        detail::preactivations(sae, ds.row(i), p);
        auto a = detail::select_top_k<Scalar>(p, sae.k_active);
        for (auto c : a.indices) alive[c] = true;
    }
    DeadMask mask{std::vector<bool>(sae.n_features()), 0};
    for (std::size_t c = 0; c < alive.size(); ++c) {
        mask.is_dead[c] = !alive[c];
        mask.n_dead += alive[c] ? 0 : 1;
    }
    return mask;
}

/// sum ||x - h(x)||^2 / sum ||x - mean||^2 over the dataset.
template <typename Scalar>
double nmse(const TopKSae<Scalar>& sae, const EmbeddingDataset& ds) {
    if (ds.n_rows() == 0) throw InvalidArgument("nmse: empty dataset");
    detail::check_dim(sae, ds.row(0));
    const std::size_t D = ds.dim();
    std::vector<double> mean(D, 0.0);
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        for (std::size_t d = 0; d < D; ++d) mean[d] += ds.row(i)[d];
    for (auto& m : mean) m /= static_cast<double>(ds.n_rows());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        auto x = ds.row(i);
        auto xh = reconstruct(sae, x);
        for (std::size_t d = 0; d < D; ++d) {
            const double r = static_cast<double>(x[d]) - static_cast<double>(xh[d]);
            const double c = static_cast<double>(x[d]) - mean[d];
            num += r * r;
            den += c * c;
        }
    }
    if (den == 0.0) throw InvalidArgument("nmse: dataset has zero variance");
    return num / den;
}

// ---------------------------------------------------------------------------
// SAE1 file format

inline binary::Bytes encode_sae(const TopKSae<float>& sae) {
    sae.validate();
    binary::Bytes out;
    out.reserve(24 + sae.weights.size() * 4);
    binary::put_magic(out, "SAE1");
    binary::put_u32(out, 1);
    binary::put_u32(out, static_cast<std::uint32_t>(sae.dim()));
    binary::put_u32(out, static_cast<std::uint32_t>(sae.n_features()));
    binary::put_u32(out, static_cast<std::uint32_t>(sae.k_active));
    binary::put_f32(out, static_cast<float>(sae.l1_weight));
    for (float w : sae.weights.flat()) binary::put_f32(out, w);
    return out;
}

inline TopKSae<float> decode_sae(std::span<const std::uint8_t> bytes) {
    binary::Reader in(bytes, "SAE1");
    if (in.remaining() < 24) throw FormatError(FormatErrc::truncated, "SAE1 header needs 24 bytes");
    if (in.magic() != "SAE1") throw FormatError(FormatErrc::bad_magic, "expected SAE1");
    if (auto v = in.u32(); v != 1) throw FormatError(FormatErrc::unsupported_version, "version " + std::to_string(v));
    const std::uint32_t dim = in.u32();
    const std::uint32_t n_features = in.u32();
    const std::uint32_t k = in.u32();
    const float l1 = in.f32();
    if (dim == 0 || n_features < dim || k == 0 || k > n_features || !(l1 >= 0.0f) || !std::isfinite(l1))
        throw FormatError(FormatErrc::bad_header, "inconsistent SAE1 header");
    const std::uint64_t need = static_cast<std::uint64_t>(dim) * n_features * 4;
    if (need > in.remaining()) throw FormatError(FormatErrc::truncated, "SAE1 weights truncated");
    if (need < in.remaining()) throw FormatError(FormatErrc::trailing_data, "bytes after SAE1 weights");
    TopKSae<float> sae{RowMatrix<float>(dim, n_features), k, static_cast<double>(l1)};
    for (auto& w : sae.weights.flat()) {
        w = in.f32();
        if (!std::isfinite(w)) throw FormatError(FormatErrc::non_finite, "non-finite SAE weight");
    }
    return sae;
}

inline void write_sae(const TopKSae<float>& sae, const std::string& path) {
    binary::write_file(path, encode_sae(sae));
}

inline TopKSae<float> read_sae(const std::string& path) { return decode_sae(binary::read_file(path)); }

/// Content hash binding downstream artifacts to an exact SAE.
inline Digest sae_digest(const TopKSae<float>& sae) { return sha256(encode_sae(sae)); }

} // namespace selfreg
