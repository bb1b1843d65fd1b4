#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "selfreg/embedding_store.hpp"
#include "selfreg/optim.hpp"
#include "selfreg/sae.hpp"

namespace selfreg {

struct SaeTrainConfig {
    AdamWConfig optimizer{};
    std::size_t batch_size = 512;
    std::size_t epochs = 5;
    double alpha = 0.1;        // residual-loss weight (fine-tuning only)
    std::size_t dead_k = 20;   // Top-K over dead features for the residual fit
    std::uint64_t seed = 0;
    ReconstructionNorm norm = ReconstructionNorm::squared;
    bool renormalize_columns = false;

    void validate() const {
        optimizer.validate();
        if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
        if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
        if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be non-negative");
    }
};

struct SaeEpochRecord {
    double train_loss = 0.0;             // size-weighted mean of the batch objectives
    std::optional<double> val_loss;      // reconstruction objective on the validation rows
    std::size_t n_dead = 0;              // fine-tuning: dead features at the start of the epoch
    std::optional<double> nmse;          // fine-tuning: nMSE after the epoch
};

struct SaeHistory {
    std::vector<SaeEpochRecord> epochs;
    // Fine-tuning only: state before the first and after the last epoch.
    std::size_t initial_n_dead = 0;
    std::size_t final_n_dead = 0;
    std::optional<double> initial_nmse;
    std::optional<double> final_nmse;
};

template <typename Scalar>
struct SaeTrainResult {
    TopKSae<Scalar> sae;
    SaeHistory history;
};

/// Mean L_SAE over a dataset without building gradients.
template <typename Scalar>
double eval_sae_loss(const TopKSae<Scalar>& sae, const EmbeddingDataset& ds,
                     ReconstructionNorm norm = ReconstructionNorm::squared) {
    if (ds.n_rows() == 0) throw InvalidArgument("eval_sae_loss: empty dataset");
    double total = 0.0;
    detail::RowPass<Scalar> rp;
    std::vector<Scalar> x(ds.dim()), g;
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        std::copy(ds.row(i).begin(), ds.row(i).end(), x.begin());
        rp.run(sae, x);
        double l1 = 0.0;
        for (auto v : rp.a.values) l1 += static_cast<double>(v);
        total += detail::reconstruction_term<Scalar>(rp.err, norm, g) + sae.l1_weight * l1;
    }
    return total / static_cast<double>(ds.n_rows());
}

namespace detail {

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

template <typename Scalar>
void renormalize_columns(TopKSae<Scalar>& sae) {
    for (std::size_t c = 0; c < sae.n_features(); ++c) {
        double sq = 0.0;
        for (std::size_t d = 0; d < sae.dim(); ++d) sq += double(sae.weights(d, c)) * double(sae.weights(d, c));
        if (sq == 0.0) continue;
        const auto inv = static_cast<Scalar>(1.0 / std::sqrt(sq));
        for (std::size_t d = 0; d < sae.dim(); ++d) sae.weights(d, c) *= inv;
    }
}

/// One pass of shuffled mini-batches; `objective(batch)` returns LossAndGrad.
template <typename Scalar, typename Objective>
double run_epoch(TopKSae<Scalar>& sae, AdamWState<Scalar>& opt, const EmbeddingDataset& train,
                 const SaeTrainConfig& cfg, std::size_t epoch, Objective&& objective) {
    const auto order = epoch_order(train.n_rows(), cfg.seed, epoch);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        std::span<const std::size_t> idx(order.data() + start, end - start);
        auto batch = train.template gather<Scalar>(idx);
        auto lg = objective(batch);
        weighted += lg.loss * static_cast<double>(idx.size());
        adamw_step<Scalar>(opt, sae.weights.flat(), lg.grad.flat(), cfg.optimizer);
        if (cfg.renormalize_columns) renormalize_columns(sae);
    }
    return weighted / static_cast<double>(order.size());
}

template <typename Scalar>
void check_train_inputs(const TopKSae<Scalar>& sae, const EmbeddingDataset& train, const EmbeddingDataset& val,
                        const SaeTrainConfig& cfg) {
    cfg.validate();
    sae.validate();
    if (train.n_rows() == 0) throw InvalidArgument("training set is empty");
    if (train.dim() != sae.dim()) throw InvalidArgument("training set dim does not match the SAE");
    if (val.n_rows() > 0 && val.dim() != sae.dim()) throw InvalidArgument("validation set dim does not match the SAE");
}

} // namespace detail

/// Pre-training on L_SAE with a constant learning rate. The last epoch's weights
/// are returned.
template <typename Scalar>
SaeTrainResult<Scalar> pretrain(TopKSae<Scalar> sae, const EmbeddingDataset& train, const EmbeddingDataset& val,
                                const SaeTrainConfig& cfg) {
    detail::check_train_inputs(sae, train, val, cfg);
    AdamWState<Scalar> opt(sae.weights.size());
    SaeHistory history;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        SaeEpochRecord rec;
        rec.train_loss = detail::run_epoch(sae, opt, train, cfg, epoch,
                                           [&](const RowMatrix<Scalar>& b) { return sae_loss(sae, b, cfg.norm); });
        if (val.n_rows() > 0) rec.val_loss = eval_sae_loss(sae, val, cfg.norm);
        history.epochs.push_back(rec);
    }
    return {std::move(sae), std::move(history)};
}

/// Fine-tuning on L_SAE + alpha * L_Residual. The dead mask is recomputed over the
/// full training set at the start of every epoch and frozen within it.
template <typename Scalar>
SaeTrainResult<Scalar> finetune(TopKSae<Scalar> sae, const EmbeddingDataset& train, const EmbeddingDataset& val,
                                const SaeTrainConfig& cfg) {
    detail::check_train_inputs(sae, train, val, cfg);
    const EmbeddingDataset& monitor = val.n_rows() > 0 ? val : train;
    AdamWState<Scalar> opt(sae.weights.size());
    SaeHistory history;
    history.initial_nmse = nmse(sae, monitor);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const DeadMask mask = detect_dead_features(sae, train);
        if (epoch == 0) history.initial_n_dead = mask.n_dead;
        SaeEpochRecord rec;
        rec.n_dead = mask.n_dead;
        rec.train_loss = detail::run_epoch(sae, opt, train, cfg, epoch, [&](const RowMatrix<Scalar>& b) {
            return finetune_loss(sae, mask, b, cfg.alpha, cfg.dead_k, cfg.norm);
        });
        if (val.n_rows() > 0) rec.val_loss = eval_sae_loss(sae, val, cfg.norm);
        rec.nmse = nmse(sae, monitor);
        history.epochs.push_back(rec);
    }
    history.final_n_dead = detect_dead_features(sae, train).n_dead;
    history.final_nmse = history.epochs.back().nmse;
    return {std::move(sae), std::move(history)};
}

} // namespace selfreg
