#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selfreg/binary_io.hpp"
#include "selfreg/digest.hpp"
#include "selfreg/embedding_store.hpp"
#include "selfreg/error.hpp"
#include "selfreg/judge.hpp"
#include "selfreg/matrix.hpp"
#include "selfreg/optim.hpp"
#include "selfreg/sae.hpp"
#include "selfreg/sae_train.hpp"

namespace selfreg {

/// Logistic classifier f(x) = sigmoid(theta . x), trained against the
/// unintended feature vectors W- of one specific SAE.
struct LogisticClassifier {
    std::vector<double> theta;
    std::optional<double> bias; // present only when trained with an intercept
    double beta = 0.0;
    std::vector<std::uint32_t> unintended_ids;
    Digest sae_digest{};

    std::size_t dim() const noexcept { return theta.size(); }

    friend bool operator==(const LogisticClassifier&, const LogisticClassifier&) = default;
};

/// W- as a D x |C-| matrix: the SAE feature vectors of the unintended features.
template <typename Scalar>
RowMatrix<double> unintended_columns(const TopKSae<Scalar>& sae, std::span<const std::uint32_t> ids) {
    RowMatrix<double> w(sae.dim(), ids.size());
    for (std::size_t j = 0; j < ids.size(); ++j) {
        if (ids[j] >= sae.n_features())
            throw InvalidArgument("unintended feature id " + std::to_string(ids[j]) + " out of range");
        for (std::size_t d = 0; d < sae.dim(); ++d) w(d, j) = static_cast<double>(sae.weights(d, ids[j]));
    }
    return w;
}

/// x+ = x - ReLU(x W-) W-^T. Every activation is taken from the original x.
/// Columns with a non-positive activation are skipped, so a row that activates
/// none of them comes back bit-identical.
template <typename Scalar>
std::vector<Scalar> purify(std::span<const Scalar> x, const RowMatrix<double>& w_minus) {
    if (w_minus.cols() > 0 && w_minus.rows() != x.size())
        throw InvalidArgument("purify: input dim " + std::to_string(x.size()) + " != W- rows " +
                              std::to_string(w_minus.rows()));
    std::vector<Scalar> out(x.begin(), x.end());
    const std::size_t D = x.size();
    for (std::size_t j = 0; j < w_minus.cols(); ++j) {
        double a = 0.0;
        for (std::size_t d = 0; d < D; ++d) a += static_cast<double>(x[d]) * w_minus(d, j);
        if (!(a > 0.0)) continue;
        for (std::size_t d = 0; d < D; ++d) out[d] -= static_cast<Scalar>(a * w_minus(d, j));
    }
    return out;
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double decision_value(const LogisticClassifier& clf, std::span<const double> x_plus) {
    if (x_plus.size() != clf.dim())
        throw InvalidArgument("predict: input dim " + std::to_string(x_plus.size()) + " != " + std::to_string(clf.dim()));
    double z = 0.0;
    for (std::size_t d = 0; d < x_plus.size(); ++d) z += clf.theta[d] * x_plus[d];
    return z + clf.bias.value_or(0.0);
}

/// P(y = 1 | x+).
inline double predict(const LogisticClassifier& clf, std::span<const double> x_plus) {
    return sigmoid(decision_value(clf, x_plus));
}

/// log P(y = 1 | x+); finite even where the probability underflows.
inline double log_predict(const LogisticClassifier& clf, std::span<const double> x_plus) {
    return -softplus(-decision_value(clf, x_plus));
}

/// ||theta . W-||_1.
inline double penalty_l1(std::span<const double> theta, const RowMatrix<double>& w_minus) {
    double total = 0.0;
    for (std::size_t j = 0; j < w_minus.cols(); ++j) {
        double a = 0.0;
        for (std::size_t d = 0; d < w_minus.rows(); ++d) a += theta[d] * w_minus(d, j);
        total += std::abs(a);
    }
    return total;
}

struct ClfLossAndGrad {
    double loss = 0.0;
    double penalty = 0.0;      // beta * ||theta . W-||_1, included in loss
    std::vector<double> grad;  // d/dtheta, then d/dbias when an intercept is used
};

namespace detail {
inline int sign0(double v) { return (v > 0.0) - (v < 0.0); }
} // namespace detail

/// Class-weighted mean cross-entropy on already purified rows plus the weight
/// activation penalty. `params` holds theta, optionally followed by the bias.
inline ClfLossAndGrad penalized_cross_entropy(std::span<const double> params, bool intercept,
                                              const RowMatrix<double>& x_plus, std::span<const std::uint8_t> labels,
                                              const RowMatrix<double>& w_minus, const ClassWeights& weights,
                                              double beta) {
    const std::size_t D = x_plus.cols();
    if (params.size() != D + (intercept ? 1 : 0)) throw InvalidArgument("parameter size does not match the input dim");
    if (labels.size() != x_plus.rows()) throw InvalidArgument("labels length does not match the batch");
    if (x_plus.rows() == 0) throw InvalidArgument("empty batch");
    if (w_minus.cols() > 0 && w_minus.rows() != D) throw InvalidArgument("W- rows do not match the input dim");
    ClfLossAndGrad out;
    out.grad.assign(params.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(x_plus.rows());
    for (std::size_t n = 0; n < x_plus.rows(); ++n) {
        auto x = x_plus.row(n);
        double z = intercept ? params[D] : 0.0;
        for (std::size_t d = 0; d < D; ++d) z += params[d] * x[d];
        const std::uint8_t y = labels[n];
        if (y > 1) throw InvalidArgument("label outside {0,1}");
        const double w = weights(y);
        out.loss += w * (softplus(z) - (y ? z : 0.0)) * inv_n;
        const double dz = w * (sigmoid(z) - static_cast<double>(y)) * inv_n;
        for (std::size_t d = 0; d < D; ++d) out.grad[d] += dz * x[d];
        if (intercept) out.grad[D] += dz;
    }
    for (std::size_t j = 0; j < w_minus.cols(); ++j) {
        double a = 0.0;
        for (std::size_t d = 0; d < D; ++d) a += params[d] * w_minus(d, j);
        out.penalty += beta * std::abs(a);
        const double s = beta * detail::sign0(a);
        if (s == 0.0) continue;
        for (std::size_t d = 0; d < D; ++d) out.grad[d] += s * w_minus(d, j);
    }
    out.loss += out.penalty;
    return out;
}

inline RowMatrix<double> purify_rows(const RowMatrix<double>& x, const RowMatrix<double>& w_minus) {
    RowMatrix<double> out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto p = purify<double>(x.row(i), w_minus);
        std::copy(p.begin(), p.end(), out.row(i).begin());
    }
    return out;
}

/// Full objective on raw rows: purification, weighted cross-entropy, penalty.
inline ClfLossAndGrad clf_loss(const LogisticClassifier& clf, const RowMatrix<double>& batch,
                               std::span<const std::uint8_t> labels, const RowMatrix<double>& w_minus,
                               const ClassWeights& weights) {
    std::vector<double> params = clf.theta;
    if (clf.bias) params.push_back(*clf.bias);
    return penalized_cross_entropy(params, clf.bias.has_value(), purify_rows(batch, w_minus), labels, w_minus,
                                   weights, clf.beta);
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
    double accuracy = 0.0;
    double f1_positive = 0.0;
    std::size_t n_eval = 0;
    double penalty_l1 = 0.0; // ||theta . W-||_1 (without beta)

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }

    double accuracy() const {
        return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0;
    }

    /// F1 of the positive class; 0 when precision + recall is 0.
    double f1_positive() const {
        const double denom = static_cast<double>(2 * tp + fp + fn);
        return tp == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
    }
};

inline Confusion confusion(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> actual) {
    if (predicted.size() != actual.size()) throw InvalidArgument("prediction/label length mismatch");
    Confusion c;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i]) (actual[i] ? c.tp : c.fp) += 1;
        else (actual[i] ? c.fn : c.tn) += 1;
    }
    return c;
}

/// Evaluates on purified rows (`x_plus`). Positive prediction when p >= threshold.
inline EvalReport evaluate_purified(const LogisticClassifier& clf, const RowMatrix<double>& x_plus,
                                    std::span<const std::uint8_t> labels, const RowMatrix<double>& w_minus,
                                    double threshold = 0.5) {
    if (x_plus.rows() == 0) throw InvalidArgument("evaluate: empty dataset");
    std::vector<std::uint8_t> predicted(x_plus.rows());
    for (std::size_t i = 0; i < x_plus.rows(); ++i) predicted[i] = predict(clf, x_plus.row(i)) >= threshold ? 1 : 0;
    const auto c = confusion(predicted, labels);
    return {c.accuracy(), c.f1_positive(), c.total(), penalty_l1(clf.theta, w_minus)};
}

inline RowMatrix<double> dataset_rows(const EmbeddingDataset& ds) {
    RowMatrix<double> out(ds.n_rows(), ds.dim());
    std::copy(ds.vectors.flat().begin(), ds.vectors.flat().end(), out.flat().begin());
    return out;
}

inline EvalReport evaluate(const LogisticClassifier& clf, const EmbeddingDataset& ds, const RowMatrix<double>& w_minus,
                           double threshold = 0.5) {
    if (ds.n_rows() == 0) throw InvalidArgument("evaluate: empty dataset");
    const auto labels = require_labels(ds);
    return evaluate_purified(clf, purify_rows(dataset_rows(ds), w_minus), labels, w_minus, threshold);
}

// ---------------------------------------------------------------------------
// Training

struct ClfTrainConfig {
    AdamWConfig optimizer{};
    std::size_t max_epochs = 50;
    std::vector<double> lr_grid{1e-2, 1e-3, 1e-4};
    PlateauSchedule plateau{};
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double beta = 3.0;
    bool fit_intercept = false;

    void validate() const {
        optimizer.validate();
        plateau.validate();
        if (lr_grid.empty()) throw InvalidArgument("lr_grid must not be empty");
        for (double lr : lr_grid)
            if (!(lr > 0.0)) throw InvalidArgument("lr_grid entries must be positive");
        if (max_epochs < 1) throw InvalidArgument("max_epochs must be >= 1");
        if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
        if (!(beta >= 0.0)) throw InvalidArgument("beta must be non-negative");
    }
};

struct ClfEpochRecord {
    double grid_lr = 0.0;     // initial learning rate of this grid run
    std::size_t epoch = 0;
    double learning_rate = 0.0; // rate used during this epoch
    double train_loss = 0.0;    // mean batch objective
    double val_accuracy = 0.0;
    double val_f1 = 0.0;
};

struct ClfTrainResult {
    LogisticClassifier classifier;
    EvalReport val_report;
    double best_lr = 0.0;
    std::size_t best_epoch = 0;
    std::vector<ClfEpochRecord> history;
};

/// Grid search over initial learning rates. Each run starts from theta = 0 and
/// trains up to max_epochs with the plateau schedule on validation accuracy.
/// The checkpoint with the highest validation accuracy over every run and epoch
/// is returned; ties keep the earlier checkpoint.
inline ClfTrainResult train_classifier(const EmbeddingDataset& train, const EmbeddingDataset& val,
                                       const RowMatrix<double>& w_minus, const ClfTrainConfig& cfg) {
    cfg.validate();
    if (train.dim() != val.dim()) throw InvalidArgument("train/val dims differ");
    if (w_minus.cols() > 0 && w_minus.rows() != train.dim()) throw InvalidArgument("W- rows do not match the input dim");
    if (val.n_rows() == 0) throw InvalidArgument("validation set is empty");
    const auto y_train = require_labels(train);
    const auto y_val = require_labels(val);
    const ClassWeights weights = class_weights(y_train);
    const auto x_train = purify_rows(dataset_rows(train), w_minus);
    const auto x_val = purify_rows(dataset_rows(val), w_minus);
    const std::size_t D = train.dim();
    const std::size_t n_params = D + (cfg.fit_intercept ? 1 : 0);

    ClfTrainResult result;
    double best_acc = -1.0;
    std::vector<std::size_t> order(train.n_rows());

    for (double grid_lr : cfg.lr_grid) {
        std::vector<double> params(n_params, 0.0);
        AdamWState<double> opt(n_params);
        PlateauSchedule sched = cfg.plateau;
        double lr = grid_lr;
        for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
            order = detail::epoch_order(train.n_rows(), cfg.seed, epoch);
            double loss_sum = 0.0;
            std::size_t n_batches = 0;
            for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
                const std::size_t end = std::min(order.size(), start + cfg.batch_size);
                RowMatrix<double> xb(end - start, D);
                std::vector<std::uint8_t> yb(end - start);
                for (std::size_t i = start; i < end; ++i) {
                    auto src = x_train.row(order[i]);
                    std::copy(src.begin(), src.end(), xb.row(i - start).begin());
                    yb[i - start] = y_train[order[i]];
                }
                auto lg = penalized_cross_entropy(params, cfg.fit_intercept, xb, yb, w_minus, weights, cfg.beta);
                loss_sum += lg.loss;
                ++n_batches;
                adamw_step<double>(opt, params, lg.grad, cfg.optimizer, lr);
            }

            LogisticClassifier snapshot;
            snapshot.theta.assign(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(D));
            if (cfg.fit_intercept) snapshot.bias = params[D];
            snapshot.beta = cfg.beta;
            const auto report = evaluate_purified(snapshot, x_val, y_val, w_minus);
            result.history.push_back({grid_lr, epoch, lr, loss_sum / static_cast<double>(n_batches),
                                      report.accuracy, report.f1_positive});
            if (report.accuracy > best_acc) {
                best_acc = report.accuracy;
                result.classifier = std::move(snapshot);
                result.val_report = report;
                result.best_lr = grid_lr;
                result.best_epoch = epoch;
            }
            lr = plateau_update(sched, report.accuracy, lr).learning_rate;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// CLF1 file format

inline binary::Bytes encode_classifier(const LogisticClassifier& clf) {
    if (clf.bias) throw InvalidArgument("CLF1 has no intercept field; cannot store a classifier with a bias");
    if (!std::is_sorted(clf.unintended_ids.begin(), clf.unintended_ids.end()))
        throw InvalidArgument("unintended ids must be sorted");
    binary::Bytes out;
    binary::put_magic(out, "CLF1");
    binary::put_u32(out, 1);
    binary::put_u32(out, static_cast<std::uint32_t>(clf.dim()));
    binary::put_f32(out, static_cast<float>(clf.beta));
    binary::put_u32(out, static_cast<std::uint32_t>(clf.unintended_ids.size()));
    for (auto id : clf.unintended_ids) binary::put_u32(out, id);
    out.insert(out.end(), clf.sae_digest.begin(), clf.sae_digest.end());
    for (double t : clf.theta) binary::put_f32(out, static_cast<float>(t));
    return out;
}

inline LogisticClassifier decode_classifier(std::span<const std::uint8_t> bytes) {
    binary::Reader in(bytes, "CLF1");
    if (in.magic() != "CLF1") throw FormatError(FormatErrc::bad_magic, "expected CLF1");
    if (auto v = in.u32(); v != 1) throw FormatError(FormatErrc::unsupported_version, "version " + std::to_string(v));
    LogisticClassifier clf;
    const std::uint32_t dim = in.u32();
    clf.beta = in.f32();
    if (dim == 0 || !(clf.beta >= 0.0) || !std::isfinite(clf.beta))
        throw FormatError(FormatErrc::bad_header, "inconsistent CLF1 header");
    const std::uint32_t n_ids = in.u32();
    in.require(static_cast<std::size_t>(n_ids) * 4);
    clf.unintended_ids.resize(n_ids);
    for (auto& id : clf.unintended_ids) id = in.u32();
    auto digest = in.bytes(32);
    std::copy(digest.begin(), digest.end(), clf.sae_digest.begin());
    in.require(static_cast<std::size_t>(dim) * 4);
    clf.theta.resize(dim);
    for (auto& t : clf.theta) {
        t = in.f32();
        if (!std::isfinite(t)) throw FormatError(FormatErrc::non_finite, "non-finite theta");
    }
    if (in.remaining() != 0) throw FormatError(FormatErrc::trailing_data, "bytes after CLF1 theta");
    return clf;
}

inline void write_classifier(const LogisticClassifier& clf, const std::string& path) {
    binary::write_file(path, encode_classifier(clf));
}

inline LogisticClassifier read_classifier(const std::string& path) {
    return decode_classifier(binary::read_file(path));
}

} // namespace selfreg
