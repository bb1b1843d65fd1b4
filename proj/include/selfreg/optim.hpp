#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "selfreg/error.hpp"

namespace selfreg {

struct AdamWConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;

    void validate() const {
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
            throw InvalidArgument("learning_rate must be finite and non-negative");
        if (!(beta1 >= 0.0 && beta1 < 1.0)) throw InvalidArgument("beta1 must lie in [0,1)");
        if (!(beta2 >= 0.0 && beta2 < 1.0)) throw InvalidArgument("beta2 must lie in [0,1)");
        if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
        if (!(weight_decay >= 0.0)) throw InvalidArgument("weight_decay must be non-negative");
    }
};

template <typename Scalar>
struct AdamWState {
    std::size_t step_count = 0;
    std::vector<Scalar> first_moment;
    std::vector<Scalar> second_moment;

    AdamWState() = default;
    explicit AdamWState(std::size_t n) : first_moment(n, Scalar(0)), second_moment(n, Scalar(0)) {}
};

/// One AdamW update with bias correction and decoupled weight decay:
///   p <- p * (1 - lr * wd)
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// The learning rate is passed separately so schedules can scale it without
/// touching the config.
template <typename Scalar>
void adamw_step(AdamWState<Scalar>& state, std::span<Scalar> params, std::span<const Scalar> grads,
                const AdamWConfig& cfg, double learning_rate) {
    if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size()) {
        throw InvalidArgument("adamw_step: shape mismatch (params " + std::to_string(params.size()) +
                              ", grads " + std::to_string(grads.size()) + ", moments " +
                              std::to_string(state.first_moment.size()) + ")");
    }
    for (auto g : grads) {
        if (!std::isfinite(g)) throw InvalidArgument("adamw_step: non-finite gradient");
    }
    state.step_count += 1;
    const auto t = static_cast<double>(state.step_count);
    const Scalar b1 = static_cast<Scalar>(cfg.beta1);
    const Scalar b2 = static_cast<Scalar>(cfg.beta2);
    const Scalar bc1 = static_cast<Scalar>(1.0 - std::pow(cfg.beta1, t));
    const Scalar bc2 = static_cast<Scalar>(1.0 - std::pow(cfg.beta2, t));
    const Scalar lr = static_cast<Scalar>(learning_rate);
    const Scalar decay = static_cast<Scalar>(1.0 - learning_rate * cfg.weight_decay);
    const Scalar eps = static_cast<Scalar>(cfg.epsilon);
    const bool decays = cfg.weight_decay != 0.0;

    for (std::size_t i = 0; i < params.size(); ++i) {
        const Scalar g = grads[i];
        Scalar& m = state.first_moment[i];
        Scalar& v = state.second_moment[i];
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g * g;
        if (decays) params[i] *= decay;
        const Scalar m_hat = m / bc1;
        const Scalar v_hat = v / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

template <typename Scalar>
void adamw_step(AdamWState<Scalar>& state, std::span<Scalar> params, std::span<const Scalar> grads,
                const AdamWConfig& cfg) {
    adamw_step(state, params, grads, cfg, cfg.learning_rate);
}

/// Reduce-on-plateau schedule for a metric where higher is better.
struct PlateauSchedule {
    double factor = 0.5;
    std::size_t patience = 3;
    std::size_t max_reductions = 2;
    std::size_t reductions_done = 0;
    double best_metric = -std::numeric_limits<double>::infinity();
    std::size_t epochs_since_best = 0;

    void validate() const {
        if (!(factor > 0.0 && factor < 1.0)) throw InvalidArgument("plateau factor must lie in (0,1)");
        if (patience == 0) throw InvalidArgument("plateau patience must be >= 1");
    }
};

struct PlateauResult {
    double learning_rate;
    bool improved;
};

inline PlateauResult plateau_update(PlateauSchedule& sched, double metric, double current_lr) {
    if (!std::isfinite(metric)) throw InvalidArgument("plateau_update: metric must be finite");
    if (metric > sched.best_metric) {
        sched.best_metric = metric;
        sched.epochs_since_best = 0;
        return {current_lr, true};
    }
    sched.epochs_since_best += 1;
    if (sched.epochs_since_best >= sched.patience && sched.reductions_done < sched.max_reductions) {
        sched.reductions_done += 1;
        sched.epochs_since_best = 0;
        return {current_lr * sched.factor, false};
    }
    return {current_lr, false};
}

} // namespace selfreg
