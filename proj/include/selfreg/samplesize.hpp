#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "selfreg/error.hpp"

namespace selfreg {

/// How many rows are needed to estimate the mean activation of a feature that
/// fires with probability p, to within d = rel_margin * sigma.
struct SampleSizeQuery {
    double activation_prob = 1.0;
    double confidence = 0.95;
    double rel_margin = 0.1;
    double sigma = 1.0;

    void validate() const {
        if (!(activation_prob > 0.0 && activation_prob <= 1.0)) throw InvalidArgument("activation_prob must be in (0,1]");
        if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidArgument("confidence must be in (0,1)");
        if (!(rel_margin > 0.0) || !std::isfinite(rel_margin)) throw InvalidArgument("rel_margin must be positive");
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be positive");
    }
};

/// Which z value feeds the sample-size formulas.
enum class ZMode {
    two_decimals, // z rounded to two decimals, as read from a normal table (1.96 for 95%)
    exact,
};

namespace detail {

/// Standard normal quantile, Acklam's rational approximation followed by one
/// Halley step against erfc.
inline double normal_quantile(double p) {
    static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                             6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                             3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

/// ceil() that treats values within rounding noise of an integer as that integer.
inline std::uint64_t ceil_count(double v) {
    const double r = std::nearbyint(v);
    if (std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v))) return static_cast<std::uint64_t>(r);
    return static_cast<std::uint64_t>(std::ceil(v));
}

} // namespace detail

/// Two-sided standard normal critical value z_{alpha/2} for a confidence level.
inline double z_score(double confidence) {
    if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidArgument("confidence must be in (0,1)");
    return detail::normal_quantile(0.5 + confidence / 2.0);
}

inline double z_for(const SampleSizeQuery& q, ZMode mode) {
    const double z = z_score(q.confidence);
    return mode == ZMode::two_decimals ? std::round(z * 100.0) / 100.0 : z;
}

/// (z sigma / d)^2 before rounding up.
inline double n_normal_raw(const SampleSizeQuery& q, ZMode mode = ZMode::two_decimals) {
    q.validate();
    const double ratio = z_for(q, mode) / q.rel_margin; // d = rel_margin * sigma, so sigma cancels
    return ratio * ratio;
}

inline double n_sparse_raw(const SampleSizeQuery& q, ZMode mode = ZMode::two_decimals) {
    return n_normal_raw(q, mode) / q.activation_prob;
}

inline std::uint64_t n_normal(const SampleSizeQuery& q, ZMode mode = ZMode::two_decimals) {
    return detail::ceil_count(n_normal_raw(q, mode));
}

inline std::uint64_t n_sparse(const SampleSizeQuery& q, ZMode mode = ZMode::two_decimals) {
    return detail::ceil_count(n_sparse_raw(q, mode));
}

} // namespace selfreg
