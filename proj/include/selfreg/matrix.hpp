#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace selfreg {

/// Dense row-major matrix. Rows are the natural unit everywhere in the library
/// (one embedding per row; one input dimension per row of an SAE weight matrix).
template <typename Scalar>
class RowMatrix {
public:
    using value_type = Scalar;

    RowMatrix() = default;
    RowMatrix(std::size_t rows, std::size_t cols, Scalar fill = Scalar(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    RowMatrix(std::size_t rows, std::size_t cols, std::vector<Scalar> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        assert(data_.size() == rows_ * cols_);
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    Scalar& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    Scalar operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<Scalar> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const Scalar> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<Scalar> flat() noexcept { return data_; }
    std::span<const Scalar> flat() const noexcept { return data_; }
    const std::vector<Scalar>& data() const noexcept { return data_; }

    void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

    template <typename To>
    RowMatrix<To> cast() const {
        std::vector<To> out(data_.begin(), data_.end());
        return RowMatrix<To>(rows_, cols_, std::move(out));
    }

    friend bool operator==(const RowMatrix&, const RowMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Scalar> data_;
};

template <typename A, typename B>
inline double dot(std::span<const A> a, std::span<const B> b) {
    assert(a.size() == b.size());
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

template <typename T>
inline bool all_finite(std::span<const T> v) {
    return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

} // namespace selfreg
