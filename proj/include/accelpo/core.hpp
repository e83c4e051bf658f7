#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace accelpo {

/// Dense row-major |rows| x |cols| array of doubles.
///
/// The one value type shared by Q-tables, logit tables, gradient tables and
/// probability tables. Rows index states, columns index actions.
class Table {
public:
    Table() = default;
    Table(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Table: negative shape");
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(int r, int c) {
        assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
        return data_[static_cast<size_t>(r) * cols_ + c];
    }
    double operator()(int r, int c) const {
        assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
        return data_[static_cast<size_t>(r) * cols_ + c];
    }

    std::span<double> row(int r) {
        return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)};
    }
    std::span<const double> row(int r) const {
        return {data_.data() + static_cast<size_t>(r) * cols_, static_cast<size_t>(cols_)};
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Table& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool operator==(const Table& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

inline void check_same_shape(const Table& a, const Table& b, const char* where) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(where) + ": shape mismatch");
}

/// c = a + s * b, elementwise.
inline Table axpy(const Table& a, double s, const Table& b) {
    check_same_shape(a, b, "axpy");
    Table c = a;
    for (size_t i = 0; i < c.data().size(); ++i) c.data()[i] += s * b.data()[i];
    return c;
}

inline Table scaled(const Table& a, double s) {
    Table c = a;
    for (double& v : c.data()) v *= s;
    return c;
}

inline double sup_norm(const Table& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

inline double sup_dist(const Table& a, const Table& b) {
    check_same_shape(a, b, "sup_dist");
    double m = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

inline bool all_finite(const Table& a) {
    return std::all_of(a.data().begin(), a.data().end(),
                       [](double v) { return std::isfinite(v); });
}

/// Deterministic random source.
///
/// Wraps std::mt19937_64 and derives every variate from raw engine words, so
/// that streams are bit-reproducible across standard libraries (the standard
/// pins the engine but not the distributions).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t raw() { return engine_(); }

    /// Inverse-CDF sample from a finite distribution, scanning indices in
    /// ascending order. `probs` must sum to ~1.
    int categorical(std::span<const double> probs) {
        const double u = uniform();
        double cum = 0.0;
        for (size_t i = 0; i < probs.size(); ++i) {
            cum += probs[i];
            if (u < cum) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;  // guard against roundoff
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace accelpo
