#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ebm {

using Vector = std::vector<double>;

/// Thrown on any shape disagreement between operands.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    std::string shape() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// result[i] = sum_j M(i,j) x[j]
Vector matvec(const Matrix& m, std::span<const double> x);

/// result[j] = sum_i M(i,j) x[i]
Vector matvec_transposed(const Matrix& m, std::span<const double> x);

/// Logistic sigmoid. Evaluated on the branch that never overflows.
double sigmoid(double x) noexcept;

/// Numerically stable softmax.
Vector softmax(std::span<const double> logits);

/// Index of the first maximal entry.
std::size_t argmax(std::span<const double> x);

double squared_distance(std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> x) noexcept;

// xoshiro256** seeded through splitmix64. The output stream is a pure
// function of the seed; every derived draw (uniform, gaussian, index) is
// computed here rather than through <random> distributions, whose output is
// implementation-defined.
class Prng {
public:
    explicit Prng(std::uint64_t seed = 0) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next() noexcept;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;

    /// Standard normal via Box-Muller; consumes two uniforms per pair.
    double gaussian() noexcept;

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t index(std::uint64_t bound);

    /// Fisher-Yates.
    template <class T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(index(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Seed for an independent sub-stream, e.g. one per class or per run.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept;

/// Returns 1 with probability p. Consumes exactly one draw.
int bernoulli_sample(double p, Prng& rng);

/// Gaussian(0, stddev) fill.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Prng& rng);

}  // namespace ebm
