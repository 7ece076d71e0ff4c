#include "ebm/math.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

namespace ebm {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols)
        throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape());
}

std::string Matrix::shape() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Vector matvec(const Matrix& m, std::span<const double> x) {
    if (m.cols() != x.size())
        throw DimensionError("matvec: matrix " + m.shape() + " times vector of length " +
                             std::to_string(x.size()));
    Vector out(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < r.size(); ++j) acc += r[j] * x[j];
        out[i] = acc;
    }
    return out;
}

Vector matvec_transposed(const Matrix& m, std::span<const double> x) {
    if (m.rows() != x.size())
        throw DimensionError("matvec_transposed: matrix " + m.shape() +
                             " transposed times vector of length " + std::to_string(x.size()));
    Vector out(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j] * xi;
    }
    return out;
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Vector softmax(std::span<const double> logits) {
    Vector out(logits.begin(), logits.end());
    if (out.empty()) return out;
    const double top = *std::max_element(out.begin(), out.end());
    double total = 0.0;
    for (double& v : out) {
        v = std::exp(v - top);
        total += v;
    }
    for (double& v : out) v /= total;
    return out;
}

std::size_t argmax(std::span<const double> x) {
    if (x.empty()) throw DimensionError("argmax of empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < x.size(); ++i)
        if (x[i] > x[best]) best = i;
    return best;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DimensionError("squared_distance: lengths " + std::to_string(a.size()) + " and " +
                             std::to_string(b.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

bool all_finite(std::span<const double> x) noexcept {
    return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
    return base ^ stream;
}

Prng::Prng(std::uint64_t seed) noexcept : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t Prng::next() noexcept {
    const std::uint64_t result = std::rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = std::rotl(s_[3], 45);
    return result;
}

double Prng::uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Prng::gaussian() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // 1 - uniform() lies in (0, 1], so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t Prng::index(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Prng::index: bound must be positive");
    // Rejection keeps the result unbiased.
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t x;
    do {
        x = next();
    } while (x >= limit);
    return x % bound;
}

int bernoulli_sample(double p, Prng& rng) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("bernoulli_sample: probability " + std::to_string(p) +
                                    " outside [0, 1]");
    return rng.uniform() < p ? 1 : 0;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Prng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = stddev * rng.gaussian();
    return m;
}

}  // namespace ebm
