#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ebm/math.hpp"

namespace ebm {

/// Hyper-parameters for contrastive-divergence training.
struct TrainConfig {
    double eta = 1e-5;
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    std::size_t cd_k = 1;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument when eta is negative or not finite, or any count is zero.
    void validate() const;
};

struct EpochTrace {
    std::size_t epoch = 0;
    double mean_reconstruction_error = 0.0;
};

struct GibbsResult {
    Vector visible;              ///< v_k, binary sample
    Vector hidden_probs;         ///< p(h | v_k)
    Vector visible_probs;        ///< p(v | h_{k-1}), the distribution v_k was drawn from
};

/// Binary-binary restricted Boltzmann machine with m visible and n hidden
/// units. Weights are stored m x n, so W(i, j) couples visible i to hidden j.
class Rbm {
public:
    Rbm() = default;
    Rbm(std::size_t visible, std::size_t hidden);
    Rbm(Matrix weights, Vector visible_bias, Vector hidden_bias);

    /// N(0, 0.01) weights, zero biases.
    static Rbm initialized(std::size_t visible, std::size_t hidden, Prng& rng);

    std::size_t visible() const noexcept { return weights_.rows(); }
    std::size_t hidden() const noexcept { return weights_.cols(); }

    const Matrix& weights() const noexcept { return weights_; }
    const Vector& visible_bias() const noexcept { return visible_bias_; }
    const Vector& hidden_bias() const noexcept { return hidden_bias_; }
    Matrix& weights() noexcept { return weights_; }
    Vector& visible_bias() noexcept { return visible_bias_; }
    Vector& hidden_bias() noexcept { return hidden_bias_; }

    double energy(std::span<const double> v, std::span<const double> h) const;

    Vector prob_h_given_v(std::span<const double> v) const;
    Vector prob_v_given_h(std::span<const double> h) const;

    Vector sample_h(std::span<const double> v, Prng& rng) const;
    Vector sample_v(std::span<const double> h, Prng& rng) const;

    /// k rounds of h ~ p(h|v), v ~ p(v|h) starting from v0.
    GibbsResult gibbs_chain(std::span<const double> v0, std::size_t k, Prng& rng) const;

    /// One CD-k step on a mini-batch. Returns the batch mean squared
    /// reconstruction error per visible unit, measured against the chain's
    /// final visible probabilities.
    double cd_update(std::span<const Vector> batch, const TrainConfig& cfg, Prng& rng);

    /// Shuffled mini-batch CD for cfg.epochs epochs; one trace entry per epoch.
    std::vector<EpochTrace> train(std::span<const Vector> data, const TrainConfig& cfg, Prng& rng);

    /// Mean squared error of the deterministic reconstruction p(v | p(h|v)).
    double reconstruction_error(std::span<const Vector> data) const;

    bool operator==(const Rbm&) const = default;

private:
    void check_visible(std::span<const double> v, const char* what) const;
    void check_hidden(std::span<const double> h, const char* what) const;

    Matrix weights_;
    Vector visible_bias_;
    Vector hidden_bias_;
};

/// Exact Boltzmann distribution of a small RBM. State index is
/// (v_bits << n) | h_bits where bit i of v_bits is v_i and bit j of h_bits is h_j.
struct JointTable {
    std::size_t visible = 0;
    std::size_t hidden = 0;
    std::vector<double> probs;

    double prob(std::uint64_t v_bits, std::uint64_t h_bits) const {
        return probs[(v_bits << hidden) | h_bits];
    }
    std::vector<double> visible_marginal() const;
    std::vector<double> hidden_marginal() const;
};

inline constexpr std::size_t kMaxEnumerableUnits = 20;

/// Throws std::invalid_argument when m + n exceeds kMaxEnumerableUnits.
JointTable enumerate_joint(const Rbm& rbm);

/// Unpack the low `len` bits of `bits` into a 0/1 vector.
Vector bits_to_vector(std::uint64_t bits, std::size_t len);

// Binary layout, all little-endian:
//   "EBMR" | u32 version | u32 m | u32 n | b[m] f64 | c[n] f64 | W[m*n] f64 row-major
inline constexpr std::uint32_t kRbmFormatVersion = 1;

void write_rbm(std::ostream& out, const Rbm& rbm);
Rbm read_rbm(std::istream& in);
std::string rbm_to_json(const Rbm& rbm, int indent = 2);

}  // namespace ebm
