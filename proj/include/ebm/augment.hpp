#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ebm/dataset.hpp"
#include "ebm/math.hpp"
#include "ebm/rbm.hpp"

namespace ebm {

/// One-hidden-layer sigmoid autoencoder with dropout on the hidden layer.
class Autoencoder {
public:
    Autoencoder() = default;
    Autoencoder(Matrix enc_weights, Vector enc_bias, Matrix dec_weights, Vector dec_bias, double p_drop);

    static Autoencoder initialized(std::size_t input_dim, std::size_t hidden_dim, double p_drop, Prng& rng);

    std::size_t input_dim() const noexcept { return enc_weights_.rows(); }
    std::size_t hidden_dim() const noexcept { return enc_weights_.cols(); }
    double p_drop() const noexcept { return p_drop_; }

    const Matrix& enc_weights() const noexcept { return enc_weights_; }
    const Vector& enc_bias() const noexcept { return enc_bias_; }
    const Matrix& dec_weights() const noexcept { return dec_weights_; }
    const Vector& dec_bias() const noexcept { return dec_bias_; }
    Matrix& enc_weights() noexcept { return enc_weights_; }
    Vector& enc_bias() noexcept { return enc_bias_; }
    Matrix& dec_weights() noexcept { return dec_weights_; }
    Vector& dec_bias() noexcept { return dec_bias_; }

    /// Reconstruction with dropout off.
    Vector reconstruct(std::span<const double> x) const;

    /// Reconstruction with an inverted-dropout hidden mask drawn from rng:
    /// kept units are scaled by 1 / (1 - p_drop).
    Vector reconstruct_dropout(std::span<const double> x, Prng& rng) const;

    struct Gradient {
        Matrix enc_weights;
        Vector enc_bias;
        Matrix dec_weights;
        Vector dec_bias;
    };

    /// Mean squared reconstruction error (averaged over samples and inputs)
    /// and its gradient. `masks`, when non-empty, holds one scaled hidden mask
    /// per sample; empty means dropout off.
    double loss_and_gradient(std::span<const Vector> batch, std::span<const Vector> masks, Gradient& grad) const;

    double reconstruction_error(std::span<const Vector> data) const;

    bool operator==(const Autoencoder&) const = default;

private:
    Vector encode(std::span<const double> x) const;
    Vector decode(std::span<const double> h) const;

    Matrix enc_weights_;
    Vector enc_bias_;
    Matrix dec_weights_;
    Vector dec_bias_;
    double p_drop_ = 0.0;
};

enum class GeneratorKind { rbm, autoencoder };

std::string to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(const std::string& name);

/// Generator training parameters. Defaults are the tuned RBM values; use
/// for_generator() to get the tuned values of either kind.
struct GenConfig {
    double eta = 1e-4;
    std::size_t epochs = 100;
    std::size_t batch_size = 8;
    std::size_t hidden_dim = 500;
    double p_drop = 0.2;  ///< autoencoder only
    std::size_t cd_k = 1;  ///< RBM generator training only
    std::uint64_t seed = 0;

    static GenConfig for_generator(GeneratorKind kind);
    void validate() const;
    TrainConfig rbm_train_config() const;
};

Rbm train_class_generator_rbm(std::span<const Vector> samples, const GenConfig& cfg, Prng& rng);

/// `count` samples; seed i % |seeds| is pushed through k Gibbs steps and the
/// final visible probabilities are emitted.
std::vector<Vector> generate_rbm(const Rbm& gen, std::span<const Vector> seeds, std::size_t k, std::size_t count,
                                 Prng& rng);

/// Mini-batch SGD on mean squared reconstruction error with hidden dropout.
struct AutoencoderTraining {
    Autoencoder model;
    std::vector<double> epoch_loss;
};

AutoencoderTraining train_autoencoder(std::span<const Vector> samples, const GenConfig& cfg, Prng& rng);

/// Continue training an existing autoencoder.
std::vector<double> fit_autoencoder(Autoencoder& ae, std::span<const Vector> samples, const GenConfig& cfg,
                                    Prng& rng);

/// `count` dropout-active reconstructions of the seeds, cycling.
std::vector<Vector> generate_ae(const Autoencoder& gen, std::span<const Vector> seeds, std::size_t count, Prng& rng);

struct AugmentationPlan {
    std::map<std::size_t, std::size_t> quotas;  ///< class label → synthetic samples
    GeneratorKind generator = GeneratorKind::rbm;
    std::size_t gibbs_steps = 1;

    std::size_t total() const noexcept;
};

struct PlanValidation {
    bool ok = true;
    std::size_t cap = 0;
    std::size_t requested = 0;
    std::size_t excess = 0;
    std::string message;
};

/// ok iff the quotas sum to at most floor(majority / 2) and every quota'd
/// class is present in class_counts.
PlanValidation validate_plan(const AugmentationPlan& plan, std::span<const std::size_t> class_counts);

/// Thrown by apply_plan when the plan fails validation.
class PlanViolation : public std::runtime_error {
public:
    explicit PlanViolation(PlanValidation report);
    const PlanValidation& report() const noexcept { return report_; }

private:
    PlanValidation report_;
};

/// Quotas that move minority classes toward the majority count. Deficits are
/// scaled down proportionally (floor) when their sum exceeds the cap.
AugmentationPlan balancing_plan(std::span<const std::size_t> class_counts, GeneratorKind generator,
                                bool respect_cap = true);

/// Names: eggs-paper, larvae-paper, protozoa-paper. Labels are 0-based
/// (the first class of each group is label 0).
std::optional<AugmentationPlan> preset_plan(const std::string& name);
std::vector<std::string> preset_names();

AugmentationPlan load_plan(const std::string& path);
std::string plan_to_json(const AugmentationPlan& plan, int indent = 2);
AugmentationPlan plan_from_json(const std::string& text);

struct AugmentResult {
    Dataset dataset;
    std::map<std::size_t, std::vector<double>> generator_traces;  ///< per class, per epoch
};

/// Trains one generator per quota'd class on that class's real samples only
/// and appends exactly `quota` synthetic samples per class. The generator of
/// class c is seeded with derive_seed(cfg.seed, c). Original samples keep
/// their position.
AugmentResult apply_plan(const Dataset& ds, const AugmentationPlan& plan, const GenConfig& cfg);

}  // namespace ebm
