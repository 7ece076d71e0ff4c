#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ebm/math.hpp"
#include "ebm/rbm.hpp"

namespace ebm {

struct FineTuneConfig {
    double eta = 1e-5;
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    std::uint64_t seed = 0;

    void validate() const;
};

struct LabeledSample {
    Vector features;
    std::size_t label = 0;
};

struct ForwardPass {
    std::vector<Vector> activations;  ///< activations[0] is the input, then one entry per layer
    Vector logits;
    Vector class_probs;
};

/// Same shapes as the classifier parameters. Visible biases of the stacked
/// RBMs have no gradient because they never enter the discriminative path.
struct DbnGradient {
    std::vector<Matrix> weights;
    std::vector<Vector> hidden_biases;
    Matrix softmax_weights;
    Vector softmax_bias;
};

/// Stack of RBMs topped by a softmax layer.
class DbnClassifier {
public:
    DbnClassifier() = default;
    DbnClassifier(std::vector<Rbm> layers, Matrix softmax_weights, Vector softmax_bias);

    std::size_t layer_count() const noexcept { return layers_.size(); }
    std::size_t input_dim() const noexcept { return layers_.empty() ? 0 : layers_.front().visible(); }
    std::size_t num_classes() const noexcept { return softmax_bias_.size(); }

    const std::vector<Rbm>& layers() const noexcept { return layers_; }
    std::vector<Rbm>& layers() noexcept { return layers_; }
    const Matrix& softmax_weights() const noexcept { return softmax_weights_; }
    Matrix& softmax_weights() noexcept { return softmax_weights_; }
    const Vector& softmax_bias() const noexcept { return softmax_bias_; }
    Vector& softmax_bias() noexcept { return softmax_bias_; }

    /// Deterministic mean-field pass; never touches a PRNG.
    ForwardPass forward(std::span<const double> v) const;

    /// argmax of the class probabilities, lowest index on ties.
    std::size_t predict(std::span<const double> v) const;

    /// Mean cross-entropy over the batch and its gradient.
    double loss_and_gradient(std::span<const LabeledSample> batch, DbnGradient& grad) const;

    /// Mean cross-entropy without the gradient.
    double loss(std::span<const LabeledSample> batch) const;

    /// Called after each fine-tuning epoch with (1-based epoch, mean loss).
    using EpochCallback = std::function<void(std::size_t, double)>;

    /// Mini-batch SGD on mean cross-entropy through every layer.
    /// Returns the mean training loss of each epoch.
    std::vector<double> fine_tune(std::span<const LabeledSample> data, const FineTuneConfig& cfg, Prng& rng,
                                  const EpochCallback& on_epoch = {});

    bool operator==(const DbnClassifier&) const = default;

private:
    void check_invariants() const;
    void check_labels(std::span<const LabeledSample> data) const;

    std::vector<Rbm> layers_;
    Matrix softmax_weights_;
    Vector softmax_bias_;
};

/// Greedy layer-wise CD pretraining. layer_dims = (input, hidden_1, ..., hidden_L).
/// Each layer after the first is trained on the mean-field hidden probabilities
/// of the layer below. Softmax weights are drawn N(0, 0.01) after pretraining.
struct PretrainResult {
    DbnClassifier classifier;
    std::vector<std::vector<EpochTrace>> traces;  ///< one per layer
};

PretrainResult greedy_pretrain(std::span<const std::size_t> layer_dims, std::span<const Vector> data,
                               std::size_t num_classes, const TrainConfig& cfg, Prng& rng);

/// Stacked RBM blocks, then the softmax block:
///   "EBMN" | u32 version | u32 layer count | layer count x (EBMR block) |
///   u32 rows | u32 classes | softmax W f64 row-major | softmax bias f64
inline constexpr std::uint32_t kDbnFormatVersion = 1;

void write_dbn(std::ostream& out, const DbnClassifier& dbn);
DbnClassifier read_dbn(std::istream& in);
void save_dbn(const std::string& path, const DbnClassifier& dbn);
DbnClassifier load_dbn(const std::string& path);
std::string dbn_to_json(const DbnClassifier& dbn, int indent = 2);

}  // namespace ebm
