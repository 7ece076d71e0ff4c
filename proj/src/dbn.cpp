#include "ebm/dbn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ebm/binary_io.hpp"

namespace ebm {

void FineTuneConfig::validate() const {
    if (!(std::isfinite(eta) && eta >= 0.0))
        throw std::invalid_argument("FineTuneConfig: eta must be finite and non-negative");
    if (epochs == 0) throw std::invalid_argument("FineTuneConfig: epochs must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("FineTuneConfig: batch_size must be >= 1");
}

DbnClassifier::DbnClassifier(std::vector<Rbm> layers, Matrix softmax_weights, Vector softmax_bias)
    : layers_(std::move(layers)),
      softmax_weights_(std::move(softmax_weights)),
      softmax_bias_(std::move(softmax_bias)) {
    check_invariants();
}

void DbnClassifier::check_invariants() const {
    if (layers_.empty()) throw DimensionError("DbnClassifier: at least one layer is required");
    for (std::size_t l = 1; l < layers_.size(); ++l)
        if (layers_[l].visible() != layers_[l - 1].hidden())
            throw DimensionError("DbnClassifier: layer " + std::to_string(l) + " has weights " +
                                 layers_[l].weights().shape() + " but layer " + std::to_string(l - 1) +
                                 " has " + std::to_string(layers_[l - 1].hidden()) + " hidden units");
    if (softmax_weights_.rows() != layers_.back().hidden() || softmax_weights_.cols() != softmax_bias_.size())
        throw DimensionError("DbnClassifier: softmax weights " + softmax_weights_.shape() + " with bias of length " +
                             std::to_string(softmax_bias_.size()) + " on top of " +
                             std::to_string(layers_.back().hidden()) + " hidden units");
    if (softmax_bias_.empty()) throw DimensionError("DbnClassifier: zero classes");
}

void DbnClassifier::check_labels(std::span<const LabeledSample> data) const {
    for (std::size_t k = 0; k < data.size(); ++k)
        if (data[k].label >= num_classes())
            throw std::out_of_range("sample " + std::to_string(k) + " has label " + std::to_string(data[k].label) +
                                    " but the classifier has " + std::to_string(num_classes()) + " classes");
}

ForwardPass DbnClassifier::forward(std::span<const double> v) const {
    if (v.size() != input_dim())
        throw DimensionError("forward: input of length " + std::to_string(v.size()) + " for classifier with input dim " +
                             std::to_string(input_dim()));
    ForwardPass out;
    out.activations.reserve(layers_.size() + 1);
    out.activations.emplace_back(v.begin(), v.end());
    for (const auto& layer : layers_) out.activations.push_back(layer.prob_h_given_v(out.activations.back()));
    out.logits = matvec_transposed(softmax_weights_, out.activations.back());
    for (std::size_t c = 0; c < out.logits.size(); ++c) out.logits[c] += softmax_bias_[c];
    out.class_probs = softmax(out.logits);
    return out;
}

std::size_t DbnClassifier::predict(std::span<const double> v) const {
    return argmax(forward(v).class_probs);
}

namespace {

double cross_entropy(const ForwardPass& pass, std::size_t label) {
    const double top = *std::max_element(pass.logits.begin(), pass.logits.end());
    double total = 0.0;
    for (double z : pass.logits) total += std::exp(z - top);
    return top + std::log(total) - pass.logits[label];
}

void add_outer(Matrix& m, std::span<const double> col, std::span<const double> row, double scale) {
    for (std::size_t i = 0; i < col.size(); ++i) {
        const double a = col[i] * scale;
        if (a == 0.0) continue;
        auto r = m.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) r[j] += a * row[j];
    }
}

}  // namespace

double DbnClassifier::loss(std::span<const LabeledSample> batch) const {
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
    check_labels(batch);
    double total = 0.0;
    for (const auto& s : batch) total += cross_entropy(forward(s.features), s.label);
    return total / static_cast<double>(batch.size());
}

double DbnClassifier::loss_and_gradient(std::span<const LabeledSample> batch, DbnGradient& grad) const {
    if (batch.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");
    check_labels(batch);

    const std::size_t depth = layers_.size();
    grad.weights.resize(depth);
    grad.hidden_biases.resize(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        grad.weights[l] = Matrix(layers_[l].visible(), layers_[l].hidden());
        grad.hidden_biases[l].assign(layers_[l].hidden(), 0.0);
    }
    grad.softmax_weights = Matrix(softmax_weights_.rows(), softmax_weights_.cols());
    grad.softmax_bias.assign(num_classes(), 0.0);

    const double scale = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const auto& s : batch) {
        const ForwardPass pass = forward(s.features);
        total += cross_entropy(pass, s.label);

        Vector delta = pass.class_probs;
        delta[s.label] -= 1.0;
        add_outer(grad.softmax_weights, pass.activations.back(), delta, scale);
        for (std::size_t c = 0; c < delta.size(); ++c) grad.softmax_bias[c] += scale * delta[c];

        Vector back = matvec(softmax_weights_, delta);
        for (std::size_t l = depth; l-- > 0;) {
            const Vector& h = pass.activations[l + 1];
            for (std::size_t j = 0; j < h.size(); ++j) back[j] *= h[j] * (1.0 - h[j]);
            add_outer(grad.weights[l], pass.activations[l], back, scale);
            for (std::size_t j = 0; j < back.size(); ++j) grad.hidden_biases[l][j] += scale * back[j];
            if (l > 0) back = matvec(layers_[l].weights(), back);
        }
    }
    return total * scale;
}

std::vector<double> DbnClassifier::fine_tune(std::span<const LabeledSample> data, const FineTuneConfig& cfg,
                                             Prng& rng, const EpochCallback& on_epoch) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("fine_tune: empty data");
    check_labels(data);

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<LabeledSample> batch;
    batch.reserve(cfg.batch_size);
    DbnGradient grad;

    std::vector<double> trace;
    trace.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t k = start; k < stop; ++k) batch.push_back(data[order[k]]);
            total += loss_and_gradient(batch, grad) * static_cast<double>(batch.size());
            if (cfg.eta == 0.0) continue;

            for (std::size_t l = 0; l < layers_.size(); ++l) {
                auto w = layers_[l].weights().data();
                auto g = grad.weights[l].data();
                for (std::size_t k = 0; k < w.size(); ++k) w[k] -= cfg.eta * g[k];
                auto& c = layers_[l].hidden_bias();
                for (std::size_t j = 0; j < c.size(); ++j) c[j] -= cfg.eta * grad.hidden_biases[l][j];
            }
            auto sw = softmax_weights_.data();
            auto sg = grad.softmax_weights.data();
            for (std::size_t k = 0; k < sw.size(); ++k) sw[k] -= cfg.eta * sg[k];
            for (std::size_t c = 0; c < softmax_bias_.size(); ++c) softmax_bias_[c] -= cfg.eta * grad.softmax_bias[c];
        }
        trace.push_back(total / static_cast<double>(data.size()));
        if (on_epoch) on_epoch(epoch + 1, trace.back());
    }
    return trace;
}

PretrainResult greedy_pretrain(std::span<const std::size_t> layer_dims, std::span<const Vector> data,
                               std::size_t num_classes, const TrainConfig& cfg, Prng& rng) {
    if (layer_dims.size() < 2)
        throw std::invalid_argument("greedy_pretrain: need an input dimension and at least one hidden layer");
    if (data.empty()) throw std::invalid_argument("greedy_pretrain: empty data");
    if (num_classes == 0) throw std::invalid_argument("greedy_pretrain: num_classes must be >= 1");
    for (std::size_t k = 0; k < data.size(); ++k)
        if (data[k].size() != layer_dims[0])
            throw DimensionError("greedy_pretrain: sample " + std::to_string(k) + " has length " +
                                 std::to_string(data[k].size()) + " but the first layer expects " +
                                 std::to_string(layer_dims[0]));
    cfg.validate();

    PretrainResult result;
    std::vector<Rbm> layers;
    std::vector<Vector> current(data.begin(), data.end());
    for (std::size_t l = 1; l < layer_dims.size(); ++l) {
        Rbm layer = Rbm::initialized(layer_dims[l - 1], layer_dims[l], rng);
        result.traces.push_back(layer.train(current, cfg, rng));
        if (l + 1 < layer_dims.size())
            for (auto& v : current) v = layer.prob_h_given_v(v);
        layers.push_back(std::move(layer));
    }
    Matrix softmax_w = gaussian_matrix(layer_dims.back(), num_classes, 0.01, rng);
    result.classifier = DbnClassifier(std::move(layers), std::move(softmax_w), Vector(num_classes, 0.0));
    return result;
}

void write_dbn(std::ostream& out, const DbnClassifier& dbn) {
    io::put_tag(out, "EBMN");
    io::put_u32(out, kDbnFormatVersion);
    io::put_u32(out, static_cast<std::uint32_t>(dbn.layer_count()));
    for (const auto& layer : dbn.layers()) write_rbm(out, layer);
    io::put_u32(out, static_cast<std::uint32_t>(dbn.softmax_weights().rows()));
    io::put_u32(out, static_cast<std::uint32_t>(dbn.num_classes()));
    io::put_f64s(out, dbn.softmax_weights().data());
    io::put_f64s(out, dbn.softmax_bias());
    if (!out) throw std::runtime_error("write_dbn: stream write failed");
}

DbnClassifier read_dbn(std::istream& in) {
    io::Reader r(in);
    r.expect_tag("EBMN");
    const auto version = r.u32("version");
    if (version != kDbnFormatVersion)
        throw FormatError("unsupported classifier format version " + std::to_string(version));
    const std::size_t depth = r.u32("layer count");
    std::vector<Rbm> layers;
    for (std::size_t l = 0; l < depth; ++l) layers.push_back(read_rbm(in));
    io::Reader tail(in);
    const std::size_t rows = tail.u32("softmax rows");
    const std::size_t classes = tail.u32("class count");
    Matrix w(rows, classes);
    Vector b(classes);
    tail.f64s(w.data(), "softmax weights");
    tail.f64s(b, "softmax bias");
    return DbnClassifier(std::move(layers), std::move(w), std::move(b));
}

void save_dbn(const std::string& path, const DbnClassifier& dbn) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_dbn(out, dbn);
}

DbnClassifier load_dbn(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return read_dbn(in);
}

std::string dbn_to_json(const DbnClassifier& dbn, int indent) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : dbn.layers()) layers.push_back(nlohmann::json::parse(rbm_to_json(layer, -1)));
    nlohmann::json softmax_w = nlohmann::json::array();
    for (std::size_t i = 0; i < dbn.softmax_weights().rows(); ++i) {
        auto row = dbn.softmax_weights().row(i);
        softmax_w.push_back(std::vector<double>(row.begin(), row.end()));
    }
    nlohmann::json j = {
        {"format", "ebm-dbn"},
        {"version", kDbnFormatVersion},
        {"layers", layers},
        {"softmax_weights", softmax_w},
        {"softmax_bias", dbn.softmax_bias()},
    };
    return j.dump(indent);
}

}  // namespace ebm
