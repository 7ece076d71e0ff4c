#include "ebm/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace ebm {

// --- Autoencoder ---------------------------------------------------------

Autoencoder::Autoencoder(Matrix enc_weights, Vector enc_bias, Matrix dec_weights, Vector dec_bias, double p_drop)
    : enc_weights_(std::move(enc_weights)),
      enc_bias_(std::move(enc_bias)),
      dec_weights_(std::move(dec_weights)),
      dec_bias_(std::move(dec_bias)),
      p_drop_(p_drop) {
    if (enc_bias_.size() != enc_weights_.cols() || dec_weights_.rows() != enc_weights_.cols() ||
        dec_weights_.cols() != enc_weights_.rows() || dec_bias_.size() != dec_weights_.cols())
        throw DimensionError("Autoencoder: encoder " + enc_weights_.shape() + " (bias " +
                             std::to_string(enc_bias_.size()) + ") does not chain with decoder " +
                             dec_weights_.shape() + " (bias " + std::to_string(dec_bias_.size()) + ")");
    if (!(p_drop_ >= 0.0 && p_drop_ < 1.0)) throw std::invalid_argument("Autoencoder: p_drop must lie in [0, 1)");
}

Autoencoder Autoencoder::initialized(std::size_t input_dim, std::size_t hidden_dim, double p_drop, Prng& rng) {
    Matrix enc = gaussian_matrix(input_dim, hidden_dim, 0.01, rng);
    Matrix dec = gaussian_matrix(hidden_dim, input_dim, 0.01, rng);
    return Autoencoder(std::move(enc), Vector(hidden_dim, 0.0), std::move(dec), Vector(input_dim, 0.0), p_drop);
}

Vector Autoencoder::encode(std::span<const double> x) const {
    if (x.size() != input_dim())
        throw DimensionError("Autoencoder: input of length " + std::to_string(x.size()) + ", expected " +
                             std::to_string(input_dim()));
    Vector h = matvec_transposed(enc_weights_, x);
    for (std::size_t j = 0; j < h.size(); ++j) h[j] = sigmoid(h[j] + enc_bias_[j]);
    return h;
}

Vector Autoencoder::decode(std::span<const double> h) const {
    Vector y = matvec_transposed(dec_weights_, h);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = sigmoid(y[i] + dec_bias_[i]);
    return y;
}

Vector Autoencoder::reconstruct(std::span<const double> x) const { return decode(encode(x)); }

namespace {

Vector dropout_mask(std::size_t size, double p_drop, Prng& rng) {
    Vector mask(size, 1.0);
    if (p_drop == 0.0) return mask;
    const double keep_scale = 1.0 / (1.0 - p_drop);
    for (double& m : mask) m = bernoulli_sample(1.0 - p_drop, rng) ? keep_scale : 0.0;
    return mask;
}

}  // namespace

Vector Autoencoder::reconstruct_dropout(std::span<const double> x, Prng& rng) const {
    Vector h = encode(x);
    const Vector mask = dropout_mask(h.size(), p_drop_, rng);
    for (std::size_t j = 0; j < h.size(); ++j) h[j] *= mask[j];
    return decode(h);
}

double Autoencoder::loss_and_gradient(std::span<const Vector> batch, std::span<const Vector> masks,
                                      Gradient& grad) const {
    if (batch.empty()) throw std::invalid_argument("Autoencoder::loss_and_gradient: empty batch");
    if (!masks.empty() && masks.size() != batch.size())
        throw DimensionError("Autoencoder::loss_and_gradient: " + std::to_string(masks.size()) + " masks for " +
                             std::to_string(batch.size()) + " samples");
    const std::size_t in = input_dim();
    const std::size_t hid = hidden_dim();
    grad.enc_weights = Matrix(in, hid);
    grad.enc_bias.assign(hid, 0.0);
    grad.dec_weights = Matrix(hid, in);
    grad.dec_bias.assign(in, 0.0);

    const double norm = 1.0 / static_cast<double>(batch.size() * in);
    double total = 0.0;
    Vector delta_out(in);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& x = batch[b];
        const Vector h = encode(x);
        Vector dropped = h;
        if (!masks.empty())
            for (std::size_t j = 0; j < hid; ++j) dropped[j] *= masks[b][j];
        const Vector y = decode(dropped);

        for (std::size_t i = 0; i < in; ++i) {
            const double diff = y[i] - x[i];
            total += diff * diff;
            delta_out[i] = 2.0 * diff * norm * y[i] * (1.0 - y[i]);
            grad.dec_bias[i] += delta_out[i];
        }
        for (std::size_t j = 0; j < hid; ++j) {
            if (dropped[j] == 0.0) continue;
            auto row = grad.dec_weights.row(j);
            for (std::size_t i = 0; i < in; ++i) row[i] += dropped[j] * delta_out[i];
        }
        Vector delta_hidden = matvec(dec_weights_, delta_out);
        for (std::size_t j = 0; j < hid; ++j) {
            const double m = masks.empty() ? 1.0 : masks[b][j];
            delta_hidden[j] *= m * h[j] * (1.0 - h[j]);
            grad.enc_bias[j] += delta_hidden[j];
        }
        for (std::size_t i = 0; i < in; ++i) {
            if (x[i] == 0.0) continue;
            auto row = grad.enc_weights.row(i);
            for (std::size_t j = 0; j < hid; ++j) row[j] += x[i] * delta_hidden[j];
        }
    }
    return total * norm;
}

double Autoencoder::reconstruction_error(std::span<const Vector> data) const {
    if (data.empty()) throw std::invalid_argument("Autoencoder::reconstruction_error: empty data");
    double total = 0.0;
    for (const auto& x : data) total += squared_distance(x, reconstruct(x));
    return total / static_cast<double>(data.size() * input_dim());
}

// --- Generators ------------------------------------------------------------

std::string to_string(GeneratorKind kind) { return kind == GeneratorKind::rbm ? "rbm" : "autoencoder"; }

GeneratorKind parse_generator_kind(const std::string& name) {
    if (name == "rbm" || name == "rbm-reconstructor") return GeneratorKind::rbm;
    if (name == "autoencoder" || name == "ae") return GeneratorKind::autoencoder;
    throw std::invalid_argument("unknown generator '" + name + "' (expected rbm or autoencoder)");
}

GenConfig GenConfig::for_generator(GeneratorKind kind) {
    GenConfig cfg;
    if (kind == GeneratorKind::autoencoder) {
        cfg.eta = 1e-3;
        cfg.batch_size = 32;
    } else {
        cfg.eta = 1e-4;
        cfg.batch_size = 8;
    }
    cfg.hidden_dim = 500;
    cfg.p_drop = 0.2;
    return cfg;
}

void GenConfig::validate() const {
    if (!(std::isfinite(eta) && eta >= 0.0)) throw std::invalid_argument("GenConfig: eta must be finite and >= 0");
    if (epochs == 0) throw std::invalid_argument("GenConfig: epochs must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("GenConfig: batch_size must be >= 1");
    if (hidden_dim == 0) throw std::invalid_argument("GenConfig: hidden_dim must be >= 1");
    if (cd_k == 0) throw std::invalid_argument("GenConfig: cd_k must be >= 1");
    if (!(p_drop >= 0.0 && p_drop < 1.0)) throw std::invalid_argument("GenConfig: p_drop must lie in [0, 1)");
}

TrainConfig GenConfig::rbm_train_config() const {
    return TrainConfig{eta, epochs, batch_size, cd_k, seed};
}

Rbm train_class_generator_rbm(std::span<const Vector> samples, const GenConfig& cfg, Prng& rng) {
    if (samples.empty()) throw std::invalid_argument("train_class_generator_rbm: no samples");
    cfg.validate();
    Rbm gen = Rbm::initialized(samples.front().size(), cfg.hidden_dim, rng);
    gen.train(samples, cfg.rbm_train_config(), rng);
    return gen;
}

std::vector<Vector> generate_rbm(const Rbm& gen, std::span<const Vector> seeds, std::size_t k, std::size_t count,
                                 Prng& rng) {
    if (seeds.empty()) throw std::invalid_argument("generate_rbm: no seed samples");
    if (k == 0) throw std::invalid_argument("generate_rbm: k must be >= 1");
    std::vector<Vector> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s)
        out.push_back(gen.gibbs_chain(seeds[s % seeds.size()], k, rng).visible_probs);
    return out;
}

std::vector<double> fit_autoencoder(Autoencoder& ae, std::span<const Vector> samples, const GenConfig& cfg,
                                    Prng& rng) {
    if (samples.empty()) throw std::invalid_argument("train_autoencoder: no samples");
    cfg.validate();

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Vector> batch, masks;
    Autoencoder::Gradient grad;
    std::vector<double> trace;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            masks.clear();
            for (std::size_t k = start; k < stop; ++k) {
                batch.push_back(samples[order[k]]);
                if (ae.p_drop() > 0.0) masks.push_back(dropout_mask(ae.hidden_dim(), ae.p_drop(), rng));
            }
            total += ae.loss_and_gradient(batch, masks, grad) * static_cast<double>(batch.size());
            if (cfg.eta == 0.0) continue;
            auto step = [&](std::span<double> params, std::span<const double> g) {
                for (std::size_t k = 0; k < params.size(); ++k) params[k] -= cfg.eta * g[k];
            };
            step(ae.enc_weights().data(), grad.enc_weights.data());
            step(ae.enc_bias(), grad.enc_bias);
            step(ae.dec_weights().data(), grad.dec_weights.data());
            step(ae.dec_bias(), grad.dec_bias);
        }
        trace.push_back(total / static_cast<double>(samples.size()));
    }
    return trace;
}

AutoencoderTraining train_autoencoder(std::span<const Vector> samples, const GenConfig& cfg, Prng& rng) {
    if (samples.empty()) throw std::invalid_argument("train_autoencoder: no samples");
    cfg.validate();
    AutoencoderTraining out{Autoencoder::initialized(samples.front().size(), cfg.hidden_dim, cfg.p_drop, rng), {}};
    out.epoch_loss = fit_autoencoder(out.model, samples, cfg, rng);
    return out;
}

std::vector<Vector> generate_ae(const Autoencoder& gen, std::span<const Vector> seeds, std::size_t count, Prng& rng) {
    if (seeds.empty()) throw std::invalid_argument("generate_ae: no seed samples");
    std::vector<Vector> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) out.push_back(gen.reconstruct_dropout(seeds[s % seeds.size()], rng));
    return out;
}

// --- Plans -------------------------------------------------------------------

std::size_t AugmentationPlan::total() const noexcept {
    std::size_t t = 0;
    for (const auto& [label, quota] : quotas) t += quota;
    return t;
}

PlanValidation validate_plan(const AugmentationPlan& plan, std::span<const std::size_t> class_counts) {
    if (class_counts.empty()) throw std::invalid_argument("validate_plan: no class counts");
    PlanValidation v;
    v.cap = *std::max_element(class_counts.begin(), class_counts.end()) / 2;
    v.requested = plan.total();
    for (const auto& [label, quota] : plan.quotas) {
        if (quota == 0) continue;
        if (label >= class_counts.size() || class_counts[label] == 0) {
            v.ok = false;
            v.message = "class " + std::to_string(label) + " has a quota of " + std::to_string(quota) +
                        " but no samples in the dataset";
            return v;
        }
    }
    if (v.requested > v.cap) {
        v.ok = false;
        v.excess = v.requested - v.cap;
        v.message = "plan requests " + std::to_string(v.requested) + " synthetic samples, cap is " +
                    std::to_string(v.cap) + " (half the majority class), excess " + std::to_string(v.excess);
    } else {
        v.message = "plan requests " + std::to_string(v.requested) + " synthetic samples within cap " +
                    std::to_string(v.cap);
    }
    return v;
}

PlanViolation::PlanViolation(PlanValidation report)
    : std::runtime_error("augmentation plan rejected: " + report.message), report_(std::move(report)) {}

AugmentationPlan balancing_plan(std::span<const std::size_t> class_counts, GeneratorKind generator,
                                bool respect_cap) {
    AugmentationPlan plan;
    plan.generator = generator;
    if (class_counts.empty()) return plan;
    const std::size_t majority = *std::max_element(class_counts.begin(), class_counts.end());
    std::size_t deficit_total = 0;
    for (auto c : class_counts)
        if (c > 0) deficit_total += majority - c;
    const std::size_t cap = majority / 2;
    for (std::size_t label = 0; label < class_counts.size(); ++label) {
        const auto c = class_counts[label];
        if (c == 0 || c == majority) continue;
        std::size_t quota = majority - c;
        if (respect_cap && deficit_total > cap)
            quota = static_cast<std::size_t>(static_cast<unsigned __int128>(quota) * cap / deficit_total);
        if (quota > 0) plan.quotas[label] = quota;
    }
    return plan;
}

std::optional<AugmentationPlan> preset_plan(const std::string& name) {
    AugmentationPlan plan;
    if (name == "eggs-paper") {
        plan.quotas = {{0, 500}, {1, 332}, {2, 286}, {3, 309}, {5, 435}, {6, 254}};
    } else if (name == "larvae-paper") {
        plan.quotas = {{0, 492}};
    } else if (name == "protozoa-paper") {
        plan.quotas = {{1, 1318}, {5, 927}};
    } else {
        return std::nullopt;
    }
    return plan;
}

std::vector<std::string> preset_names() { return {"eggs-paper", "larvae-paper", "protozoa-paper"}; }

std::string plan_to_json(const AugmentationPlan& plan, int indent) {
    nlohmann::json quotas = nlohmann::json::object();
    for (const auto& [label, quota] : plan.quotas) quotas[std::to_string(label)] = quota;
    nlohmann::json j = {
        {"generator", to_string(plan.generator)},
        {"gibbs_steps", plan.gibbs_steps},
        {"quotas", quotas},
    };
    return j.dump(indent);
}

AugmentationPlan plan_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    AugmentationPlan plan;
    plan.generator = parse_generator_kind(j.value("generator", std::string("rbm")));
    plan.gibbs_steps = j.value("gibbs_steps", std::size_t{1});
    if (plan.gibbs_steps == 0) throw std::invalid_argument("plan: gibbs_steps must be >= 1");
    if (!j.contains("quotas") || !j["quotas"].is_object())
        throw std::invalid_argument("plan: missing \"quotas\" object");
    for (const auto& [key, value] : j["quotas"].items()) {
        std::size_t label = 0;
        std::size_t pos = 0;
        try {
            label = std::stoul(key, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != key.size() || key.empty() || key.front() == '-')
            throw std::invalid_argument("plan: quota key '" + key + "' is not a class label");
        if (!value.is_number_unsigned())
            throw std::invalid_argument("plan: quota for class " + key + " must be a non-negative integer");
        plan.quotas[label] = value.get<std::size_t>();
    }
    return plan;
}

AugmentationPlan load_plan(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open plan file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return plan_from_json(text.str());
}

AugmentResult apply_plan(const Dataset& ds, const AugmentationPlan& plan, const GenConfig& cfg) {
    cfg.validate();
    if (plan.gibbs_steps == 0) throw std::invalid_argument("apply_plan: gibbs_steps must be >= 1");
    const auto dist = distribution(ds);
    auto report = validate_plan(plan, dist.counts.empty() ? std::vector<std::size_t>{0} : dist.counts);
    if (!report.ok) throw PlanViolation(std::move(report));

    AugmentResult out{ds, {}};
    for (const auto& [label, quota] : plan.quotas) {
        if (quota == 0) continue;
        const std::vector<Vector> real = ds.features_of_class(label, false);
        if (real.empty())
            throw PlanViolation(PlanValidation{false, report.cap, report.requested, 0,
                                               "class " + std::to_string(label) + " has no real samples"});
        GenConfig class_cfg = cfg;
        class_cfg.seed = derive_seed(cfg.seed, label);
        Prng rng(class_cfg.seed);

        std::vector<Vector> synthetic;
        if (plan.generator == GeneratorKind::rbm) {
            Rbm gen = Rbm::initialized(ds.dim, class_cfg.hidden_dim, rng);
            auto trace = gen.train(real, class_cfg.rbm_train_config(), rng);
            auto& t = out.generator_traces[label];
            for (const auto& e : trace) t.push_back(e.mean_reconstruction_error);
            synthetic = generate_rbm(gen, real, plan.gibbs_steps, quota, rng);
        } else {
            auto trained = train_autoencoder(real, class_cfg, rng);
            out.generator_traces[label] = std::move(trained.epoch_loss);
            synthetic = generate_ae(trained.model, real, quota, rng);
        }
        for (auto& features : synthetic) {
            for (double& f : features) f = std::clamp(f, 0.0, 1.0);
            out.dataset.samples.push_back(Sample{std::move(features), label, true});
        }
    }
    return out;
}

}  // namespace ebm
