#include "ebm/rbm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "ebm/binary_io.hpp"

namespace ebm {

void TrainConfig::validate() const {
    if (!(std::isfinite(eta) && eta >= 0.0))
        throw std::invalid_argument("TrainConfig: eta must be finite and non-negative");
    if (epochs == 0) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (cd_k == 0) throw std::invalid_argument("TrainConfig: cd_k must be >= 1");
}

Rbm::Rbm(std::size_t visible, std::size_t hidden)
    : weights_(visible, hidden), visible_bias_(visible, 0.0), hidden_bias_(hidden, 0.0) {}

Rbm::Rbm(Matrix weights, Vector visible_bias, Vector hidden_bias)
    : weights_(std::move(weights)),
      visible_bias_(std::move(visible_bias)),
      hidden_bias_(std::move(hidden_bias)) {
    if (visible_bias_.size() != weights_.rows() || hidden_bias_.size() != weights_.cols())
        throw DimensionError("Rbm: weights " + weights_.shape() + " with visible bias of length " +
                             std::to_string(visible_bias_.size()) + " and hidden bias of length " +
                             std::to_string(hidden_bias_.size()));
}

Rbm Rbm::initialized(std::size_t visible, std::size_t hidden, Prng& rng) {
    return Rbm(gaussian_matrix(visible, hidden, 0.01, rng), Vector(visible, 0.0), Vector(hidden, 0.0));
}

void Rbm::check_visible(std::span<const double> v, const char* what) const {
    if (v.size() != visible())
        throw DimensionError(std::string(what) + ": visible vector of length " + std::to_string(v.size()) +
                             " for RBM with weights " + weights_.shape());
}

void Rbm::check_hidden(std::span<const double> h, const char* what) const {
    if (h.size() != hidden())
        throw DimensionError(std::string(what) + ": hidden vector of length " + std::to_string(h.size()) +
                             " for RBM with weights " + weights_.shape());
}

double Rbm::energy(std::span<const double> v, std::span<const double> h) const {
    check_visible(v, "energy");
    check_hidden(h, "energy");
    double e = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) e -= visible_bias_[i] * v[i];
    for (std::size_t j = 0; j < h.size(); ++j) e -= hidden_bias_[j] * h[j];
    const Vector wh = matvec(weights_, h);
    for (std::size_t i = 0; i < v.size(); ++i) e -= v[i] * wh[i];
    return e;
}

Vector Rbm::prob_h_given_v(std::span<const double> v) const {
    check_visible(v, "prob_h_given_v");
    Vector act = matvec_transposed(weights_, v);
    for (std::size_t j = 0; j < act.size(); ++j) act[j] = sigmoid(act[j] + hidden_bias_[j]);
    return act;
}

Vector Rbm::prob_v_given_h(std::span<const double> h) const {
    check_hidden(h, "prob_v_given_h");
    Vector act = matvec(weights_, h);
    for (std::size_t i = 0; i < act.size(); ++i) act[i] = sigmoid(act[i] + visible_bias_[i]);
    return act;
}

namespace {

Vector sample_bits(Vector probs, Prng& rng) {
    for (double& p : probs) p = static_cast<double>(bernoulli_sample(p, rng));
    return probs;
}

}  // namespace

Vector Rbm::sample_h(std::span<const double> v, Prng& rng) const {
    return sample_bits(prob_h_given_v(v), rng);
}

Vector Rbm::sample_v(std::span<const double> h, Prng& rng) const {
    return sample_bits(prob_v_given_h(h), rng);
}

GibbsResult Rbm::gibbs_chain(std::span<const double> v0, std::size_t k, Prng& rng) const {
    if (k == 0) throw std::invalid_argument("gibbs_chain: k must be >= 1");
    check_visible(v0, "gibbs_chain");
    GibbsResult out;
    out.visible.assign(v0.begin(), v0.end());
    for (std::size_t step = 0; step < k; ++step) {
        const Vector h = sample_h(out.visible, rng);
        out.visible_probs = prob_v_given_h(h);
        out.visible = sample_bits(out.visible_probs, rng);
    }
    out.hidden_probs = prob_h_given_v(out.visible);
    return out;
}

double Rbm::cd_update(std::span<const Vector> batch, const TrainConfig& cfg, Prng& rng) {
    cfg.validate();
    if (batch.empty()) throw std::invalid_argument("cd_update: empty batch");
    for (const auto& v : batch) check_visible(v, "cd_update");

    const std::size_t m = visible();
    const std::size_t n = hidden();
    Matrix grad_w(m, n);
    Vector grad_b(m, 0.0);
    Vector grad_c(n, 0.0);
    double error = 0.0;

    for (const auto& v0 : batch) {
        const Vector ph0 = prob_h_given_v(v0);
        const GibbsResult chain = gibbs_chain(v0, cfg.cd_k, rng);
        const Vector& vk = chain.visible;
        const Vector& phk = chain.hidden_probs;
        for (std::size_t i = 0; i < m; ++i) {
            auto row = grad_w.row(i);
            const double a = v0[i];
            const double b = vk[i];
            for (std::size_t j = 0; j < n; ++j) row[j] += a * ph0[j] - b * phk[j];
            grad_b[i] += a - b;
        }
        for (std::size_t j = 0; j < n; ++j) grad_c[j] += ph0[j] - phk[j];
        error += squared_distance(v0, chain.visible_probs) / static_cast<double>(m);
    }

    const double batch_count = static_cast<double>(batch.size());
    if (cfg.eta != 0.0) {
        const double scale = cfg.eta / batch_count;
        auto w = weights_.data();
        auto g = grad_w.data();
        for (std::size_t k = 0; k < w.size(); ++k) w[k] += scale * g[k];
        for (std::size_t i = 0; i < m; ++i) visible_bias_[i] += scale * grad_b[i];
        for (std::size_t j = 0; j < n; ++j) hidden_bias_[j] += scale * grad_c[j];
    }
    return error / batch_count;
}

std::vector<EpochTrace> Rbm::train(std::span<const Vector> data, const TrainConfig& cfg, Prng& rng) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("Rbm::train: empty data");

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Vector> batch;
    batch.reserve(cfg.batch_size);

    std::vector<EpochTrace> trace;
    trace.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t k = start; k < stop; ++k) batch.push_back(data[order[k]]);
            total += cd_update(batch, cfg, rng) * static_cast<double>(batch.size());
        }
        trace.push_back({epoch + 1, total / static_cast<double>(data.size())});
    }
    return trace;
}

double Rbm::reconstruction_error(std::span<const Vector> data) const {
    if (data.empty()) throw std::invalid_argument("reconstruction_error: empty data");
    double total = 0.0;
    for (const auto& v : data) {
        const Vector recon = prob_v_given_h(prob_h_given_v(v));
        total += squared_distance(v, recon) / static_cast<double>(visible());
    }
    return total / static_cast<double>(data.size());
}

Vector bits_to_vector(std::uint64_t bits, std::size_t len) {
    Vector v(len);
    for (std::size_t i = 0; i < len; ++i) v[i] = static_cast<double>((bits >> i) & 1u);
    return v;
}

JointTable enumerate_joint(const Rbm& rbm) {
    const std::size_t m = rbm.visible();
    const std::size_t n = rbm.hidden();
    if (m + n > kMaxEnumerableUnits)
        throw std::invalid_argument("enumerate_joint: " + std::to_string(m + n) +
                                    " units exceed the enumeration limit of " +
                                    std::to_string(kMaxEnumerableUnits));
    JointTable table{m, n, std::vector<double>(std::size_t{1} << (m + n))};
    std::vector<Vector> hs;
    for (std::uint64_t hb = 0; hb < (std::uint64_t{1} << n); ++hb) hs.push_back(bits_to_vector(hb, n));

    double max_log = -INFINITY;
    for (std::uint64_t vb = 0; vb < (std::uint64_t{1} << m); ++vb) {
        const Vector v = bits_to_vector(vb, m);
        for (std::uint64_t hb = 0; hb < hs.size(); ++hb) {
            const double log_weight = -rbm.energy(v, hs[hb]);
            table.probs[(vb << n) | hb] = log_weight;
            max_log = std::max(max_log, log_weight);
        }
    }
    double total = 0.0;
    for (double& p : table.probs) {
        p = std::exp(p - max_log);
        total += p;
    }
    for (double& p : table.probs) p /= total;
    return table;
}

std::vector<double> JointTable::visible_marginal() const {
    std::vector<double> out(std::size_t{1} << visible, 0.0);
    for (std::uint64_t s = 0; s < probs.size(); ++s) out[s >> hidden] += probs[s];
    return out;
}

std::vector<double> JointTable::hidden_marginal() const {
    std::vector<double> out(std::size_t{1} << hidden, 0.0);
    const std::uint64_t mask = (std::uint64_t{1} << hidden) - 1;
    for (std::uint64_t s = 0; s < probs.size(); ++s) out[s & mask] += probs[s];
    return out;
}

void write_rbm(std::ostream& out, const Rbm& rbm) {
    io::put_tag(out, "EBMR");
    io::put_u32(out, kRbmFormatVersion);
    io::put_u32(out, static_cast<std::uint32_t>(rbm.visible()));
    io::put_u32(out, static_cast<std::uint32_t>(rbm.hidden()));
    io::put_f64s(out, rbm.visible_bias());
    io::put_f64s(out, rbm.hidden_bias());
    io::put_f64s(out, rbm.weights().data());
    if (!out) throw std::runtime_error("write_rbm: stream write failed");
}

Rbm read_rbm(std::istream& in) {
    io::Reader r(in);
    r.expect_tag("EBMR");
    const auto version = r.u32("version");
    if (version != kRbmFormatVersion)
        throw FormatError("unsupported RBM format version " + std::to_string(version));
    const std::size_t m = r.u32("visible count");
    const std::size_t n = r.u32("hidden count");
    Vector b(m), c(n);
    Matrix w(m, n);
    r.f64s(b, "visible bias");
    r.f64s(c, "hidden bias");
    r.f64s(w.data(), "weights");
    return Rbm(std::move(w), std::move(b), std::move(c));
}

std::string rbm_to_json(const Rbm& rbm, int indent) {
    nlohmann::json weights = nlohmann::json::array();
    for (std::size_t i = 0; i < rbm.visible(); ++i) {
        auto row = rbm.weights().row(i);
        weights.push_back(std::vector<double>(row.begin(), row.end()));
    }
    nlohmann::json j = {
        {"format", "ebm-rbm"},
        {"version", kRbmFormatVersion},
        {"visible", rbm.visible()},
        {"hidden", rbm.hidden()},
        {"visible_bias", rbm.visible_bias()},
        {"hidden_bias", rbm.hidden_bias()},
        {"weights", weights},
    };
    return j.dump(indent);
}

}  // namespace ebm
