#include "ebm/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace ebm {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::vector<std::uint64_t> counts)
    : classes_(classes), counts_(std::move(counts)) {
    if (counts_.size() != classes * classes)
        throw std::invalid_argument("ConfusionMatrix: " + std::to_string(counts_.size()) + " counts for " +
                                    std::to_string(classes) + " classes");
}

void ConfusionMatrix::add(std::size_t truth, std::size_t pred, std::uint64_t count) {
    if (truth >= classes_ || pred >= classes_)
        throw std::out_of_range("ConfusionMatrix::add: label pair (" + std::to_string(truth) + ", " +
                                std::to_string(pred) + ") outside " + std::to_string(classes_) + " classes");
    counts_[truth * classes_ + pred] += count;
}

std::uint64_t ConfusionMatrix::total() const noexcept {
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const noexcept {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < classes_; ++i) t += (*this)(i, i);
    return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t truth) const noexcept {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < classes_; ++j) s += (*this)(truth, j);
    return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t pred) const noexcept {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < classes_; ++i) s += (*this)(i, pred);
    return s;
}

ConfusionMatrix confusion_from_predictions(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                                           std::size_t classes) {
    if (truth.size() != pred.size())
        throw std::invalid_argument("confusion_from_predictions: " + std::to_string(truth.size()) +
                                    " labels but " + std::to_string(pred.size()) + " predictions");
    ConfusionMatrix cm(classes);
    for (std::size_t k = 0; k < truth.size(); ++k) cm.add(truth[k], pred[k]);
    return cm;
}

double accuracy(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw std::invalid_argument("accuracy: empty confusion matrix");
    return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

double balanced_accuracy(const ConfusionMatrix& cm, std::size_t* skipped) {
    double recall_sum = 0.0;
    std::size_t supported = 0;
    for (std::size_t i = 0; i < cm.classes(); ++i) {
        const auto support = cm.row_sum(i);
        if (support == 0) continue;
        recall_sum += static_cast<double>(cm(i, i)) / static_cast<double>(support);
        ++supported;
    }
    if (supported == 0) throw std::invalid_argument("balanced_accuracy: no class has support");
    if (skipped) *skipped = cm.classes() - supported;
    return recall_sum / static_cast<double>(supported);
}

double cohen_kappa(const ConfusionMatrix& cm) {
    const auto total = cm.total();
    if (total == 0) throw std::invalid_argument("cohen_kappa: empty confusion matrix");
    const double n = static_cast<double>(total);
    const double observed = static_cast<double>(cm.trace()) / n;
    double expected = 0.0;
    for (std::size_t i = 0; i < cm.classes(); ++i)
        expected += static_cast<double>(cm.row_sum(i)) * static_cast<double>(cm.col_sum(i));
    expected /= n * n;
    if (expected == 1.0) return observed == 1.0 ? 1.0 : 0.0;
    return (observed - expected) / (1.0 - expected);
}

EvalReport evaluate(const ConfusionMatrix& cm) {
    EvalReport r;
    r.acc = accuracy(cm);
    r.bac = balanced_accuracy(cm, &r.zero_support_classes);
    r.kappa = cohen_kappa(cm);
    r.confusion = cm;
    return r;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, end);
}

std::string eval_report_csv_header(std::size_t classes) {
    std::string out = "acc,bac,kappa,classes";
    for (std::size_t i = 0; i < classes; ++i)
        for (std::size_t j = 0; j < classes; ++j) out += ",c" + std::to_string(i) + "_" + std::to_string(j);
    return out;
}

std::string eval_report_csv_row(const EvalReport& report) {
    std::string out = format_double(report.acc) + "," + format_double(report.bac) + "," +
                      format_double(report.kappa) + "," + std::to_string(report.confusion.classes());
    for (auto c : report.confusion.counts()) out += "," + std::to_string(c);
    return out;
}

std::string eval_report_json(const EvalReport& report, int indent) {
    nlohmann::json rows = nlohmann::json::array();
    const auto k = report.confusion.classes();
    for (std::size_t i = 0; i < k; ++i) {
        std::vector<std::uint64_t> row(k);
        for (std::size_t j = 0; j < k; ++j) row[j] = report.confusion(i, j);
        rows.push_back(row);
    }
    nlohmann::json j = {
        {"acc", report.acc},
        {"bac", report.bac},
        {"kappa", report.kappa},
        {"zero_support_classes", report.zero_support_classes},
        {"confusion", rows},
    };
    return j.dump(indent);
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y, double alpha) {
    if (x.size() != y.size())
        throw std::invalid_argument("wilcoxon_signed_rank: paired lists of length " + std::to_string(x.size()) +
                                    " and " + std::to_string(y.size()));
    if (x.empty()) throw std::invalid_argument("wilcoxon_signed_rank: no pairs");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("wilcoxon_signed_rank: alpha outside (0, 1)");

    std::vector<double> diffs;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - y[k];
        if (!std::isfinite(d)) throw std::invalid_argument("wilcoxon_signed_rank: non-finite difference");
        if (d != 0.0) diffs.push_back(d);
    }

    WilcoxonResult out;
    out.effective_n = diffs.size();
    if (diffs.empty()) return out;  // W = 0, p = 1

    const std::size_t n = diffs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return std::abs(diffs[a]) < std::abs(diffs[b]); });

    // Ranks doubled so tie averages stay integral.
    std::vector<std::uint64_t> rank2(n);
    double tie_term = 0.0;
    for (std::size_t start = 0; start < n;) {
        std::size_t stop = start + 1;
        while (stop < n && std::abs(diffs[order[stop]]) == std::abs(diffs[order[start]])) ++stop;
        const std::uint64_t r2 = start + 1 + stop;  // 2 * average of ranks start+1..stop
        for (std::size_t k = start; k < stop; ++k) rank2[order[k]] = r2;
        const double t = static_cast<double>(stop - start);
        tie_term += t * t * t - t;
        start = stop;
    }

    std::uint64_t plus2 = 0, minus2 = 0;
    for (std::size_t k = 0; k < n; ++k) (diffs[k] > 0 ? plus2 : minus2) += rank2[k];
    out.w_plus = static_cast<double>(plus2) / 2.0;
    out.w_minus = static_cast<double>(minus2) / 2.0;
    const std::uint64_t stat2 = std::min(plus2, minus2);
    out.statistic = static_cast<double>(stat2) / 2.0;

    if (n <= kWilcoxonExactLimit) {
        // Count sign assignments by their doubled positive-rank sum.
        const std::uint64_t total2 = plus2 + minus2;
        std::vector<double> ways(total2 + 1, 0.0);
        ways[0] = 1.0;
        std::uint64_t reach = 0;
        for (std::size_t k = 0; k < n; ++k) {
            reach += rank2[k];
            for (std::uint64_t s = reach; s >= rank2[k]; --s) ways[s] += ways[s - rank2[k]];
        }
        double tail = 0.0;
        for (std::uint64_t s = 0; s <= stat2; ++s) tail += ways[s];
        out.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
        out.exact = true;
    } else {
        const double nn = static_cast<double>(n);
        const double mean = nn * (nn + 1.0) / 4.0;
        const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
        if (var <= 0.0) {
            out.p_value = 1.0;
        } else {
            const double z = std::min(0.0, out.statistic - mean + 0.5) / std::sqrt(var);
            out.p_value = std::min(1.0, 2.0 * normal_cdf(z));
        }
        out.exact = false;
    }
    out.reject = out.p_value < alpha;
    return out;
}

}  // namespace ebm
