#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ebm {

/// Rows are the true class, columns the predicted class.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t classes);
    ConfusionMatrix(std::size_t classes, std::vector<std::uint64_t> counts);

    std::size_t classes() const noexcept { return classes_; }
    std::uint64_t operator()(std::size_t truth, std::size_t pred) const noexcept {
        return counts_[truth * classes_ + pred];
    }
    void add(std::size_t truth, std::size_t pred, std::uint64_t count = 1);

    std::uint64_t total() const noexcept;
    std::uint64_t trace() const noexcept;
    std::uint64_t row_sum(std::size_t truth) const noexcept;
    std::uint64_t col_sum(std::size_t pred) const noexcept;
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t classes_ = 0;
    std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion_from_predictions(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                                           std::size_t classes);

double accuracy(const ConfusionMatrix& cm);

/// Mean per-class recall over classes with non-zero support. Classes without
/// support are skipped; `skipped`, when given, receives how many.
double balanced_accuracy(const ConfusionMatrix& cm, std::size_t* skipped = nullptr);

double cohen_kappa(const ConfusionMatrix& cm);

struct EvalReport {
    double acc = 0.0;
    double bac = 0.0;
    double kappa = 0.0;
    ConfusionMatrix confusion;
    std::size_t zero_support_classes = 0;
};

EvalReport evaluate(const ConfusionMatrix& cm);

/// "acc,bac,kappa,classes,c0_0,c0_1,..." with shortest round-trip doubles.
std::string eval_report_csv_header(std::size_t classes);
std::string eval_report_csv_row(const EvalReport& report);
std::string eval_report_json(const EvalReport& report, int indent = 2);

struct WilcoxonResult {
    double statistic = 0.0;       ///< min(W+, W-)
    double w_plus = 0.0;
    double w_minus = 0.0;
    double p_value = 1.0;
    bool reject = false;
    std::size_t effective_n = 0;  ///< pairs with non-zero difference
    bool exact = true;
};

inline constexpr std::size_t kWilcoxonExactLimit = 25;

/// Two-sided Wilcoxon signed-rank test. Zero differences are dropped, ties
/// get average ranks. Exact null distribution up to kWilcoxonExactLimit
/// non-zero pairs, tie- and continuity-corrected normal approximation above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y, double alpha = 0.05);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace ebm
