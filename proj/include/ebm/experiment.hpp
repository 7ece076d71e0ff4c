#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ebm/augment.hpp"
#include "ebm/dataset.hpp"
#include "ebm/dbn.hpp"
#include "ebm/metrics.hpp"
#include "ebm/rbm.hpp"

namespace ebm {

/// Config problems (unknown architecture, bad values, unreadable file).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class AugmentationMode { none, plan_file, preset, balance };

struct AugmentationSettings {
    AugmentationMode mode = AugmentationMode::none;
    std::string plan_path;
    std::string preset;
    GeneratorKind generator = GeneratorKind::rbm;
    std::size_t gibbs_steps = 1;
    GenConfig generator_config = GenConfig::for_generator(GeneratorKind::rbm);
};

struct ExperimentConfig {
    std::string dataset_path;
    DataFormat dataset_format = DataFormat::csv;
    /// "rbm-500", "dbn-2", "dbn-3" or "custom" (then hidden_layers is used).
    std::string architecture = "dbn-2";
    std::vector<std::size_t> hidden_layers;
    AugmentationSettings augmentation;
    TrainConfig pretrain{1e-5, 100, 64, 1, 0};
    FineTuneConfig finetune{1e-5, 100, 128, 0};
    double train_fraction = 0.7;
    std::size_t runs = 10;
    std::uint64_t seed = 42;
    /// Evaluate the test split after every fine-tuning epoch.
    bool trace_test_metrics = true;
    bool dump_synthetic = false;
    bool save_models = false;

    void validate() const;
};

/// Hidden sizes for a named architecture; throws ConfigError on unknown names.
std::vector<std::size_t> expand_architecture(const std::string& name, const std::vector<std::size_t>& custom);

/// (input_dim, hidden...) for a given input dimension.
std::vector<std::size_t> layer_dims(const ExperimentConfig& cfg, std::size_t input_dim);

ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg, int indent = 2);
ExperimentConfig load_config(const std::string& path);

struct FineTuneEpoch {
    std::size_t epoch = 0;
    double loss = 0.0;
    std::optional<EvalReport> test;
};

struct RunRecord {
    std::size_t run = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    EvalReport report;
    std::vector<std::vector<EpochTrace>> pretrain_traces;
    std::vector<FineTuneEpoch> finetune_trace;
    std::map<std::size_t, std::vector<double>> generator_traces;
    std::vector<std::size_t> train_counts;
    std::vector<std::size_t> synthetic_counts;
    std::vector<Sample> synthetic_samples;  ///< only kept when dump_synthetic
    std::optional<DbnClassifier> model;    ///< only kept when save_models
};

struct MetricSummary {
    double mean = 0.0;
    double stddev = 0.0;  ///< sample standard deviation, 0 with fewer than 2 runs
};

struct ExperimentSummary {
    std::size_t runs_requested = 0;
    std::size_t runs_completed = 0;
    MetricSummary acc, bac, kappa;
};

ExperimentSummary summarize(const std::vector<RunRecord>& records);
MetricSummary mean_and_stddev(const std::vector<double>& values);

/// Run seed r is derive_seed(cfg.seed, r). Split, augment the train
/// partition only, pretrain, fine-tune and evaluate on the test partition.
/// A failing stage marks that run as failed; the remaining runs continue.
RunRecord run_single(const Dataset& ds, const ExperimentConfig& cfg, std::size_t run);
std::vector<RunRecord> run_experiment(const Dataset& ds, const ExperimentConfig& cfg);

/// Predict every test sample and build the report.
EvalReport evaluate_classifier(const DbnClassifier& dbn, const Dataset& test);

struct ReportFiles {
    std::filesystem::path summary, trace, pretrain_trace, confusion, config, synthetic;
};

/// Writes summary.csv, trace.csv, pretrain_trace.csv, confusion.csv and
/// config.json (plus synthetic.csv / run_<r>.dbn when enabled) into `dir`.
ReportFiles write_report(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                         const std::vector<RunRecord>& records);

/// Per-run metric columns read back from a summary.csv.
struct SummaryRuns {
    std::vector<std::size_t> runs;
    std::vector<double> acc, bac, kappa;
    const std::vector<double>& metric(const std::string& name) const;
};

SummaryRuns read_summary(const std::filesystem::path& path);

struct Comparison {
    std::string metric;
    WilcoxonResult result;
    double alpha = 0.05;
};

/// Paired Wilcoxon signed-rank test on one metric of two summaries.
Comparison compare_summaries(const SummaryRuns& a, const SummaryRuns& b, const std::string& metric,
                             double alpha = 0.05);

std::string comparison_to_json(const Comparison& cmp, int indent = 2);

inline constexpr const char* kOutputDirEnv = "EBM_OUTPUT_DIR";

}  // namespace ebm
