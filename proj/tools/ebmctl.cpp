// Command-line front end: train, augment, evaluate, compare, inspect.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ebm/augment.hpp"
#include "ebm/binary_io.hpp"
#include "ebm/dataset.hpp"
#include "ebm/dbn.hpp"
#include "ebm/experiment.hpp"
#include "ebm/metrics.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kDataError = 2, kRuntimeError = 3 };

using nlohmann::json;

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ebm::ConfigError("cannot open '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// "a.b.c=value": value is parsed as JSON when possible, else taken as a string.
void apply_override(json& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ebm::ConfigError("override '" + assignment + "' is not of the form key.path=value");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &root;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ebm::ConfigError("override '" + assignment + "' has an empty key segment");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
        node = &(*node)[key];
        start = dot + 1;
    }
}

ebm::AugmentationPlan read_plan(const std::string& path) {
    try {
        return ebm::load_plan(path);
    } catch (const std::exception& e) {
        throw ebm::ConfigError(e.what());
    }
}

std::string output_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv(ebm::kOutputDirEnv); env && *env) return env;
    return "ebm-out";
}

int run_train(const std::string& config_path, const std::vector<std::string>& overrides, const std::string& out_flag) {
    json root = json::parse(read_text(config_path), nullptr, false);
    if (root.is_discarded()) throw ebm::ConfigError("config '" + config_path + "' is not valid JSON");
    for (const auto& o : overrides) apply_override(root, o);
    const ebm::ExperimentConfig cfg = ebm::config_from_json(root.dump());
    if (cfg.dataset_path.empty()) throw ebm::ConfigError("dataset.path is required");
    cfg.validate();
    if (cfg.augmentation.mode == ebm::AugmentationMode::plan_file) read_plan(cfg.augmentation.plan_path);

    const ebm::Dataset ds = ebm::load_dataset(cfg.dataset_path, cfg.dataset_format);
    ds.validate();
    const auto records = ebm::run_experiment(ds, cfg);
    const auto dir = output_dir(out_flag);
    const auto files = ebm::write_report(dir, cfg, records);
    const auto summary = ebm::summarize(records);

    for (const auto& r : records)
        if (!r.ok) std::cerr << "run " << r.run << " failed: " << r.error << '\n';
    std::cout << "runs completed: " << summary.runs_completed << '/' << summary.runs_requested << '\n'
              << "ACC   " << ebm::format_double(summary.acc.mean) << " +- " << ebm::format_double(summary.acc.stddev)
              << '\n'
              << "BAC   " << ebm::format_double(summary.bac.mean) << " +- " << ebm::format_double(summary.bac.stddev)
              << '\n'
              << "kappa " << ebm::format_double(summary.kappa.mean) << " +- "
              << ebm::format_double(summary.kappa.stddev) << '\n'
              << "summary written to " << files.summary.string() << '\n';
    return summary.runs_completed > 0 ? kOk : kRuntimeError;
}

struct AugmentArgs {
    std::string data, format, plan, preset, out, out_format, dump, generator = "rbm";
    bool balance = false;
    std::size_t gibbs_steps = 1;
    std::uint64_t seed = 42;
    std::optional<std::size_t> epochs, hidden, batch;
    std::optional<double> eta, p_drop;
};

int run_augment(const AugmentArgs& a) {
    const auto fmt = a.format.empty() ? ebm::format_from_path(a.data) : ebm::parse_data_format(a.format);
    const ebm::Dataset ds = ebm::load_dataset(a.data, fmt);
    ds.validate();
    const auto counts = ebm::distribution(ds).counts;

    ebm::AugmentationPlan plan;
    const auto kind = ebm::parse_generator_kind(a.generator);
    if (!a.plan.empty()) {
        plan = read_plan(a.plan);
    } else if (!a.preset.empty()) {
        auto p = ebm::preset_plan(a.preset);
        if (!p) throw ebm::ConfigError("unknown preset '" + a.preset + "'");
        plan = *p;
        plan.generator = kind;
        plan.gibbs_steps = a.gibbs_steps;
    } else if (a.balance) {
        plan = ebm::balancing_plan(counts, kind);
        plan.gibbs_steps = a.gibbs_steps;
    } else {
        throw ebm::ConfigError("augment needs one of --plan, --preset or --balance");
    }

    ebm::GenConfig gen = ebm::GenConfig::for_generator(plan.generator);
    gen.seed = a.seed;
    if (a.epochs) gen.epochs = *a.epochs;
    if (a.hidden) gen.hidden_dim = *a.hidden;
    if (a.batch) gen.batch_size = *a.batch;
    if (a.eta) gen.eta = *a.eta;
    if (a.p_drop) gen.p_drop = *a.p_drop;

    const auto result = ebm::apply_plan(ds, plan, gen);
    const auto out_fmt = a.out_format.empty() ? ebm::format_from_path(a.out) : ebm::parse_data_format(a.out_format);
    ebm::save_dataset(a.out, result.dataset, out_fmt);
    if (!a.dump.empty()) {
        ebm::Dataset synthetic{{}, result.dataset.class_names, result.dataset.dim};
        for (const auto& s : result.dataset.samples)
            if (s.synthetic) synthetic.samples.push_back(s);
        ebm::save_dataset(a.dump, synthetic, ebm::DataFormat::csv);
    }
    std::cout << ebm::format_distribution(result.dataset, ebm::distribution(result.dataset));
    return kOk;
}

int run_evaluate(const std::string& model_path, const std::string& data, const std::string& format,
                 const std::string& out) {
    const auto dbn = ebm::load_dbn(model_path);
    const auto fmt = format.empty() ? ebm::format_from_path(data) : ebm::parse_data_format(format);
    ebm::Dataset ds = ebm::load_dataset(data, fmt);
    ds.validate();
    if (ds.dim != dbn.input_dim())
        throw ebm::DataError("dataset dim " + std::to_string(ds.dim) + " does not match model input " +
                             std::to_string(dbn.input_dim()));
    std::erase_if(ds.samples, [](const ebm::Sample& s) { return s.synthetic; });
    for (const auto& s : ds.samples)
        if (s.label >= dbn.num_classes())
            throw ebm::DataError("label " + std::to_string(s.label) + " outside the model's " +
                                 std::to_string(dbn.num_classes()) + " classes");
    const auto report = ebm::evaluate_classifier(dbn, ds);
    const std::string text = ebm::eval_report_json(report);
    std::cout << text << '\n';
    if (!out.empty()) {
        std::ofstream f(out, std::ios::binary);
        if (!f) throw std::runtime_error("cannot open '" + out + "' for writing");
        f << ebm::eval_report_csv_header(report.confusion.classes()) << '\n'
          << ebm::eval_report_csv_row(report) << '\n';
    }
    return kOk;
}

int run_compare(const std::string& a, const std::string& b, const std::string& metric, double alpha) {
    const auto ra = ebm::read_summary(a);
    const auto rb = ebm::read_summary(b);
    std::vector<std::string> metrics;
    if (metric == "all")
        metrics = {"acc", "bac", "kappa"};
    else
        metrics = {metric};
    json out = json::array();
    for (const auto& m : metrics)
        out.push_back(json::parse(ebm::comparison_to_json(ebm::compare_summaries(ra, rb, m, alpha))));
    std::cout << (metrics.size() == 1 ? out[0] : out).dump(2) << '\n';
    return kOk;
}

int run_inspect(const std::string& data, const std::string& format, const std::string& model,
                const std::string& plan_path, const std::string& preset) {
    bool did = false;
    std::optional<ebm::Dataset> ds;
    if (!data.empty()) {
        const auto fmt = format.empty() ? ebm::format_from_path(data) : ebm::parse_data_format(format);
        ds = ebm::load_dataset(data, fmt);
        ds->validate();
        std::cout << "dim\t" << ds->dim << '\n' << ebm::format_distribution(*ds, ebm::distribution(*ds));
        did = true;
    }
    if (!model.empty()) {
        std::cout << ebm::dbn_to_json(ebm::load_dbn(model)) << '\n';
        did = true;
    }
    std::optional<ebm::AugmentationPlan> plan;
    if (!plan_path.empty()) plan = read_plan(plan_path);
    if (!preset.empty()) {
        plan = ebm::preset_plan(preset);
        if (!plan) throw ebm::ConfigError("unknown preset '" + preset + "'");
    }
    if (plan) {
        std::cout << ebm::plan_to_json(*plan) << '\n';
        if (ds) {
            const auto v = ebm::validate_plan(*plan, ebm::distribution(*ds).counts);
            std::cout << (v.ok ? "plan ok: " : "plan violation: ") << v.message << '\n';
            if (!v.ok) return kConfigError;
        }
        did = true;
    }
    if (!did) throw ebm::ConfigError("inspect needs --data, --model, --plan or --preset");
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Restricted Boltzmann machine / deep belief network experiments"};
    app.require_subcommand(1);

    auto* train = app.add_subcommand("train", "Run a configured experiment and write reports");
    std::string config_path, out_dir;
    std::vector<std::string> overrides;
    train->add_option("-c,--config", config_path, "Experiment config (JSON)")->required();
    train->add_option("-s,--set", overrides, "Override a config value, e.g. --set pretrain.epochs=5");
    train->add_option("-o,--out", out_dir, std::string("Output directory (default $") + ebm::kOutputDirEnv +
                                               " or ./ebm-out)");

    auto* augment = app.add_subcommand("augment", "Oversample minority classes of a dataset");
    AugmentArgs aug;
    augment->add_option("-d,--data", aug.data, "Input dataset")->required();
    augment->add_option("--format", aug.format, "csv or binary (default: from extension)");
    augment->add_option("-o,--out", aug.out, "Augmented dataset output")->required();
    augment->add_option("--out-format", aug.out_format, "csv or binary (default: from extension)");
    auto* plan_opt = augment->add_option("--plan", aug.plan, "Plan file (JSON)");
    auto* preset_opt = augment->add_option("--preset", aug.preset, "eggs-paper, larvae-paper or protozoa-paper");
    auto* balance_opt = augment->add_flag("--balance", aug.balance, "Fill deficits toward the majority within the cap");
    plan_opt->excludes(preset_opt)->excludes(balance_opt);
    preset_opt->excludes(balance_opt);
    augment->add_option("--generator", aug.generator, "rbm or autoencoder");
    augment->add_option("--gibbs-steps", aug.gibbs_steps, "Gibbs steps per RBM sample");
    augment->add_option("--seed", aug.seed, "Generator seed");
    augment->add_option("--epochs", aug.epochs, "Generator epochs");
    augment->add_option("--hidden", aug.hidden, "Generator hidden units");
    augment->add_option("--batch", aug.batch, "Generator batch size");
    augment->add_option("--eta", aug.eta, "Generator learning rate");
    augment->add_option("--p-drop", aug.p_drop, "Autoencoder dropout probability");
    augment->add_option("--dump", aug.dump, "Also write the synthetic samples alone to this CSV");

    auto* evaluate = app.add_subcommand("evaluate", "Score a saved classifier on a dataset");
    std::string model_path, eval_data, eval_format, eval_out;
    evaluate->add_option("-m,--model", model_path, "Classifier file (.dbn)")->required();
    evaluate->add_option("-d,--data", eval_data, "Dataset")->required();
    evaluate->add_option("--format", eval_format, "csv or binary");
    evaluate->add_option("-o,--out", eval_out, "Write the report as a CSV record");

    auto* compare = app.add_subcommand("compare", "Wilcoxon signed-rank test on two summary files");
    std::string summary_a, summary_b, metric = "all";
    double alpha = 0.05;
    compare->add_option("first", summary_a, "summary.csv")->required();
    compare->add_option("second", summary_b, "summary.csv")->required();
    compare->add_option("--metric", metric, "acc, bac, kappa or all")
        ->check(CLI::IsMember({"acc", "bac", "kappa", "all"}));
    compare->add_option("--alpha", alpha, "Significance level")->check(CLI::Range(0.0, 1.0));

    auto* inspect = app.add_subcommand("inspect", "Print a dataset distribution, model or plan");
    std::string in_data, in_format, in_model, in_plan, in_preset;
    inspect->add_option("-d,--data", in_data, "Dataset");
    inspect->add_option("--format", in_format, "csv or binary");
    inspect->add_option("-m,--model", in_model, "Classifier file");
    inspect->add_option("--plan", in_plan, "Plan file");
    inspect->add_option("--preset", in_preset, "Plan preset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*train) return run_train(config_path, overrides, out_dir);
        if (*augment) return run_augment(aug);
        if (*evaluate) return run_evaluate(model_path, eval_data, eval_format, eval_out);
        if (*compare) return run_compare(summary_a, summary_b, metric, alpha);
        if (*inspect) return run_inspect(in_data, in_format, in_model, in_plan, in_preset);
    } catch (const ebm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const ebm::PlanViolation& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const ebm::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const ebm::FormatError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kRuntimeError;
}
