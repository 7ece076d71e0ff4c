#include "ebm/experiment.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ebm {

using nlohmann::json;

namespace {

const char* mode_name(AugmentationMode m) {
    switch (m) {
    case AugmentationMode::none: return "none";
    case AugmentationMode::plan_file: return "plan";
    case AugmentationMode::preset: return "preset";
    case AugmentationMode::balance: return "balance";
    }
    return "none";
}

AugmentationMode parse_mode(const std::string& s) {
    if (s == "none") return AugmentationMode::none;
    if (s == "plan") return AugmentationMode::plan_file;
    if (s == "preset") return AugmentationMode::preset;
    if (s == "balance") return AugmentationMode::balance;
    throw ConfigError("augmentation.mode must be none, plan, preset or balance, got '" + s + "'");
}

// Rejects keys outside `allowed` so typos surface as config errors.
void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <class T>
void read_field(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

void read_count(const json& obj, const char* key, std::size_t& out, const std::string& where) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
    out = v.get<std::size_t>();
}

}  // namespace

void ExperimentConfig::validate() const {
    try {
        pretrain.validate();
        finetune.validate();
        augmentation.generator_config.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("split.train_fraction must lie in (0, 1)");
    if (runs == 0) throw ConfigError("runs must be >= 1");
    if (augmentation.gibbs_steps == 0) throw ConfigError("augmentation.gibbs_steps must be >= 1");
    if (augmentation.mode == AugmentationMode::plan_file && augmentation.plan_path.empty())
        throw ConfigError("augmentation.mode is plan but augmentation.plan is empty");
    if (augmentation.mode == AugmentationMode::preset && !preset_plan(augmentation.preset))
        throw ConfigError("unknown augmentation preset '" + augmentation.preset + "'");
    expand_architecture(architecture, hidden_layers);
}

std::vector<std::size_t> expand_architecture(const std::string& name, const std::vector<std::size_t>& custom) {
    if (name == "rbm-500") return {500};
    if (name == "dbn-2") return {500, 500};
    if (name == "dbn-3") return {2000, 2000, 500};
    if (name == "custom") {
        if (custom.empty()) throw ConfigError("custom architecture needs a non-empty hidden layer list");
        for (auto h : custom)
            if (h == 0) throw ConfigError("hidden layer sizes must be >= 1");
        return custom;
    }
    throw ConfigError("unknown architecture '" + name + "' (expected rbm-500, dbn-2, dbn-3 or custom)");
}

std::vector<std::size_t> layer_dims(const ExperimentConfig& cfg, std::size_t input_dim) {
    std::vector<std::size_t> dims{input_dim};
    for (auto h : expand_architecture(cfg.architecture, cfg.hidden_layers)) dims.push_back(h);
    return dims;
}

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j, {"dataset", "architecture", "hidden_layers", "augmentation", "pretrain", "finetune", "split", "runs",
                   "seed", "output"},
               "config");
    ExperimentConfig cfg;
    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        check_keys(d, {"path", "format"}, "dataset");
        read_field(d, "path", cfg.dataset_path, "dataset");
        if (d.contains("format")) {
            try {
                cfg.dataset_format = parse_data_format(d["format"].get<std::string>());
            } catch (const std::exception& e) {
                throw ConfigError(std::string("dataset.format: ") + e.what());
            }
        } else if (!cfg.dataset_path.empty()) {
            cfg.dataset_format = format_from_path(cfg.dataset_path);
        }
    }
    if (j.contains("architecture")) {
        const auto& a = j["architecture"];
        if (a.is_array()) {
            cfg.architecture = "custom";
            for (const auto& h : a) {
                if (!h.is_number_unsigned()) throw ConfigError("architecture entries must be positive integers");
                cfg.hidden_layers.push_back(h.get<std::size_t>());
            }
        } else {
            read_field(j, "architecture", cfg.architecture, "config");
        }
    }
    if (j.contains("hidden_layers")) {
        cfg.hidden_layers.clear();
        for (const auto& h : j["hidden_layers"]) {
            if (!h.is_number_unsigned()) throw ConfigError("hidden_layers entries must be positive integers");
            cfg.hidden_layers.push_back(h.get<std::size_t>());
        }
    }
    if (j.contains("augmentation")) {
        const auto& a = j["augmentation"];
        check_keys(a, {"mode", "plan", "preset", "generator", "gibbs_steps", "generator_config"}, "augmentation");
        auto& aug = cfg.augmentation;
        if (a.contains("mode")) aug.mode = parse_mode(a["mode"].get<std::string>());
        read_field(a, "plan", aug.plan_path, "augmentation");
        read_field(a, "preset", aug.preset, "augmentation");
        if (a.contains("generator")) {
            try {
                aug.generator = parse_generator_kind(a["generator"].get<std::string>());
            } catch (const std::exception& e) {
                throw ConfigError(std::string("augmentation.generator: ") + e.what());
            }
        }
        aug.generator_config = GenConfig::for_generator(aug.generator);
        read_count(a, "gibbs_steps", aug.gibbs_steps, "augmentation");
        if (a.contains("generator_config")) {
            const auto& g = a["generator_config"];
            check_keys(g, {"eta", "epochs", "batch_size", "hidden_dim", "p_drop", "cd_k"},
                       "augmentation.generator_config");
            auto& gc = aug.generator_config;
            read_field(g, "eta", gc.eta, "augmentation.generator_config");
            read_count(g, "epochs", gc.epochs, "augmentation.generator_config");
            read_count(g, "batch_size", gc.batch_size, "augmentation.generator_config");
            read_count(g, "hidden_dim", gc.hidden_dim, "augmentation.generator_config");
            read_field(g, "p_drop", gc.p_drop, "augmentation.generator_config");
            read_count(g, "cd_k", gc.cd_k, "augmentation.generator_config");
        }
    }
    if (j.contains("pretrain")) {
        const auto& p = j["pretrain"];
        check_keys(p, {"eta", "epochs", "batch_size", "cd_k"}, "pretrain");
        read_field(p, "eta", cfg.pretrain.eta, "pretrain");
        read_count(p, "epochs", cfg.pretrain.epochs, "pretrain");
        read_count(p, "batch_size", cfg.pretrain.batch_size, "pretrain");
        read_count(p, "cd_k", cfg.pretrain.cd_k, "pretrain");
    }
    if (j.contains("finetune")) {
        const auto& f = j["finetune"];
        check_keys(f, {"eta", "epochs", "batch_size"}, "finetune");
        read_field(f, "eta", cfg.finetune.eta, "finetune");
        read_count(f, "epochs", cfg.finetune.epochs, "finetune");
        read_count(f, "batch_size", cfg.finetune.batch_size, "finetune");
    }
    if (j.contains("split")) {
        check_keys(j["split"], {"train_fraction"}, "split");
        read_field(j["split"], "train_fraction", cfg.train_fraction, "split");
    }
    read_count(j, "runs", cfg.runs, "config");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
        cfg.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("output")) {
        const auto& o = j["output"];
        check_keys(o, {"trace_test_metrics", "dump_synthetic", "save_models"}, "output");
        read_field(o, "trace_test_metrics", cfg.trace_test_metrics, "output");
        read_field(o, "dump_synthetic", cfg.dump_synthetic, "output");
        read_field(o, "save_models", cfg.save_models, "output");
    }
    cfg.validate();
    return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg, int indent) {
    const auto& gc = cfg.augmentation.generator_config;
    json j = {
        {"dataset", {{"path", cfg.dataset_path}, {"format", cfg.dataset_format == DataFormat::csv ? "csv" : "binary"}}},
        {"architecture", cfg.architecture},
        {"hidden_layers", expand_architecture(cfg.architecture, cfg.hidden_layers)},
        {"augmentation",
         {{"mode", mode_name(cfg.augmentation.mode)},
          {"plan", cfg.augmentation.plan_path},
          {"preset", cfg.augmentation.preset},
          {"generator", to_string(cfg.augmentation.generator)},
          {"gibbs_steps", cfg.augmentation.gibbs_steps},
          {"generator_config",
           {{"eta", gc.eta},
            {"epochs", gc.epochs},
            {"batch_size", gc.batch_size},
            {"hidden_dim", gc.hidden_dim},
            {"p_drop", gc.p_drop},
            {"cd_k", gc.cd_k}}}}},
        {"pretrain",
         {{"eta", cfg.pretrain.eta},
          {"epochs", cfg.pretrain.epochs},
          {"batch_size", cfg.pretrain.batch_size},
          {"cd_k", cfg.pretrain.cd_k}}},
        {"finetune",
         {{"eta", cfg.finetune.eta}, {"epochs", cfg.finetune.epochs}, {"batch_size", cfg.finetune.batch_size}}},
        {"split", {{"train_fraction", cfg.train_fraction}}},
        {"runs", cfg.runs},
        {"seed", cfg.seed},
        {"output",
         {{"trace_test_metrics", cfg.trace_test_metrics},
          {"dump_synthetic", cfg.dump_synthetic},
          {"save_models", cfg.save_models}}},
    };
    return j.dump(indent);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return config_from_json(text.str());
}

MetricSummary mean_and_stddev(const std::vector<double>& values) {
    MetricSummary s;
    if (values.empty()) return s;
    double total = 0.0;
    for (double v : values) total += v;
    s.mean = total / static_cast<double>(values.size());
    if (values.size() > 1) {
        double sq = 0.0;
        for (double v : values) sq += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return s;
}

ExperimentSummary summarize(const std::vector<RunRecord>& records) {
    ExperimentSummary s;
    s.runs_requested = records.size();
    std::vector<double> acc, bac, kappa;
    for (const auto& r : records) {
        if (!r.ok) continue;
        acc.push_back(r.report.acc);
        bac.push_back(r.report.bac);
        kappa.push_back(r.report.kappa);
    }
    s.runs_completed = acc.size();
    s.acc = mean_and_stddev(acc);
    s.bac = mean_and_stddev(bac);
    s.kappa = mean_and_stddev(kappa);
    return s;
}

EvalReport evaluate_classifier(const DbnClassifier& dbn, const Dataset& test) {
    ConfusionMatrix cm(dbn.num_classes());
    for (const auto& s : test.samples) cm.add(s.label, dbn.predict(s.features));
    return evaluate(cm);
}

namespace {

std::vector<LabeledSample> labeled(const Dataset& ds) {
    std::vector<LabeledSample> out;
    out.reserve(ds.samples.size());
    for (const auto& s : ds.samples) out.push_back({s.features, s.label});
    return out;
}

AugmentationPlan plan_for(const ExperimentConfig& cfg, const std::vector<std::size_t>& counts) {
    const auto& aug = cfg.augmentation;
    AugmentationPlan plan;
    switch (aug.mode) {
    case AugmentationMode::none: break;
    case AugmentationMode::plan_file: plan = load_plan(aug.plan_path); break;
    case AugmentationMode::preset: plan = *preset_plan(aug.preset); break;
    case AugmentationMode::balance: plan = balancing_plan(counts, aug.generator); break;
    }
    if (aug.mode != AugmentationMode::plan_file) {
        plan.generator = aug.generator;
        plan.gibbs_steps = aug.gibbs_steps;
    }
    return plan;
}

}  // namespace

RunRecord run_single(const Dataset& ds, const ExperimentConfig& cfg, std::size_t run) {
    RunRecord rec;
    rec.run = run;
    rec.seed = derive_seed(cfg.seed, run);
    try {
        Prng seeds(rec.seed);
        const std::uint64_t split_seed = seeds.next();
        const std::uint64_t augment_seed = seeds.next();
        const std::uint64_t pretrain_seed = seeds.next();
        const std::uint64_t finetune_seed = seeds.next();

        Split split = stratified_split(ds, cfg.train_fraction, split_seed);
        Dataset train = std::move(split.train);
        const std::size_t classes = ds.num_classes();

        if (cfg.augmentation.mode != AugmentationMode::none) {
            auto counts = distribution(train).counts;
            counts.resize(std::max(counts.size(), classes), 0);
            const AugmentationPlan plan = plan_for(cfg, counts);
            GenConfig gen = cfg.augmentation.generator_config;
            gen.seed = augment_seed;
            const std::size_t original = train.samples.size();
            AugmentResult aug = apply_plan(train, plan, gen);
            train = std::move(aug.dataset);
            rec.generator_traces = std::move(aug.generator_traces);
            if (cfg.dump_synthetic)
                rec.synthetic_samples.assign(train.samples.begin() + static_cast<std::ptrdiff_t>(original),
                                             train.samples.end());
        }
        const auto dist = distribution(train);
        rec.train_counts = dist.counts;
        rec.synthetic_counts = dist.synthetic_counts;

        std::vector<Vector> features;
        features.reserve(train.samples.size());
        for (const auto& s : train.samples) features.push_back(s.features);
        const auto dims = layer_dims(cfg, ds.dim);
        TrainConfig pre = cfg.pretrain;
        pre.seed = pretrain_seed;
        Prng pretrain_rng(pretrain_seed);
        PretrainResult pretrained = greedy_pretrain(dims, features, classes, pre, pretrain_rng);
        rec.pretrain_traces = std::move(pretrained.traces);
        DbnClassifier dbn = std::move(pretrained.classifier);

        FineTuneConfig ft = cfg.finetune;
        ft.seed = finetune_seed;
        Prng finetune_rng(finetune_seed);
        const auto train_labeled = labeled(train);
        const Dataset& test = split.test;
        dbn.fine_tune(train_labeled, ft, finetune_rng, [&](std::size_t epoch, double loss) {
            FineTuneEpoch e{epoch, loss, std::nullopt};
            if (cfg.trace_test_metrics) e.test = evaluate_classifier(dbn, test);
            rec.finetune_trace.push_back(std::move(e));
        });
        rec.report = evaluate_classifier(dbn, test);
        if (cfg.save_models) rec.model = std::move(dbn);
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
    }
    return rec;
}

std::vector<RunRecord> run_experiment(const Dataset& ds, const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<RunRecord> records;
    records.reserve(cfg.runs);
    for (std::size_t r = 0; r < cfg.runs; ++r) records.push_back(run_single(ds, cfg, r));
    return records;
}

namespace {

std::string csv_safe(std::string s) {
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r') c = ';';
    return s;
}

std::ofstream open_output(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
    return out;
}

}  // namespace

ReportFiles write_report(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                         const std::vector<RunRecord>& records) {
    if (records.empty()) throw std::invalid_argument("write_report: no run records");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());

    ReportFiles files{dir / "summary.csv",   dir / "trace.csv",   dir / "pretrain_trace.csv",
                      dir / "confusion.csv", dir / "config.json", {}};
    const ExperimentSummary summary = summarize(records);

    {
        auto out = open_output(files.summary);
        out << "# runs_completed," << summary.runs_completed << ',' << summary.runs_requested << '\n';
        out << "run,seed,status,acc,bac,kappa,error\n";
        for (const auto& r : records) {
            out << r.run << ',' << r.seed << ',' << (r.ok ? "ok" : "failed") << ',';
            if (r.ok)
                out << format_double(r.report.acc) << ',' << format_double(r.report.bac) << ','
                    << format_double(r.report.kappa) << ',';
            else
                out << ",,," << csv_safe(r.error);
            out << '\n';
        }
        out << "mean,,," << format_double(summary.acc.mean) << ',' << format_double(summary.bac.mean) << ','
            << format_double(summary.kappa.mean) << ",\n";
        out << "std,,," << format_double(summary.acc.stddev) << ',' << format_double(summary.bac.stddev) << ','
            << format_double(summary.kappa.stddev) << ",\n";
    }
    {
        auto out = open_output(files.trace);
        out << "run,epoch,loss,test_acc,test_bac,test_kappa\n";
        for (const auto& r : records)
            for (const auto& e : r.finetune_trace) {
                out << r.run << ',' << e.epoch << ',' << format_double(e.loss);
                if (e.test)
                    out << ',' << format_double(e.test->acc) << ',' << format_double(e.test->bac) << ','
                        << format_double(e.test->kappa);
                else
                    out << ",,,";
                out << '\n';
            }
    }
    {
        auto out = open_output(files.pretrain_trace);
        out << "run,layer,epoch,reconstruction_error\n";
        for (const auto& r : records)
            for (std::size_t l = 0; l < r.pretrain_traces.size(); ++l)
                for (const auto& e : r.pretrain_traces[l])
                    out << r.run << ',' << l << ',' << e.epoch << ',' << format_double(e.mean_reconstruction_error)
                        << '\n';
    }
    {
        auto out = open_output(files.confusion);
        out << "run,true,pred,count\n";
        for (const auto& r : records) {
            if (!r.ok) continue;
            const auto& cm = r.report.confusion;
            for (std::size_t i = 0; i < cm.classes(); ++i)
                for (std::size_t j = 0; j < cm.classes(); ++j)
                    out << r.run << ',' << i << ',' << j << ',' << cm(i, j) << '\n';
        }
    }
    {
        auto out = open_output(files.config);
        out << config_to_json(cfg) << '\n';
    }
    if (cfg.dump_synthetic) {
        files.synthetic = dir / "synthetic.csv";
        auto out = open_output(files.synthetic);
        out << "run,label,features...\n";
        for (const auto& r : records)
            for (const auto& s : r.synthetic_samples) {
                out << r.run << ',' << s.label;
                for (double f : s.features) out << ',' << format_double(f);
                out << '\n';
            }
    }
    if (cfg.save_models)
        for (const auto& r : records)
            if (r.model) save_dbn((dir / ("run_" + std::to_string(r.run) + ".dbn")).string(), *r.model);
    return files;
}

const std::vector<double>& SummaryRuns::metric(const std::string& name) const {
    if (name == "acc") return acc;
    if (name == "bac") return bac;
    if (name == "kappa") return kappa;
    throw std::invalid_argument("unknown metric '" + name + "' (expected acc, bac or kappa)");
}

SummaryRuns read_summary(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open summary '" + path.string() + "'");
    SummaryRuns out;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        if (!header) {
            if (!line.starts_with("run,seed,status,acc,bac,kappa"))
                throw std::runtime_error(path.string() + ": not a summary file (bad header)");
            header = true;
            continue;
        }
        if (line.starts_with("mean,") || line.starts_with("std,")) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() < 6)
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": truncated row");
        if (fields[2] != "ok") continue;
        try {
            out.runs.push_back(std::stoul(fields[0]));
            out.acc.push_back(std::stod(fields[3]));
            out.bac.push_back(std::stod(fields[4]));
            out.kappa.push_back(std::stod(fields[5]));
        } catch (const std::exception&) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed number");
        }
    }
    if (!header) throw std::runtime_error(path.string() + ": not a summary file (no header)");
    return out;
}

Comparison compare_summaries(const SummaryRuns& a, const SummaryRuns& b, const std::string& metric, double alpha) {
    if (a.runs != b.runs)
        throw std::invalid_argument("summaries cover different runs (" + std::to_string(a.runs.size()) + " vs " +
                                    std::to_string(b.runs.size()) + " completed)");
    Comparison c;
    c.metric = metric;
    c.alpha = alpha;
    c.result = wilcoxon_signed_rank(a.metric(metric), b.metric(metric), alpha);
    return c;
}

std::string comparison_to_json(const Comparison& cmp, int indent) {
    json j = {
        {"metric", cmp.metric},
        {"alpha", cmp.alpha},
        {"n", cmp.result.effective_n},
        {"w_plus", cmp.result.w_plus},
        {"w_minus", cmp.result.w_minus},
        {"statistic", cmp.result.statistic},
        {"p_value", cmp.result.p_value},
        {"exact", cmp.result.exact},
        {"reject", cmp.result.reject},
    };
    return j.dump(indent);
}

}  // namespace ebm
