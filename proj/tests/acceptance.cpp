// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "ebm/augment.hpp"
#include "ebm/dbn.hpp"
#include "ebm/experiment.hpp"
#include "ebm/metrics.hpp"
#include "ebm/rbm.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace ebm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

Rbm random_rbm(std::size_t m, std::size_t n, Prng& rng) {
    Rbm r(gaussian_matrix(m, n, 1.0, rng), Vector(m), Vector(n));
    for (double& b : r.visible_bias()) b = rng.gaussian();
    for (double& c : r.hidden_bias()) c = rng.gaussian();
    return r;
}

// 1. Conditionals against the enumerated joint distribution.
Outcome conditional_oracle() {
    Prng rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = 1 + rng.index(8);
        const std::size_t n = 1 + rng.index(12 - m);
        const Rbm r = random_rbm(m, n, rng);
        const JointTable joint = enumerate_joint(r);
        for (std::uint64_t vb = 0; vb < (std::uint64_t{1} << m); ++vb) {
            double pv = 0.0;
            Vector on(n, 0.0);
            for (std::uint64_t hb = 0; hb < (std::uint64_t{1} << n); ++hb) {
                pv += joint.prob(vb, hb);
                for (std::size_t j = 0; j < n; ++j)
                    if ((hb >> j) & 1u) on[j] += joint.prob(vb, hb);
            }
            const Vector got = r.prob_h_given_v(bits_to_vector(vb, m));
            for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(got[j] - on[j] / pv));
        }
        for (std::uint64_t hb = 0; hb < (std::uint64_t{1} << n); ++hb) {
            double ph = 0.0;
            Vector on(m, 0.0);
            for (std::uint64_t vb = 0; vb < (std::uint64_t{1} << m); ++vb) {
                ph += joint.prob(vb, hb);
                for (std::size_t i = 0; i < m; ++i)
                    if ((vb >> i) & 1u) on[i] += joint.prob(vb, hb);
            }
            const Vector got = r.prob_v_given_h(bits_to_vector(hb, n));
            for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, std::abs(got[i] - on[i] / ph));
        }
    }
    return {worst <= 1e-10, "50 RBMs, max abs error " + fmt(worst)};
}

// 2. Gibbs chain visible marginal against enumeration.
Outcome gibbs_convergence() {
    Prng init(202);
    const Rbm r = random_rbm(2, 2, init);
    const auto exact = enumerate_joint(r).visible_marginal();
    Prng rng(203);
    Vector v{0, 0};
    for (int k = 0; k < 5000; ++k) v = r.gibbs_chain(v, 1, rng).visible;
    std::vector<double> hist(4, 0.0);
    const int samples = 100000;
    for (int k = 0; k < samples; ++k) {
        v = r.gibbs_chain(v, 2, rng).visible;  // thinning: keep every second state
        hist[static_cast<std::size_t>(v[0]) | (static_cast<std::size_t>(v[1]) << 1)] += 1.0;
    }
    double tv = 0.0;
    for (std::size_t s = 0; s < 4; ++s) tv += std::abs(hist[s] / samples - exact[s]);
    tv *= 0.5;
    return {tv <= 0.02, "total variation " + fmt(tv)};
}

// 3. Backprop against central finite differences on a 6-4-3 network.
Outcome backprop_correctness() {
    Prng rng(303);
    Rbm layer(gaussian_matrix(6, 4, 0.5, rng), Vector(6), Vector(4));
    for (double& c : layer.hidden_bias()) c = 0.5 * rng.gaussian();
    Vector bias(3);
    for (double& b : bias) b = 0.5 * rng.gaussian();
    DbnClassifier dbn({layer}, gaussian_matrix(4, 3, 0.5, rng), bias);
    std::vector<LabeledSample> batch(8);
    for (auto& s : batch) {
        s.features.resize(6);
        for (double& f : s.features) f = rng.uniform();
        s.label = rng.index(3);
    }
    const auto r = gradcheck::check_dbn(dbn, batch, 1e-5);
    return {r.checked == 43 && r.worst_relative_error <= 1e-4,
            std::to_string(r.checked) + " parameters, max relative error " + fmt(r.worst_relative_error)};
}

// 4. End-to-end learning and augmentation benefit on a synthetic imbalanced set.
//
// Three 8x8 classes share a random binary background. Classes 1 and 2 each
// invert their own block of pixels. Pixels are 0.25 / 0.75 plus Gaussian noise
// with standard deviation 0.2.
Dataset imbalanced_set() {
    constexpr std::size_t dim = 64;
    constexpr int block = 8;
    constexpr double noise = 0.2;
    const std::vector<std::size_t> counts{200, 60, 40};
    Prng rng(404);
    Vector background(dim);
    for (double& b : background) b = rng.uniform() < 0.5 ? 0.0 : 1.0;
    std::vector<Vector> protos(counts.size(), background);
    for (std::size_t c = 1; c < counts.size(); ++c)
        for (int i = 0; i < block; ++i) {
            const std::size_t p = (c - 1) * block + static_cast<std::size_t>(i);
            protos[c][p] = 1.0 - protos[c][p];
        }
    Dataset ds;
    ds.dim = dim;
    ds.class_names = default_class_names(counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c)
        for (std::size_t k = 0; k < counts[c]; ++k) {
            Sample s;
            s.label = c;
            s.features.resize(dim);
            for (std::size_t i = 0; i < dim; ++i)
                s.features[i] = std::clamp(0.25 + 0.5 * protos[c][i] + noise * rng.gaussian(), 0.0, 1.0);
            ds.samples.push_back(std::move(s));
        }
    return ds;
}

Outcome end_to_end_learning() {
    const Dataset ds = imbalanced_set();
    ExperimentConfig base;
    base.architecture = "custom";
    base.hidden_layers = {32, 32};
    base.pretrain = TrainConfig{0.05, 50, 16, 1, 0};
    base.finetune = FineTuneConfig{0.3, 100, 8, 0};
    base.train_fraction = 0.7;
    base.runs = 10;
    base.seed = 2024;
    base.trace_test_metrics = false;

    ExperimentConfig aug = base;
    aug.augmentation.mode = AugmentationMode::balance;
    aug.augmentation.generator = GeneratorKind::rbm;
    aug.augmentation.gibbs_steps = 1;
    aug.augmentation.generator_config.eta = 0.05;
    aug.augmentation.generator_config.hidden_dim = 32;
    aug.augmentation.generator_config.epochs = 100;
    aug.augmentation.generator_config.batch_size = 8;

    const auto plain = run_experiment(ds, base);
    const auto augmented = run_experiment(ds, aug);
    std::size_t improved = 0;
    for (std::size_t r = 0; r < plain.size(); ++r) {
        if (!plain[r].ok || !augmented[r].ok)
            return {false, "run " + std::to_string(r) + " failed: " + plain[r].error + augmented[r].error};
        if (augmented[r].report.bac > plain[r].report.bac) ++improved;
    }
    const auto s = summarize(plain);
    const auto a = summarize(augmented);
    const bool pass = s.bac.mean >= 0.85 && s.kappa.mean >= 0.6 && improved >= 8;
    return {pass, "baseline BAC " + fmt(s.bac.mean) + " kappa " + fmt(s.kappa.mean) + ", Aug-RBM BAC " +
                      fmt(a.bac.mean) + ", improved in " + std::to_string(improved) + "/10 runs"};
}

// 5. Metrics against brute-force definitions.
Outcome metric_oracles() {
    Prng rng(505);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 2 + rng.index(7);
        std::vector<std::vector<std::uint64_t>> table(k, std::vector<std::uint64_t>(k));
        ConfusionMatrix cm(k);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                table[i][j] = rng.index(trial % 2 ? 60 : 4);
                if (i == 0 && j == 0) table[i][j] += 1;
                cm.add(i, j, table[i][j]);
            }
        worst = std::max({worst, std::abs(accuracy(cm) - oracle::accuracy(table)),
                          std::abs(balanced_accuracy(cm) - oracle::balanced_accuracy(table)),
                          std::abs(cohen_kappa(cm) - oracle::kappa(table))});
    }
    const double chance = cohen_kappa(ConfusionMatrix(2, {25, 25, 25, 25}));
    return {worst <= 1e-12 && chance == 0.0,
            "max error " + fmt(worst) + " on 1000 matrices, kappa([[25,25],[25,25]]) = " + fmt(chance)};
}

// 6. Exact Wilcoxon p-values against sign-pattern enumeration.
Outcome wilcoxon_exactness() {
    Prng rng(606);
    double worst = 0.0;
    for (std::size_t n = 1; n <= 10; ++n)
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> x(n), y(n);
            const bool coarse = trial % 2 == 0;
            for (std::size_t i = 0; i < n; ++i) {
                x[i] = coarse ? static_cast<double>(rng.index(5)) : rng.uniform();
                y[i] = coarse ? static_cast<double>(rng.index(5)) : rng.uniform();
            }
            worst = std::max(worst, std::abs(wilcoxon_signed_rank(x, y).p_value - oracle::wilcoxon_enumerated_p(x, y)));
        }
    const std::vector<double> x{1.5, 2.5, 3.5, 4.5, 5.5}, y{1.4, 2.3, 3.2, 4.1, 5.0};
    const double p5 = wilcoxon_signed_rank(x, y).p_value;
    return {worst <= 1e-12 && std::abs(p5 - 0.0625) <= 1e-12,
            "max error " + fmt(worst) + " over n = 1..10, n=5 all-positive p = " + fmt(p5)};
}

// 7. Augmentation bookkeeping for the eggs and larvae presets.
Outcome augmentation_bookkeeping() {
    const Dataset eggs = fixtures::dataset_with_counts(fixtures::kEggsCounts, 4, 707);
    const auto plan = *preset_plan("eggs-paper");
    const auto check = validate_plan(plan, distribution(eggs).counts);
    GenConfig gen = GenConfig::for_generator(GeneratorKind::rbm);
    gen.hidden_dim = 4;
    gen.epochs = 1;
    gen.batch_size = 256;
    gen.seed = 7;
    const auto dist = distribution(apply_plan(eggs, plan, gen).dataset);

    const Dataset larvae = fixtures::dataset_with_counts(fixtures::kLarvaeCounts, 4, 708);
    AugmentationPlan over;
    over.quotas = {{0, 677}};
    const auto larvae_check = validate_plan(over, distribution(larvae).counts);
    bool rejected = false;
    try {
        apply_plan(larvae, over, gen);
    } catch (const PlanViolation&) {
        rejected = true;
    }
    const bool pass = dist.total == 14807 && dist.synthetic_total == 2116 && check.ok && check.cap == 4908 &&
                      check.requested == 2116 && !larvae_check.ok && larvae_check.cap == 676 && rejected;
    return {pass, "eggs total " + std::to_string(dist.total) + " with " + std::to_string(dist.synthetic_total) +
                      " synthetic, cap " + std::to_string(check.cap) + "; larvae 677 " +
                      (rejected ? "rejected" : "accepted") + " (cap " + std::to_string(larvae_check.cap) + ")"};
}

// 8. Two separate ebmctl processes on the same config give identical files.
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "ebm_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    save_dataset((dir / "data.csv").string(), fixtures::prototype_dataset({40, 15, 10}, 16, 0.15, 808),
                 DataFormat::csv);
    const std::vector<std::string> augmentations{
        R"({"mode": "none"})",
        R"({"mode": "balance", "generator": "rbm", "generator_config": {"hidden_dim": 8, "epochs": 5, "eta": 0.05}})",
        R"({"mode": "balance", "generator": "autoencoder", "generator_config": {"hidden_dim": 8, "epochs": 5, "eta": 0.1}})"};
    std::size_t identical = 0;
    std::string failure;
    for (std::size_t c = 0; c < augmentations.size(); ++c) {
        const fs::path config = dir / ("config" + std::to_string(c) + ".json");
        std::ofstream(config) << R"({"dataset": {"path": ")" << (dir / "data.csv").string()
                              << R"("}, "architecture": [12, 6], "pretrain": {"eta": 0.05, "epochs": 4, "batch_size": 8},)"
                              << R"( "finetune": {"eta": 0.3, "epochs": 15, "batch_size": 8}, "runs": 3, "seed": 99,)"
                              << R"( "augmentation": )" << augmentations[c] << "}";
        std::string outputs[2][2];
        for (int e = 0; e < 2; ++e) {
            const fs::path out = dir / ("out" + std::to_string(c) + "_" + std::to_string(e));
            const std::string cmd = std::string(EBMCTL_PATH) + " train -c " + config.string() + " -o " + out.string() +
                                    " > /dev/null 2>&1";
            const int status = std::system(cmd.c_str());
            if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failure = "ebmctl failed on config " + std::to_string(c);
            outputs[e][0] = slurp(out / "summary.csv");
            outputs[e][1] = slurp(out / "trace.csv");
        }
        if (!outputs[0][0].empty() && outputs[0][0] == outputs[1][0] && outputs[0][1] == outputs[1][1]) ++identical;
    }
    fs::remove_all(dir);
    return {failure.empty() && identical == augmentations.size(),
            std::to_string(identical) + "/" + std::to_string(augmentations.size()) +
                " configs byte-identical across two processes" + (failure.empty() ? "" : "; " + failure)};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_seconds;
        std::function<Outcome()> check;
    };
    const std::vector<Criterion> criteria{
        {1, "conditional-probability oracle", 10, conditional_oracle},
        {2, "Gibbs convergence", 30, gibbs_convergence},
        {3, "backprop correctness", 5, backprop_correctness},
        {4, "end-to-end learning", 300, end_to_end_learning},
        {5, "metric oracles", 60, metric_oracles},
        {6, "Wilcoxon exactness", 60, wilcoxon_exactness},
        {7, "augmentation bookkeeping", 60, augmentation_bookkeeping},
        {8, "determinism", 120, determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.check();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs <= c.budget_seconds;
        const bool pass = out.pass && in_time;
        failures += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << out.detail
                  << " [" << fmt(secs) << " s of " << c.budget_seconds << " s]" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
