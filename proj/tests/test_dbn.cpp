#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "ebm/binary_io.hpp"
#include "ebm/dbn.hpp"
#include "gradcheck.hpp"

using namespace ebm;

namespace {

DbnClassifier random_dbn(const std::vector<std::size_t>& dims, std::size_t classes, Prng& rng, double scale) {
    std::vector<Rbm> layers;
    for (std::size_t l = 1; l < dims.size(); ++l) {
        Rbm r(gaussian_matrix(dims[l - 1], dims[l], scale, rng), Vector(dims[l - 1]), Vector(dims[l]));
        for (double& c : r.hidden_bias()) c = scale * rng.gaussian();
        for (double& b : r.visible_bias()) b = scale * rng.gaussian();
        layers.push_back(std::move(r));
    }
    Vector bias(classes);
    for (double& b : bias) b = scale * rng.gaussian();
    return DbnClassifier(std::move(layers), gaussian_matrix(dims.back(), classes, scale, rng), std::move(bias));
}

std::vector<LabeledSample> random_batch(std::size_t n, std::size_t dim, std::size_t classes, Prng& rng) {
    std::vector<LabeledSample> out(n);
    for (auto& s : out) {
        s.features.resize(dim);
        for (double& f : s.features) f = rng.uniform();
        s.label = rng.index(classes);
    }
    return out;
}

// Two classes split by the sign of (first half mean - second half mean).
std::vector<LabeledSample> separable_set(std::size_t n, Prng& rng) {
    std::vector<LabeledSample> out;
    for (std::size_t k = 0; k < n; ++k) {
        LabeledSample s;
        s.label = k % 2;
        s.features.resize(8);
        for (std::size_t i = 0; i < 8; ++i) {
            const bool hot = (i < 4) == (s.label == 0);
            s.features[i] = hot ? 0.7 + 0.3 * rng.uniform() : 0.3 * rng.uniform();
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Vector> features_of(const std::vector<LabeledSample>& data) {
    std::vector<Vector> out;
    for (const auto& s : data) out.push_back(s.features);
    return out;
}

}  // namespace

TEST(GreedyPretrain, SingleLayerIsPlainRbmTraining) {
    Prng data_rng(1);
    const auto data = features_of(random_batch(20, 6, 2, data_rng));
    const TrainConfig cfg{0.05, 10, 4, 1, 0};
    const std::vector<std::size_t> dims{6, 4};

    Prng a(7);
    const auto result = greedy_pretrain(dims, data, 2, cfg, a);

    Prng b(7);
    Rbm manual = Rbm::initialized(6, 4, b);
    const auto trace = manual.train(data, cfg, b);

    ASSERT_EQ(result.classifier.layer_count(), 1u);
    EXPECT_EQ(result.classifier.layers()[0], manual);
    ASSERT_EQ(result.traces.size(), 1u);
    ASSERT_EQ(result.traces[0].size(), trace.size());
    for (std::size_t e = 0; e < trace.size(); ++e)
        EXPECT_EQ(result.traces[0][e].mean_reconstruction_error, trace[e].mean_reconstruction_error);
}

TEST(GreedyPretrain, UpperLayersSeeMeanFieldActivations) {
    Prng data_rng(2);
    const auto data = features_of(random_batch(12, 5, 2, data_rng));
    const TrainConfig cfg{0.05, 5, 4, 1, 0};
    Prng a(8);
    const auto result = greedy_pretrain(std::vector<std::size_t>{5, 4, 3}, data, 2, cfg, a);

    // Replay: layer 1 from the same stream, then layer 2 on p(h|v) of layer 1.
    Prng b(8);
    Rbm first = Rbm::initialized(5, 4, b);
    first.train(data, cfg, b);
    std::vector<Vector> hidden;
    for (const auto& v : data) hidden.push_back(first.prob_h_given_v(v));
    Rbm second = Rbm::initialized(4, 3, b);
    second.train(hidden, cfg, b);
    EXPECT_EQ(result.classifier.layers()[0], first);
    EXPECT_EQ(result.classifier.layers()[1], second);
}

TEST(GreedyPretrain, PaperArchitectureShapes) {
    Prng rng(3);
    std::vector<Vector> data(2, Vector(2500, 0.5));
    const TrainConfig cfg{1e-5, 1, 64, 1, 0};

    const auto dbn2 = greedy_pretrain(std::vector<std::size_t>{2500, 500, 500}, data, 3, cfg, rng).classifier;
    ASSERT_EQ(dbn2.layer_count(), 2u);
    EXPECT_EQ(dbn2.layers()[0].weights().shape(), "2500x500");
    EXPECT_EQ(dbn2.layers()[1].weights().shape(), "500x500");
    EXPECT_EQ(dbn2.softmax_weights().shape(), "500x3");

    const auto dbn3 = greedy_pretrain(std::vector<std::size_t>{2500, 2000, 2000, 500}, data, 3, cfg, rng).classifier;
    ASSERT_EQ(dbn3.layer_count(), 3u);
    EXPECT_EQ(dbn3.layers()[0].weights().shape(), "2500x2000");
    EXPECT_EQ(dbn3.layers()[1].weights().shape(), "2000x2000");
    EXPECT_EQ(dbn3.layers()[2].weights().shape(), "2000x500");
}

TEST(GreedyPretrain, ChainingInvariantForRandomDims) {
    Prng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::size_t> dims{1 + rng.index(6)};
        const std::size_t depth = 1 + rng.index(4);
        for (std::size_t l = 0; l < depth; ++l) dims.push_back(1 + rng.index(6));
        const auto data = features_of(random_batch(3, dims[0], 2, rng));
        const auto dbn = greedy_pretrain(dims, data, 2, TrainConfig{0.1, 2, 2, 1, 0}, rng).classifier;
        ASSERT_EQ(dbn.layer_count(), depth);
        for (std::size_t l = 0; l < depth; ++l) {
            EXPECT_EQ(dbn.layers()[l].visible(), dims[l]);
            EXPECT_EQ(dbn.layers()[l].hidden(), dims[l + 1]);
        }
        EXPECT_EQ(dbn.softmax_weights().rows(), dims.back());
    }
}

TEST(GreedyPretrain, Errors) {
    Prng rng(5);
    const std::vector<Vector> data{{0.1, 0.2, 0.3}};
    EXPECT_THROW(greedy_pretrain(std::vector<std::size_t>{4, 2}, data, 2, TrainConfig{}, rng), DimensionError);
    EXPECT_THROW(greedy_pretrain(std::vector<std::size_t>{3}, data, 2, TrainConfig{}, rng), std::invalid_argument);
    EXPECT_THROW(greedy_pretrain(std::vector<std::size_t>{3, 2}, std::vector<Vector>{}, 2, TrainConfig{}, rng),
                 std::invalid_argument);
}

TEST(DbnClassifier, RejectsBrokenChain) {
    std::vector<Rbm> layers{Rbm(4, 3), Rbm(2, 2)};
    EXPECT_THROW(DbnClassifier(layers, Matrix(2, 2), Vector(2)), DimensionError);
    EXPECT_THROW(DbnClassifier({Rbm(4, 3)}, Matrix(2, 2), Vector(2)), DimensionError);
}

TEST(Forward, ZeroParametersGiveUniformClasses) {
    const DbnClassifier dbn({Rbm(5, 4), Rbm(4, 3)}, Matrix(3, 4), Vector(4, 0.0));
    const auto pass = dbn.forward(Vector{1, 0, 0.5, 0.2, 0.9});
    ASSERT_EQ(pass.class_probs.size(), 4u);
    for (double p : pass.class_probs) EXPECT_DOUBLE_EQ(p, 0.25);
    ASSERT_EQ(pass.activations.size(), 3u);
    for (double h : pass.activations[1]) EXPECT_EQ(h, 0.5);
}

TEST(Forward, ProbabilitiesNormalizedAndShiftInvariant) {
    Prng rng(6);
    DbnClassifier dbn = random_dbn({6, 5, 4}, 3, rng, 1.0);
    DbnClassifier shifted = dbn;
    for (double& b : shifted.softmax_bias()) b += 7.0;
    for (int k = 0; k < 100; ++k) {
        Vector v(6);
        for (double& x : v) x = rng.uniform();
        const auto p = dbn.forward(v).class_probs;
        const auto q = shifted.forward(v).class_probs;
        double total = 0;
        for (std::size_t c = 0; c < p.size(); ++c) {
            EXPECT_GT(p[c], 0.0);
            EXPECT_LT(p[c], 1.0);
            EXPECT_NEAR(p[c], q[c], 1e-12);
            total += p[c];
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(Forward, IgnoresVisibleBiasesAndPrng) {
    Prng rng(7);
    DbnClassifier dbn = random_dbn({4, 3, 3}, 2, rng, 1.0);
    DbnClassifier other = dbn;
    for (auto& layer : other.layers())
        for (double& b : layer.visible_bias()) b += 3.0;
    const Vector v{0.1, 0.9, 0.4, 0.6};
    EXPECT_EQ(dbn.forward(v).class_probs, other.forward(v).class_probs);
    EXPECT_EQ(dbn.forward(v).class_probs, dbn.forward(v).class_probs);
}

TEST(Forward, DimensionMismatch) {
    const DbnClassifier dbn({Rbm(3, 2)}, Matrix(2, 2), Vector(2));
    EXPECT_THROW(dbn.forward(Vector{1, 2}), DimensionError);
    EXPECT_THROW(dbn.predict(Vector{1, 2, 3, 4}), DimensionError);
}

TEST(Predict, TieBreaksToLowestIndex) {
    const DbnClassifier dbn({Rbm(3, 2)}, Matrix(2, 3), Vector(3, 0.0));
    EXPECT_EQ(dbn.predict(Vector{1, 0, 1}), 0u);
}

TEST(Predict, LargestLogitWins) {
    DbnClassifier dbn({Rbm(3, 2)}, Matrix(2, 3), Vector{0.0, 10.0, 0.0});
    EXPECT_EQ(dbn.predict(Vector{0.3, 0.3, 0.3}), 1u);
}

TEST(Predict, AgreesWithForwardArgmax) {
    Prng rng(8);
    const DbnClassifier dbn = random_dbn({6, 5, 4}, 4, rng, 2.0);
    for (int k = 0; k < 1000; ++k) {
        Vector v(6);
        for (double& x : v) x = rng.uniform();
        const auto p = dbn.forward(v).class_probs;
        std::size_t best = 0;
        for (std::size_t c = 1; c < p.size(); ++c)
            if (p[c] > p[best]) best = c;
        EXPECT_EQ(dbn.predict(v), best);
    }
}

TEST(FineTune, GradientMatchesFiniteDifferences) {
    Prng rng(9);
    DbnClassifier dbn = random_dbn({6, 4}, 3, rng, 0.5);
    const auto batch = random_batch(5, 6, 3, rng);
    const auto r = gradcheck::check_dbn(dbn, batch);
    EXPECT_EQ(r.checked, 6u * 4 + 4 + 4 * 3 + 3);
    EXPECT_LT(r.worst_relative_error, 1e-4);
}

TEST(FineTune, GradientMatchesFiniteDifferencesThreeLayers) {
    Prng rng(10);
    DbnClassifier dbn = random_dbn({5, 4, 3, 3}, 2, rng, 0.8);
    const auto batch = random_batch(4, 5, 2, rng);
    EXPECT_LT(gradcheck::check_dbn(dbn, batch).worst_relative_error, 1e-4);
}

TEST(FineTune, ZeroLearningRateFreezesEverything) {
    Prng rng(11);
    DbnClassifier dbn = random_dbn({6, 4}, 3, rng, 0.5);
    const DbnClassifier before = dbn;
    const auto train = random_batch(30, 6, 3, rng);
    const auto held_out = random_batch(50, 6, 3, rng);
    FineTuneConfig cfg{0.0, 5, 7, 0};
    const auto trace = dbn.fine_tune(train, cfg, rng);
    EXPECT_EQ(dbn, before);
    ASSERT_EQ(trace.size(), 5u);
    for (double t : trace) EXPECT_NEAR(t, trace.front(), 1e-12);
    for (const auto& s : held_out) EXPECT_EQ(dbn.predict(s.features), before.predict(s.features));
}

TEST(FineTune, LearnsSeparableProblem) {
    Prng rng(12);
    const auto data = separable_set(40, rng);
    auto dbn = greedy_pretrain(std::vector<std::size_t>{8, 6}, features_of(data), 2, TrainConfig{0.1, 20, 8, 1, 0},
                               rng)
                   .classifier;
    const auto trace = dbn.fine_tune(data, FineTuneConfig{0.5, 100, 8, 0}, rng);
    ASSERT_EQ(trace.size(), 100u);
    EXPECT_LT(trace.back(), trace.front());
    std::size_t correct = 0;
    for (const auto& s : data) correct += dbn.predict(s.features) == s.label;
    EXPECT_GE(static_cast<double>(correct) / data.size(), 0.95);
}

TEST(FineTune, EpochCallbackSeesEveryEpoch) {
    Prng rng(13);
    DbnClassifier dbn = random_dbn({3, 2}, 2, rng, 0.1);
    const auto data = random_batch(10, 3, 2, rng);
    std::vector<std::size_t> seen;
    const auto trace = dbn.fine_tune(data, FineTuneConfig{0.1, 4, 3, 0}, rng,
                                     [&](std::size_t epoch, double) { seen.push_back(epoch); });
    EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3, 4}));
    EXPECT_EQ(trace.size(), 4u);
}

TEST(FineTune, RejectsBadLabels) {
    Prng rng(14);
    DbnClassifier dbn = random_dbn({3, 2}, 2, rng, 0.1);
    std::vector<LabeledSample> data{{{0.1, 0.2, 0.3}, 2}};
    EXPECT_THROW(dbn.fine_tune(data, FineTuneConfig{}, rng), std::out_of_range);
    EXPECT_THROW(dbn.fine_tune(std::vector<LabeledSample>{}, FineTuneConfig{}, rng), std::invalid_argument);
}

TEST(DbnSerialization, RoundTripPreservesEveryParameter) {
    Prng rng(15);
    const DbnClassifier dbn = random_dbn({5, 4, 3}, 3, rng, 1.0);
    std::stringstream buf;
    write_dbn(buf, dbn);
    EXPECT_EQ(buf.str().substr(0, 4), "EBMN");
    const DbnClassifier back = read_dbn(buf);
    EXPECT_EQ(back, dbn);
    EXPECT_EQ(back.layers()[0].visible_bias(), dbn.layers()[0].visible_bias());
}

TEST(DbnSerialization, TruncatedFileFails) {
    Prng rng(16);
    std::stringstream buf;
    write_dbn(buf, random_dbn({3, 2}, 2, rng, 1.0));
    const std::string full = buf.str();
    std::stringstream cut(full.substr(0, full.size() - 3));
    EXPECT_THROW(read_dbn(cut), FormatError);
}

TEST(DbnSerialization, JsonExport) {
    Prng rng(17);
    const std::string text = dbn_to_json(random_dbn({3, 2}, 2, rng, 1.0));
    EXPECT_NE(text.find("\"ebm-dbn\""), std::string::npos);
    EXPECT_NE(text.find("\"softmax_bias\""), std::string::npos);
}
