#pragma once

// Datasets with prescribed class counts and random pixel features.

#include <algorithm>
#include <vector>

#include "ebm/dataset.hpp"

namespace fixtures {

// Original class frequencies of the three parasite groups, 0-based labels.
inline const std::vector<std::size_t> kEggsCounts{500, 83, 286, 103, 835, 435, 254, 379, 9816};
inline const std::vector<std::size_t> kLarvaeCounts{246, 1352};
inline const std::vector<std::size_t> kProtozoaCounts{868, 659, 1783, 1931, 3297, 309, 28525};

/// Samples are interleaved across classes so no class sits in one block.
inline ebm::Dataset dataset_with_counts(const std::vector<std::size_t>& counts, std::size_t dim, std::uint64_t seed) {
    ebm::Prng rng(seed);
    ebm::Dataset ds;
    ds.dim = dim;
    ds.class_names = ebm::default_class_names(counts.size());
    std::vector<std::size_t> left = counts;
    bool any = true;
    while (any) {
        any = false;
        for (std::size_t c = 0; c < counts.size(); ++c) {
            if (left[c] == 0) continue;
            --left[c];
            any = true;
            ebm::Sample s;
            s.label = c;
            s.features.resize(dim);
            for (double& f : s.features) f = rng.uniform();
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

/// Each class has a random binary prototype; samples are the prototype mapped
/// to {0.15, 0.85} plus uniform jitter of +-`noise`, clamped to [0, 1].
inline ebm::Dataset prototype_dataset(const std::vector<std::size_t>& counts, std::size_t dim, double noise,
                                      std::uint64_t seed) {
    ebm::Prng rng(seed);
    std::vector<ebm::Vector> protos(counts.size(), ebm::Vector(dim));
    for (auto& p : protos)
        for (double& x : p) x = rng.uniform() < 0.5 ? 0.15 : 0.85;
    ebm::Dataset ds = dataset_with_counts(counts, dim, seed + 1);
    for (auto& s : ds.samples)
        for (std::size_t i = 0; i < dim; ++i)
            s.features[i] = std::clamp(protos[s.label][i] + noise * (2.0 * rng.uniform() - 1.0), 0.0, 1.0);
    return ds;
}

}  // namespace fixtures
