#pragma once

#include <cstdint>

#include <nlohmann/json.hpp>

#include "trajmatch/gru.hpp"
#include "trajmatch/siamese.hpp"

namespace trajmatch {

struct ToyGradientReport {
    GradientCheckResult cnn;
    GruGradientCheck gru;
    double step = 1e-5;
    double seconds = 0.0;
};

/// Finite-difference checks on small fixed-size models: a one-conv embedder
/// (3x8x8 input, 2 channels, 4-d embedding) under the contrastive loss and a
/// two-layer GRU (hidden 3) under binary cross-entropy.
ToyGradientReport run_toy_gradient_checks(std::uint64_t seed = 7, double step = 1e-5);

nlohmann::json to_json(const ToyGradientReport& r);

}  // namespace trajmatch
