#include "trajmatch/gradcheck.hpp"

#include <chrono>

namespace trajmatch {

ToyGradientReport run_toy_gradient_checks(std::uint64_t seed, double step) {
    const auto t0 = std::chrono::steady_clock::now();
    ToyGradientReport r;
    r.step = step;
    Rng rng(seed);

    Architecture arch;
    arch.input_size = 8;
    arch.in_channels = 3;
    arch.conv_channels = {2};
    arch.embedding_dim = 4;
    Embedder<double> net(arch);
    net.init_uniform_fan_in(rng);
    std::vector<std::vector<double>> in_a, in_b;
    std::vector<int> ys;
    for (int i = 0; i < 4; ++i) {
        std::vector<double> a(arch.input_length()), b(arch.input_length());
        for (auto& v : a) v = rng.uniform();
        for (auto& v : b) v = rng.uniform();
        in_a.push_back(std::move(a));
        in_b.push_back(std::move(b));
        ys.push_back(i % 2);
    }
    // Keep the hinge active for the dissimilar pairs.
    ContrastiveParams params;
    double max_d = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        max_d = std::max(max_d, euclidean_distance<double>(net.embed(in_a[i]), net.embed(in_b[i])));
    }
    params.margin = 2.0 * max_d + 1.0;
    r.cnn = check_gradients(net, in_a, in_b, ys, params, step);

    GruModel gru(kGruFeatures, 3, 2);
    gru.init_uniform(rng);
    std::vector<SequenceInstance> seqs(3);
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        seqs[i].label = i % 2 == 1;
        for (std::size_t t = 0; t < 4 + i; ++t) {
            seqs[i].steps.push_back({rng.normal(), rng.normal(), rng.normal(), rng.normal()});
        }
    }
    std::vector<const SequenceInstance*> batch;
    for (const auto& s : seqs) batch.push_back(&s);
    r.gru = check_gru_gradients(gru, batch, step);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

nlohmann::json to_json(const ToyGradientReport& r) {
    return {{"step", r.step},
            {"cnn", {{"max_relative_error", r.cnn.max_relative_error},
                     {"max_abs_gradient", r.cnn.max_abs_analytic},
                     {"parameters", r.cnn.parameters}}},
            {"gru", {{"max_relative_error", r.gru.max_relative_error},
                     {"max_abs_gradient", r.gru.max_abs_analytic},
                     {"parameters", r.gru.parameters}}},
            {"timing", {{"seconds", r.seconds}}}};
}

}  // namespace trajmatch
