#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajmatch/image.hpp"
#include "trajmatch/nn.hpp"
#include "trajmatch/stages.hpp"
#include "trajmatch/types.hpp"

namespace trajmatch {

/// Weights of the contrastive loss
///   L = alpha (1 - y) D^2 + beta y max(0, margin - D)^2
/// with y = 1 for dissimilar pairs.
struct ContrastiveParams {
    double alpha = 1.0;
    double beta = 1.0;
    double margin = 1.0;

    void validate() const;
};

double contrastive_loss(double distance, int y, const ContrastiveParams& p);

/// Euclidean distance; throws std::invalid_argument on a size mismatch.
template <typename T>
double euclidean_distance(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw std::invalid_argument("embedding dimensions differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

/// Loss of one pair and its gradient w.r.t. both embeddings (written to
/// g_a/g_b, overwriting). At D = 0 the hinge branch uses the zero subgradient.
template <typename T>
double contrastive_loss_and_grad(std::span<const T> e_a, std::span<const T> e_b, int y, const ContrastiveParams& p,
                                 std::span<T> g_a, std::span<T> g_b) {
    const double d = euclidean_distance(e_a, e_b);
    const std::size_t n = e_a.size();
    if (y == 0) {
        for (std::size_t i = 0; i < n; ++i) {
            const double g = 2.0 * p.alpha * (static_cast<double>(e_a[i]) - static_cast<double>(e_b[i]));
            g_a[i] = static_cast<T>(g);
            g_b[i] = static_cast<T>(-g);
        }
        return p.alpha * d * d;
    }
    const double gap = p.margin - d;
    if (gap <= 0.0 || d == 0.0) {
        std::fill(g_a.begin(), g_a.end(), T(0));
        std::fill(g_b.begin(), g_b.end(), T(0));
        return gap > 0.0 ? p.beta * gap * gap : 0.0;
    }
    const double scale = -2.0 * p.beta * gap / d;
    for (std::size_t i = 0; i < n; ++i) {
        const double g = scale * (static_cast<double>(e_a[i]) - static_cast<double>(e_b[i]));
        g_a[i] = static_cast<T>(g);
        g_b[i] = static_cast<T>(-g);
    }
    return p.beta * gap * gap;
}

/// Converts an image to network input: resampled to input_size, channels
/// [r, g, b] scaled so white is 0 and full intensity colour is 1 - c/255.
template <typename T>
std::vector<T> to_network_input(const RgbImage& image, int input_size) {
    const RgbImage r = resample_nearest_colored(image, input_size, input_size);
    const std::size_t plane = static_cast<std::size_t>(input_size) * input_size;
    std::vector<T> out(3 * plane);
    const auto& px = r.bytes();
    for (std::size_t i = 0; i < plane; ++i) {
        out[i] = static_cast<T>(1.0 - px[3 * i] / 255.0);
        out[plane + i] = static_cast<T>(1.0 - px[3 * i + 1] / 255.0);
        out[2 * plane + i] = static_cast<T>(1.0 - px[3 * i + 2] / 255.0);
    }
    return out;
}

/// One labelled image pair; y = 0 for co-behavior, 1 otherwise. Images are
/// stored already resampled to the network input size.
struct TrainingPair {
    RgbImage image_a;
    RgbImage image_b;
    int y = 0;
    std::string pair_id;
    LocalDate local_date;
    int layer_index = 0;
};

struct OptimizerConfig {
    double learning_rate = 1e-3;
    double momentum = 0.9;
    int batch_size = 16;
    int epochs = 50;
    std::uint64_t seed = 7;
    /// 0 = every pair each epoch; otherwise a fresh class-balanced sample of at
    /// most this many pairs per epoch.
    std::size_t max_pairs_per_epoch = 0;
    /// Record the full-corpus loss after every epoch (one extra forward pass per
    /// pair); otherwise the running mean over the epoch's batches is recorded.
    bool exact_epoch_loss = false;

    void validate() const;
};

/// What the model was trained for; persisted with the weights.
struct ModelContext {
    PipelineVariant variant = PipelineVariant::EntireMethod;
    int num_layers = 24;
    CanvasSpec canvas;
    std::optional<double> filter_threshold;
    int crop_pad = 2;
};

class SiameseModel {
public:
    SiameseModel() = default;
    explicit SiameseModel(Architecture arch) : net_(std::move(arch)) {}

    const Architecture& architecture() const { return net_.architecture(); }
    Embedder<float>& network() { return net_; }
    const Embedder<float>& network() const { return net_; }
    int input_size() const { return net_.architecture().input_size; }
    int embedding_dim() const { return net_.architecture().embedding_dim; }

    std::vector<float> embed(const RgbImage& image) const;
    /// Both images pass through the same weights.
    double distance(const RgbImage& a, const RgbImage& b) const;
    /// distance < threshold
    bool similar(double distance) const { return distance < distance_threshold; }

    double distance_threshold = 0.0;
    bool calibrated = false;
    ContrastiveParams contrastive;
    OptimizerConfig optimizer;
    ModelContext context;

private:
    Embedder<float> net_;
};

nlohmann::json to_json(const SiameseModel& model);
/// Throws DataError on a malformed or incompatible file.
SiameseModel siamese_model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const SiameseModel& model);
SiameseModel load_model(const std::filesystem::path& path);

struct TrainingReport {
    std::vector<double> epoch_losses;
    std::size_t steps = 0;
};

/// Mini-batch SGD with momentum on the mean contrastive loss. Throws
/// TrainingError if a class is missing or the loss becomes non-finite.
SiameseModel train_siamese(const Architecture& arch, std::span<const TrainingPair> pairs,
                           const ContrastiveParams& params, const OptimizerConfig& opt,
                           TrainingReport* report = nullptr);

/// Mean contrastive loss over the pairs.
double mean_loss(const SiameseModel& model, std::span<const TrainingPair> pairs, const ContrastiveParams& params);

/// Gradient of the summed contrastive loss over `pairs` w.r.t. every
/// parameter, computed by backpropagation (double precision network).
std::vector<double> analytic_gradient(const Embedder<double>& net, std::span<const std::vector<double>> inputs_a,
                                      std::span<const std::vector<double>> inputs_b, std::span<const int> ys,
                                      const ContrastiveParams& params);

struct GradientCheckResult {
    double max_relative_error = 0.0;
    double max_abs_analytic = 0.0;
    std::size_t parameters = 0;
};

/// Central finite differences of the summed loss versus backpropagation.
/// Relative error per parameter is |a - n| / max(|a|, |n|, abs_floor).
GradientCheckResult check_gradients(const Embedder<double>& net, std::span<const std::vector<double>> inputs_a,
                                    std::span<const std::vector<double>> inputs_b, std::span<const int> ys,
                                    const ContrastiveParams& params, double step = 1e-5, double abs_floor = 1e-4);

/// Threshold maximising F1 of `score < threshold` against labels. Candidates
/// are midpoints between consecutive distinct finite scores plus one value
/// above the largest; ties prefer the smaller threshold. Always positive.
double select_threshold(std::span<const double> scores, const std::vector<bool>& labels);

/// Training pairs from labelled days: every candidate layer (after the
/// variant's stages) of a day becomes one pair carrying the day's label
/// (y = 0 for co-behavior days). Throws TrainingError if a class ends up empty.
std::vector<TrainingPair> build_training_pairs(std::span<const PairDay> days, const PipelineConfig& config,
                                               int input_size);

}  // namespace trajmatch
