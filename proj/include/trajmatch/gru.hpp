#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trajmatch/eval.hpp"
#include "trajmatch/random.hpp"
#include "trajmatch/types.hpp"

namespace trajmatch {

inline constexpr int kGruFeatures = 4;

/// Paired coordinates per time step: (lat_a, lon_a, lat_b, lon_b). The two
/// traces are aligned by sample index and truncated to the shorter one.
struct SequenceInstance {
    std::string pair_id;
    LocalDate local_date;
    std::vector<std::array<double, kGruFeatures>> steps;
    bool label = false;

    std::size_t length() const { return steps.size(); }
};

/// Throws DataError if either trace is empty. At most `max_length` steps.
SequenceInstance make_sequence(const PairDay& day, int max_length);

/// Per-feature z-scoring fitted on training sequences.
struct Standardizer {
    std::array<double, kGruFeatures> mean{};
    std::array<double, kGruFeatures> scale{1.0, 1.0, 1.0, 1.0};

    static Standardizer fit(std::span<const SequenceInstance* const> data);
    SequenceInstance apply(const SequenceInstance& s) const;
};

/// Stacked GRU (PyTorch gate equations, gate order r, z, n) with a logistic
/// head on the top layer's last hidden state. Parameters live in one flat
/// array: per layer W_i [3H x in], W_h [3H x H], b_i [3H], b_h [3H] (matrices
/// column-major), then head w [H] and b [1].
class GruModel {
public:
    GruModel() = default;
    GruModel(int input_size, int hidden_size, int num_layers);

    int input_size() const { return input_; }
    int hidden_size() const { return hidden_; }
    int num_layers() const { return layers_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    void init_uniform(Rng& rng);

    /// Inference (no dropout). Throws DataError on an empty sequence.
    double predict(const SequenceInstance& s) const;

    /// Mean binary cross-entropy over the batch; when `grad` is non-empty the
    /// gradient w.r.t. every parameter is added to it. Dropout with rate
    /// `dropout` is applied between layers when `rng` is given.
    double loss_and_gradient(std::span<const SequenceInstance* const> batch, std::span<double> grad,
                             double dropout = 0.0, Rng* rng = nullptr) const;

    Standardizer standardizer;

private:
    std::size_t layer_offset(int layer) const { return offsets_[static_cast<std::size_t>(layer)]; }
    int layer_input(int layer) const { return layer == 0 ? input_ : hidden_; }
    std::size_t head_offset() const { return offsets_.back(); }

    int input_ = 0;
    int hidden_ = 0;
    int layers_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

nlohmann::json to_json(const GruModel& m);
GruModel gru_model_from_json(const nlohmann::json& j);
void save_gru_model(const std::filesystem::path& path, const GruModel& m);
GruModel load_gru_model(const std::filesystem::path& path);

struct GruConfig {
    int hidden_size = 32;
    int num_layers = 2;
    double dropout = 0.2;
    int max_length = 512;
    int max_epochs = 50;
    int patience = 5;
    double learning_rate = 1e-3;
    int batch_size = 16;
    /// Share of the training data held out for early stopping.
    double validation_fraction = 0.15;
    std::uint64_t seed = 7;

    void validate() const;
};

nlohmann::json to_json(const GruConfig& c);

/// Stops once the monitored loss has not improved on its best value for
/// `patience` consecutive epochs.
class EarlyStopping {
public:
    explicit EarlyStopping(int patience) : patience_(patience) {}
    /// Returns true when training should stop after this epoch.
    bool update(double loss);
    bool improved() const { return improved_; }
    int best_epoch() const { return best_epoch_; }  // 1-based
    double best_loss() const { return best_; }

private:
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    int bad_ = 0;
    bool improved_ = false;
    double best_ = 0.0;
};

struct GruTrainingReport {
    std::vector<double> train_losses;
    std::vector<double> validation_losses;
    int best_epoch = 0;
    bool stopped_early = false;
};

/// Adam on mean BCE with early stopping on a stratified validation split;
/// returns the weights of the best validation epoch. Sequences must be raw
/// (unstandardized); the fitted standardizer is stored in the model.
GruModel train_gru(std::span<const SequenceInstance> data, const GruConfig& config,
                   GruTrainingReport* report = nullptr);

struct GruCrossValidationResult {
    std::vector<ConfusionCounts> fold_counts;
    std::vector<Metrics> fold_metrics;
    std::vector<int> fold_epochs;
    Metrics metrics;
    Metrics weighted;
    ConfusionCounts pooled;
    /// Mean seconds per instance for feature construction plus inference.
    double seconds_per_instance = 0.0;
};

/// Same stratified folds as the image pipeline for equal `folds` and `seed`.
GruCrossValidationResult cross_validate_gru(std::span<const PairDay> days, const GruConfig& config, int folds,
                                            std::uint64_t fold_seed);

nlohmann::json to_json(const GruCrossValidationResult& r);

struct GruGradientCheck {
    double max_relative_error = 0.0;
    double max_abs_analytic = 0.0;
    std::size_t parameters = 0;
};

/// Backpropagation through time versus central differences (no dropout).
GruGradientCheck check_gru_gradients(const GruModel& model, std::span<const SequenceInstance* const> batch,
                                     double step = 1e-5, double abs_floor = 1e-4);

}  // namespace trajmatch
