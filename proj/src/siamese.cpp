#include "trajmatch/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "trajmatch/error.hpp"

namespace trajmatch {

void ContrastiveParams::validate() const {
    if (!(alpha > 0 && beta > 0 && margin > 0)) throw ConfigError("contrastive alpha, beta and margin must be positive");
}

double contrastive_loss(double d, int y, const ContrastiveParams& p) {
    if (y == 0) return p.alpha * d * d;
    const double gap = std::max(0.0, p.margin - d);
    return p.beta * gap * gap;
}

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
    if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must lie in [0, 1)");
    if (batch_size <= 0) throw ConfigError("batch size must be positive");
    if (epochs <= 0) throw ConfigError("epoch count must be positive");
}

std::vector<float> SiameseModel::embed(const RgbImage& image) const {
    const auto input = to_network_input<float>(image, input_size());
    return net_.embed(input);
}

double SiameseModel::distance(const RgbImage& a, const RgbImage& b) const {
    const auto ea = embed(a);
    const auto eb = embed(b);
    return euclidean_distance<float>(ea, eb);
}

namespace {

std::vector<std::size_t> epoch_order(std::span<const TrainingPair> pairs, const OptimizerConfig& opt, Rng& rng) {
    std::vector<std::size_t> order;
    if (opt.max_pairs_per_epoch == 0 || opt.max_pairs_per_epoch >= pairs.size()) {
        order.resize(pairs.size());
        for (std::size_t i = 0; i < pairs.size(); ++i) order[i] = i;
        rng.shuffle(order);
        return order;
    }
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < pairs.size(); ++i) (pairs[i].y == 0 ? pos : neg).push_back(i);
    rng.shuffle(pos);
    rng.shuffle(neg);
    const std::size_t cap = opt.max_pairs_per_epoch;
    std::size_t take_pos = std::min(pos.size(), cap / 2);
    std::size_t take_neg = std::min(neg.size(), cap - take_pos);
    take_pos = std::min(pos.size(), cap - take_neg);
    order.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(take_pos));
    order.insert(order.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(take_neg));
    rng.shuffle(order);
    return order;
}

}  // namespace

double mean_loss(const SiameseModel& model, std::span<const TrainingPair> pairs, const ContrastiveParams& params) {
    if (pairs.empty()) return 0.0;
    double total = 0.0;
    for (const auto& p : pairs) {
        total += contrastive_loss(model.distance(p.image_a, p.image_b), p.y, params);
    }
    return total / static_cast<double>(pairs.size());
}

SiameseModel train_siamese(const Architecture& arch, std::span<const TrainingPair> pairs,
                           const ContrastiveParams& params, const OptimizerConfig& opt, TrainingReport* report) {
    params.validate();
    opt.validate();
    std::size_t positives = 0;
    for (const auto& p : pairs) {
        if (p.y != 0 && p.y != 1) throw TrainingError("training pair label must be 0 or 1");
        positives += p.y == 0;
    }
    if (positives == 0 || positives == pairs.size()) {
        throw TrainingError("training data must contain both similar and dissimilar pairs");
    }

    SiameseModel model(arch);
    Rng rng(opt.seed);
    Embedder<float>& net = model.network();
    net.init_uniform_fan_in(rng);
    model.contrastive = params;
    model.optimizer = opt;

    const std::size_t n_params = net.parameter_count();
    const std::size_t dim = static_cast<std::size_t>(arch.embedding_dim);
    std::vector<float> velocity(n_params, 0.0f), grad(n_params);
    std::vector<float> ea(dim), eb(dim), ga(dim), gb(dim);
    Embedder<float>::Cache cache_a, cache_b;
    auto weights = net.parameters();

    TrainingReport local;
    TrainingReport& rep = report ? *report : local;
    rep.epoch_losses.clear();
    rep.steps = 0;

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        const auto order = epoch_order(pairs, opt, rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0f);
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const TrainingPair& tp = pairs[order[k]];
                const auto in_a = to_network_input<float>(tp.image_a, arch.input_size);
                const auto in_b = to_network_input<float>(tp.image_b, arch.input_size);
                net.forward(in_a, ea, &cache_a);
                net.forward(in_b, eb, &cache_b);
                batch_loss += contrastive_loss_and_grad<float>(ea, eb, tp.y, params, ga, gb);
                net.backward(cache_a, ga, grad);
                net.backward(cache_b, gb, grad);
            }
            if (!std::isfinite(batch_loss)) {
                throw TrainingError("loss diverged (non-finite) in epoch " + std::to_string(epoch + 1) +
                                    "; lower the learning rate");
            }
            const float scale = 1.0f / static_cast<float>(end - start);
            const auto lr = static_cast<float>(opt.learning_rate);
            const auto mu = static_cast<float>(opt.momentum);
            for (std::size_t i = 0; i < n_params; ++i) {
                velocity[i] = mu * velocity[i] - lr * grad[i] * scale;
                weights[i] += velocity[i];
            }
            epoch_loss += batch_loss;
            ++rep.steps;
        }
        double recorded = epoch_loss / static_cast<double>(std::max<std::size_t>(order.size(), 1));
        if (opt.exact_epoch_loss) recorded = mean_loss(model, pairs, params);
        if (!std::isfinite(recorded)) throw TrainingError("loss diverged (non-finite) after epoch " + std::to_string(epoch + 1));
        rep.epoch_losses.push_back(recorded);
    }
    return model;
}

std::vector<double> analytic_gradient(const Embedder<double>& net, std::span<const std::vector<double>> inputs_a,
                                      std::span<const std::vector<double>> inputs_b, std::span<const int> ys,
                                      const ContrastiveParams& params) {
    const std::size_t dim = static_cast<std::size_t>(net.architecture().embedding_dim);
    std::vector<double> grad(net.parameter_count(), 0.0);
    std::vector<double> ea(dim), eb(dim), ga(dim), gb(dim);
    Embedder<double>::Cache ca, cb;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        net.forward(inputs_a[i], ea, &ca);
        net.forward(inputs_b[i], eb, &cb);
        contrastive_loss_and_grad<double>(ea, eb, ys[i], params, ga, gb);
        net.backward(ca, ga, grad);
        net.backward(cb, gb, grad);
    }
    return grad;
}

namespace {

double summed_loss(const Embedder<double>& net, std::span<const std::vector<double>> inputs_a,
                   std::span<const std::vector<double>> inputs_b, std::span<const int> ys,
                   const ContrastiveParams& params) {
    double total = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const auto ea = net.embed(inputs_a[i]);
        const auto eb = net.embed(inputs_b[i]);
        total += contrastive_loss(euclidean_distance<double>(ea, eb), ys[i], params);
    }
    return total;
}

}  // namespace

GradientCheckResult check_gradients(const Embedder<double>& net, std::span<const std::vector<double>> inputs_a,
                                    std::span<const std::vector<double>> inputs_b, std::span<const int> ys,
                                    const ContrastiveParams& params, double step, double abs_floor) {
    const auto analytic = analytic_gradient(net, inputs_a, inputs_b, ys, params);
    Embedder<double> probe = net;
    auto w = probe.parameters();
    GradientCheckResult r;
    r.parameters = w.size();
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double saved = w[i];
        w[i] = saved + step;
        const double up = summed_loss(probe, inputs_a, inputs_b, ys, params);
        w[i] = saved - step;
        const double down = summed_loss(probe, inputs_a, inputs_b, ys, params);
        w[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), abs_floor});
        r.max_relative_error = std::max(r.max_relative_error, std::fabs(analytic[i] - numeric) / denom);
        r.max_abs_analytic = std::max(r.max_abs_analytic, std::fabs(analytic[i]));
    }
    return r;
}

double select_threshold(std::span<const double> scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
    std::vector<double> finite;
    for (double s : scores) {
        if (std::isfinite(s)) finite.push_back(s);
    }
    std::sort(finite.begin(), finite.end());
    finite.erase(std::unique(finite.begin(), finite.end()), finite.end());

    std::vector<double> candidates;
    for (std::size_t i = 0; i + 1 < finite.size(); ++i) candidates.push_back(0.5 * (finite[i] + finite[i + 1]));
    if (!finite.empty()) candidates.push_back(finite.back() + std::max(1e-6, 0.05 * std::fabs(finite.back())));

    double best_t = 1e-6;
    double best_f1 = -1.0;
    for (double t : candidates) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const bool pred = scores[i] < t;
            if (pred && labels[i]) ++tp;
            else if (pred && !labels[i]) ++fp;
            else if (!pred && labels[i]) ++fn;
        }
        const double denom = 2.0 * tp + fp + fn;
        const double f1 = denom > 0 ? 2.0 * tp / denom : 0.0;
        if (f1 > best_f1) {
            best_f1 = f1;
            best_t = t;
        }
    }
    return std::max(best_t, 1e-12);
}

std::vector<TrainingPair> build_training_pairs(std::span<const PairDay> days, const PipelineConfig& config,
                                               int input_size) {
    std::vector<TrainingPair> out;
    for (const auto& day : days) {
        if (!day.label) throw TrainingError("training day " + day.pair_id + " is unlabeled");
        for (auto& a : assess_layers(day, config)) {
            if (a.status != LayerStatus::Candidate) continue;
            TrainingPair tp;
            tp.image_a = resample_nearest_colored(a.input_a, input_size, input_size);
            tp.image_b = resample_nearest_colored(a.input_b, input_size, input_size);
            tp.y = *day.label ? 0 : 1;
            tp.pair_id = day.pair_id;
            tp.local_date = day.local_date;
            tp.layer_index = a.layer_index;
            out.push_back(std::move(tp));
        }
    }
    std::size_t pos = 0;
    for (const auto& p : out) pos += p.y == 0;
    if (pos == 0 || pos == out.size()) {
        throw TrainingError("training pair construction left a class empty (" + std::to_string(pos) +
                            " similar, " + std::to_string(out.size() - pos) + " dissimilar)");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr int kModelFormatVersion = 1;

nlohmann::json floats(std::span<const float> v) {
    nlohmann::json a = nlohmann::json::array();
    for (float x : v) a.push_back(static_cast<double>(x));
    return a;
}

void read_floats(const nlohmann::json& j, std::span<float> dst, const char* what) {
    if (!j.is_array() || j.size() != dst.size()) {
        throw DataError(std::string("model file: '") + what + "' has the wrong length");
    }
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(j[i].get<double>());
}

}  // namespace

nlohmann::json to_json(const SiameseModel& m) {
    const auto& arch = m.architecture();
    const auto& net = m.network();
    const auto params = net.parameters();
    nlohmann::json conv = nlohmann::json::array();
    for (const auto& L : net.conv_layers()) {
        conv.push_back({{"weights", floats(params.subspan(L.weight_offset, static_cast<std::size_t>(L.out_c) * L.in_c * 9))},
                        {"bias", floats(params.subspan(L.bias_offset, static_cast<std::size_t>(L.out_c)))}});
    }
    const std::size_t dense_n = static_cast<std::size_t>(arch.embedding_dim) * net.feature_count();

    nlohmann::json j;
    j["format"] = "trajmatch.siamese";
    j["version"] = kModelFormatVersion;
    j["architecture"] = {{"input_size", arch.input_size},
                         {"in_channels", arch.in_channels},
                         {"conv_channels", arch.conv_channels},
                         {"kernel", Architecture::kKernel},
                         {"embedding_dim", arch.embedding_dim}};
    j["distance_threshold"] = m.distance_threshold;
    j["calibrated"] = m.calibrated;
    j["contrastive"] = {{"alpha", m.contrastive.alpha}, {"beta", m.contrastive.beta}, {"margin", m.contrastive.margin}};
    j["optimizer"] = {{"learning_rate", m.optimizer.learning_rate},
                      {"momentum", m.optimizer.momentum},
                      {"batch_size", m.optimizer.batch_size},
                      {"epochs", m.optimizer.epochs},
                      {"seed", m.optimizer.seed},
                      {"max_pairs_per_epoch", m.optimizer.max_pairs_per_epoch}};
    j["context"] = {{"variant", std::string(variant_name(m.context.variant))},
                    {"num_layers", m.context.num_layers},
                    {"canvas",
                     {{"width", m.context.canvas.width},
                      {"height", m.context.canvas.height},
                      {"margin", m.context.canvas.margin}}},
                    {"filter_threshold", m.context.filter_threshold ? nlohmann::json(*m.context.filter_threshold)
                                                                    : nlohmann::json(nullptr)},
                    {"crop_pad", m.context.crop_pad}};
    j["weights"] = {{"conv", std::move(conv)},
                    {"dense",
                     {{"weights", floats(params.subspan(net.dense_weight_offset(), dense_n))},
                      {"bias", floats(params.subspan(net.dense_bias_offset(), static_cast<std::size_t>(arch.embedding_dim)))}}}};
    return j;
}

SiameseModel siamese_model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "trajmatch.siamese") throw DataError("model file: unknown format");
        if (j.at("version").get<int>() != kModelFormatVersion) throw DataError("model file: unsupported version");
        const auto& ja = j.at("architecture");
        Architecture arch;
        arch.input_size = ja.at("input_size").get<int>();
        arch.in_channels = ja.at("in_channels").get<int>();
        arch.conv_channels = ja.at("conv_channels").get<std::vector<int>>();
        arch.embedding_dim = ja.at("embedding_dim").get<int>();
        if (ja.value("kernel", 3) != Architecture::kKernel) throw DataError("model file: only 3x3 kernels are supported");
        try {
            arch.validate();
        } catch (const std::invalid_argument& e) {
            throw DataError(std::string("model file: ") + e.what());
        }

        SiameseModel m(arch);
        m.distance_threshold = j.at("distance_threshold").get<double>();
        m.calibrated = j.value("calibrated", true);
        const auto& jc = j.at("contrastive");
        m.contrastive = {jc.at("alpha").get<double>(), jc.at("beta").get<double>(), jc.at("margin").get<double>()};
        if (j.contains("optimizer")) {
            const auto& jo = j["optimizer"];
            m.optimizer.learning_rate = jo.value("learning_rate", m.optimizer.learning_rate);
            m.optimizer.momentum = jo.value("momentum", m.optimizer.momentum);
            m.optimizer.batch_size = jo.value("batch_size", m.optimizer.batch_size);
            m.optimizer.epochs = jo.value("epochs", m.optimizer.epochs);
            m.optimizer.seed = jo.value("seed", m.optimizer.seed);
            m.optimizer.max_pairs_per_epoch = jo.value("max_pairs_per_epoch", m.optimizer.max_pairs_per_epoch);
        }
        if (j.contains("context")) {
            const auto& jx = j["context"];
            m.context.variant = parse_variant(jx.at("variant").get<std::string>());
            m.context.num_layers = jx.at("num_layers").get<int>();
            const auto& jcv = jx.at("canvas");
            m.context.canvas = {jcv.at("width").get<int>(), jcv.at("height").get<int>(), jcv.at("margin").get<int>()};
            if (jx.contains("filter_threshold") && !jx["filter_threshold"].is_null()) {
                m.context.filter_threshold = jx["filter_threshold"].get<double>();
            }
            m.context.crop_pad = jx.value("crop_pad", 2);
        }

        auto params = m.network().parameters();
        const auto& jw = j.at("weights");
        const auto& convs = m.network().conv_layers();
        if (jw.at("conv").size() != convs.size()) throw DataError("model file: conv layer count mismatch");
        for (std::size_t i = 0; i < convs.size(); ++i) {
            const auto& L = convs[i];
            read_floats(jw["conv"][i].at("weights"),
                        params.subspan(L.weight_offset, static_cast<std::size_t>(L.out_c) * L.in_c * 9), "conv weights");
            read_floats(jw["conv"][i].at("bias"), params.subspan(L.bias_offset, static_cast<std::size_t>(L.out_c)),
                        "conv bias");
        }
        const std::size_t dense_n = static_cast<std::size_t>(arch.embedding_dim) * m.network().feature_count();
        read_floats(jw.at("dense").at("weights"), params.subspan(m.network().dense_weight_offset(), dense_n),
                    "dense weights");
        read_floats(jw.at("dense").at("bias"),
                    params.subspan(m.network().dense_bias_offset(), static_cast<std::size_t>(arch.embedding_dim)),
                    "dense bias");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model file: ") + e.what());
    }
}

void save_model(const std::filesystem::path& path, const SiameseModel& model) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write model to '" + path.string() + "'");
    out << to_json(model).dump() << '\n';
}

SiameseModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("model file '" + path.string() + "': " + e.what());
    }
    return siamese_model_from_json(j);
}

}  // namespace trajmatch
