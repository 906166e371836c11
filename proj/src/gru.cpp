#include "trajmatch/gru.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/Core>

#include "trajmatch/error.hpp"

namespace trajmatch {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using MatMap = Eigen::Map<Mat>;
using CMatMap = Eigen::Map<const Mat>;
using VecMap = Eigen::Map<Vec>;
using CVecMap = Eigen::Map<const Vec>;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LayerCache {
    Mat x;     // in x (T*B)
    Mat gi;    // 3H x (T*B)
    Mat hs;    // H x ((T+1)*B), block 0 is the zero initial state
    Mat r, z, n, ghn;  // H x (T*B)
    Mat drop;  // H x (T*B) dropout scale applied to this layer's output, empty if none
};

}  // namespace

SequenceInstance make_sequence(const PairDay& day, int max_length) {
    const auto& a = day.trace_a.samples;
    const auto& b = day.trace_b.samples;
    if (a.empty() || b.empty()) throw DataError("pair " + day.pair_id + " has an empty trace");
    SequenceInstance s;
    s.pair_id = day.pair_id;
    s.local_date = day.local_date;
    s.label = day.label.value_or(false);
    const std::size_t n = std::min({a.size(), b.size(), static_cast<std::size_t>(std::max(1, max_length))});
    s.steps.reserve(n);
    for (std::size_t i = 0; i < n; ++i) s.steps.push_back({a[i].lat, a[i].lon, b[i].lat, b[i].lon});
    return s;
}

Standardizer Standardizer::fit(std::span<const SequenceInstance* const> data) {
    Standardizer st;
    std::array<double, kGruFeatures> sum{}, sq{};
    double count = 0.0;
    for (const auto* s : data) {
        for (const auto& step : s->steps) {
            for (int f = 0; f < kGruFeatures; ++f) sum[f] += step[f];
            count += 1.0;
        }
    }
    if (count == 0) return st;
    for (int f = 0; f < kGruFeatures; ++f) st.mean[f] = sum[f] / count;
    for (const auto* s : data) {
        for (const auto& step : s->steps) {
            for (int f = 0; f < kGruFeatures; ++f) sq[f] += (step[f] - st.mean[f]) * (step[f] - st.mean[f]);
        }
    }
    for (int f = 0; f < kGruFeatures; ++f) {
        const double sd = std::sqrt(sq[f] / count);
        st.scale[f] = sd > 0 ? sd : 1.0;
    }
    return st;
}

SequenceInstance Standardizer::apply(const SequenceInstance& s) const {
    SequenceInstance out = s;
    for (auto& step : out.steps) {
        for (int f = 0; f < kGruFeatures; ++f) step[f] = (step[f] - mean[f]) / scale[f];
    }
    return out;
}

GruModel::GruModel(int input_size, int hidden_size, int num_layers)
    : input_(input_size), hidden_(hidden_size), layers_(num_layers) {
    if (input_size <= 0 || hidden_size <= 0 || num_layers <= 0) throw ConfigError("GRU sizes must be positive");
    std::size_t off = 0;
    const std::size_t h3 = 3 * static_cast<std::size_t>(hidden_);
    for (int l = 0; l < layers_; ++l) {
        offsets_.push_back(off);
        off += h3 * static_cast<std::size_t>(layer_input(l)) + h3 * static_cast<std::size_t>(hidden_) + 2 * h3;
    }
    offsets_.push_back(off);
    off += static_cast<std::size_t>(hidden_) + 1;
    params_.assign(off, 0.0);
}

void GruModel::init_uniform(Rng& rng) {
    const double k = 1.0 / std::sqrt(static_cast<double>(hidden_));
    for (double& p : params_) p = rng.uniform(-k, k);
}

double GruModel::loss_and_gradient(std::span<const SequenceInstance* const> batch, std::span<double> grad,
                                   double dropout, Rng* rng) const {
    const int B = static_cast<int>(batch.size());
    if (B == 0) return 0.0;
    int T = 0;
    for (const auto* s : batch) {
        if (s->steps.empty()) throw DataError("GRU input sequence has length 0");
        T = std::max(T, static_cast<int>(s->steps.size()));
    }
    const int H = hidden_;
    const bool want_grad = !grad.empty();
    const bool use_dropout = rng != nullptr && dropout > 0.0;
    const double keep_scale = use_dropout ? 1.0 / (1.0 - dropout) : 1.0;

    std::vector<LayerCache> cache(static_cast<std::size_t>(layers_));
    cache[0].x = Mat::Zero(input_, static_cast<Eigen::Index>(T) * B);
    for (int b = 0; b < B; ++b) {
        const auto& steps = batch[static_cast<std::size_t>(b)]->steps;
        for (std::size_t t = 0; t < steps.size(); ++t) {
            for (int f = 0; f < input_; ++f) {
                cache[0].x(f, static_cast<Eigen::Index>(t) * B + b) = steps[t][static_cast<std::size_t>(f)];
            }
        }
    }
    auto active = [&](int t, int b) { return t < static_cast<int>(batch[static_cast<std::size_t>(b)]->steps.size()); };

    for (int l = 0; l < layers_; ++l) {
        LayerCache& c = cache[static_cast<std::size_t>(l)];
        const int in = layer_input(l);
        const double* p = params_.data() + layer_offset(l);
        CMatMap Wi(p, 3 * H, in);
        CMatMap Wh(p + 3 * H * in, 3 * H, H);
        CVecMap bi(p + 3 * H * in + 3 * H * H, 3 * H);
        CVecMap bh(p + 3 * H * in + 3 * H * H + 3 * H, 3 * H);
        const Eigen::Index TB = static_cast<Eigen::Index>(T) * B;
        c.gi.noalias() = Wi * c.x;
        c.gi.colwise() += bi;
        c.hs = Mat::Zero(H, TB + B);
        c.r.resize(H, TB);
        c.z.resize(H, TB);
        c.n.resize(H, TB);
        c.ghn.resize(H, TB);
        Mat gh(3 * H, B);
        for (int t = 0; t < T; ++t) {
            const Eigen::Index col = static_cast<Eigen::Index>(t) * B;
            gh.noalias() = Wh * c.hs.middleCols(col, B);
            gh.colwise() += bh;
            for (int b = 0; b < B; ++b) {
                const Eigen::Index j = col + b;
                if (!active(t, b)) {
                    c.hs.col(j + B) = c.hs.col(j);
                    c.r.col(j).setZero();
                    c.z.col(j).setZero();
                    c.n.col(j).setZero();
                    c.ghn.col(j).setZero();
                    continue;
                }
                for (int h = 0; h < H; ++h) {
                    const double r = sigmoid(c.gi(h, j) + gh(h, b));
                    const double z = sigmoid(c.gi(H + h, j) + gh(H + h, b));
                    const double ghn = gh(2 * H + h, b);
                    const double n = std::tanh(c.gi(2 * H + h, j) + r * ghn);
                    c.r(h, j) = r;
                    c.z(h, j) = z;
                    c.n(h, j) = n;
                    c.ghn(h, j) = ghn;
                    c.hs(h, j + B) = (1.0 - z) * n + z * c.hs(h, j);
                }
            }
        }
        if (l + 1 < layers_) {
            LayerCache& next = cache[static_cast<std::size_t>(l + 1)];
            next.x = c.hs.rightCols(TB);
            if (use_dropout) {
                c.drop.resize(H, TB);
                for (Eigen::Index j = 0; j < TB; ++j) {
                    for (int h = 0; h < H; ++h) c.drop(h, j) = rng->bernoulli(dropout) ? 0.0 : keep_scale;
                }
                next.x.array() *= c.drop.array();
            }
        }
    }

    const LayerCache& top = cache.back();
    const double* head = params_.data() + head_offset();
    CVecMap w(head, H);
    const double bias = head[H];
    const Mat h_last = top.hs.middleCols(static_cast<Eigen::Index>(T) * B, B);
    double loss = 0.0;
    Vec dlogit(B);
    for (int b = 0; b < B; ++b) {
        const double logit = w.dot(h_last.col(b)) + bias;
        const double y = batch[static_cast<std::size_t>(b)]->label ? 1.0 : 0.0;
        loss += softplus(logit) - y * logit;
        dlogit(b) = (sigmoid(logit) - y) / B;
    }
    loss /= B;
    if (!want_grad) return loss;

    double* g = grad.data();
    VecMap gw(g + head_offset(), H);
    gw.noalias() += h_last * dlogit;
    g[head_offset() + static_cast<std::size_t>(H)] += dlogit.sum();

    // Gradient w.r.t. the current layer's outputs, H x (T*B).
    const Eigen::Index TB = static_cast<Eigen::Index>(T) * B;
    Mat d_out = Mat::Zero(H, TB);
    d_out.middleCols(static_cast<Eigen::Index>(T - 1) * B, B) = w * dlogit.transpose();

    for (int l = layers_ - 1; l >= 0; --l) {
        const LayerCache& c = cache[static_cast<std::size_t>(l)];
        const int in = layer_input(l);
        const double* p = params_.data() + layer_offset(l);
        CMatMap Wi(p, 3 * H, in);
        CMatMap Wh(p + 3 * H * in, 3 * H, H);
        double* gp = g + layer_offset(l);
        MatMap gWi(gp, 3 * H, in);
        MatMap gWh(gp + 3 * H * in, 3 * H, H);
        VecMap gbi(gp + 3 * H * in + 3 * H * H, 3 * H);
        VecMap gbh(gp + 3 * H * in + 3 * H * H + 3 * H, 3 * H);

        Mat dgi = Mat::Zero(3 * H, TB);
        Mat dgh(3 * H, B);
        Mat dh = Mat::Zero(H, B);
        Mat dh_prev(H, B);
        for (int t = T - 1; t >= 0; --t) {
            const Eigen::Index col = static_cast<Eigen::Index>(t) * B;
            dh += d_out.middleCols(col, B);
            dgh.setZero();
            for (int b = 0; b < B; ++b) {
                const Eigen::Index j = col + b;
                if (!active(t, b)) {
                    dh_prev.col(b) = dh.col(b);
                    continue;
                }
                for (int h = 0; h < H; ++h) {
                    const double r = c.r(h, j), z = c.z(h, j), n = c.n(h, j);
                    const double hp = c.hs(h, j);
                    const double d = dh(h, b);
                    const double dn = d * (1.0 - z);
                    const double dz = d * (hp - n);
                    const double dan = dn * (1.0 - n * n);
                    const double daz = dz * z * (1.0 - z);
                    const double dr = dan * c.ghn(h, j);
                    const double dar = dr * r * (1.0 - r);
                    dgi(h, j) = dar;
                    dgi(H + h, j) = daz;
                    dgi(2 * H + h, j) = dan;
                    dgh(h, b) = dar;
                    dgh(H + h, b) = daz;
                    dgh(2 * H + h, b) = dan * r;
                    dh_prev(h, b) = d * z;
                }
            }
            gWh.noalias() += dgh * c.hs.middleCols(col, B).transpose();
            gbh += dgh.rowwise().sum();
            dh_prev.noalias() += Wh.transpose() * dgh;
            dh.swap(dh_prev);
        }
        gWi.noalias() += dgi * c.x.transpose();
        gbi += dgi.rowwise().sum();
        if (l > 0) {
            d_out.noalias() = Wi.transpose() * dgi;
            const LayerCache& below = cache[static_cast<std::size_t>(l - 1)];
            if (below.drop.size() > 0) d_out.array() *= below.drop.array();
        }
    }
    return loss;
}

double GruModel::predict(const SequenceInstance& s) const {
    if (s.steps.empty()) throw DataError("GRU input sequence has length 0");
    const SequenceInstance x = standardizer.apply(s);
    const int H = hidden_;
    Vec h_in, h;
    for (int l = 0; l < layers_; ++l) {
        const int in = layer_input(l);
        const double* p = params_.data() + layer_offset(l);
        CMatMap Wi(p, 3 * H, in);
        CMatMap Wh(p + 3 * H * in, 3 * H, H);
        CVecMap bi(p + 3 * H * in + 3 * H * H, 3 * H);
        CVecMap bh(p + 3 * H * in + 3 * H * H + 3 * H, 3 * H);
        const Eigen::Index T = static_cast<Eigen::Index>(x.steps.size());
        Mat inputs(in, T);
        if (l == 0) {
            for (Eigen::Index t = 0; t < T; ++t) {
                for (int f = 0; f < in; ++f) inputs(f, t) = x.steps[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)];
            }
        } else {
            inputs = Eigen::Map<Mat>(h_in.data(), in, T);
        }
        Mat gi = Wi * inputs;
        gi.colwise() += bi;
        h = Vec::Zero(H);
        Vec outputs(static_cast<Eigen::Index>(H) * T);
        Vec gh(3 * H);
        for (Eigen::Index t = 0; t < T; ++t) {
            gh.noalias() = Wh * h;
            gh += bh;
            for (int k = 0; k < H; ++k) {
                const double r = sigmoid(gi(k, t) + gh(k));
                const double z = sigmoid(gi(H + k, t) + gh(H + k));
                const double n = std::tanh(gi(2 * H + k, t) + r * gh(2 * H + k));
                h(k) = (1.0 - z) * n + z * h(k);
            }
            outputs.segment(t * H, H) = h;
        }
        h_in = std::move(outputs);
    }
    const double* head = params_.data() + head_offset();
    return sigmoid(CVecMap(head, H).dot(h) + head[H]);
}

nlohmann::json to_json(const GruModel& m) {
    nlohmann::json j;
    j["format"] = "trajmatch.gru";
    j["version"] = 1;
    j["input_size"] = m.input_size();
    j["hidden_size"] = m.hidden_size();
    j["num_layers"] = m.num_layers();
    j["standardizer"] = {{"mean", m.standardizer.mean}, {"scale", m.standardizer.scale}};
    j["parameters"] = std::vector<double>(m.parameters().begin(), m.parameters().end());
    return j;
}

GruModel gru_model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "trajmatch.gru" || j.at("version") != 1) throw DataError("not a GRU model file");
        GruModel m(j.at("input_size").get<int>(), j.at("hidden_size").get<int>(), j.at("num_layers").get<int>());
        m.standardizer.mean = j.at("standardizer").at("mean").get<std::array<double, kGruFeatures>>();
        m.standardizer.scale = j.at("standardizer").at("scale").get<std::array<double, kGruFeatures>>();
        const auto params = j.at("parameters").get<std::vector<double>>();
        if (params.size() != m.parameter_count()) throw DataError("GRU parameter count mismatch");
        std::copy(params.begin(), params.end(), m.parameters().begin());
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed GRU model: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("malformed GRU model: ") + e.what());
    }
}

void save_gru_model(const std::filesystem::path& path, const GruModel& m) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    f << to_json(m).dump() << '\n';
}

GruModel load_gru_model(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read " + path.string());
    try {
        return gru_model_from_json(nlohmann::json::parse(f));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void GruConfig::validate() const {
    if (hidden_size <= 0 || num_layers <= 0) throw ConfigError("GRU sizes must be positive");
    if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must lie in [0, 1)");
    if (max_length <= 0 || max_epochs <= 0 || batch_size <= 0) throw ConfigError("GRU lengths must be positive");
    if (patience <= 0) throw ConfigError("patience must be positive");
    if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
    if (validation_fraction <= 0 || validation_fraction >= 1) throw ConfigError("validation fraction must lie in (0, 1)");
}

nlohmann::json to_json(const GruConfig& c) {
    return {{"hidden_size", c.hidden_size},     {"num_layers", c.num_layers}, {"dropout", c.dropout},
            {"max_length", c.max_length},       {"max_epochs", c.max_epochs}, {"patience", c.patience},
            {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"validation_fraction", c.validation_fraction},
            {"seed", c.seed}};
}

bool EarlyStopping::update(double loss) {
    ++epoch_;
    improved_ = best_epoch_ == 0 || loss < best_;
    if (improved_) {
        best_ = loss;
        best_epoch_ = epoch_;
        bad_ = 0;
        return false;
    }
    return ++bad_ >= patience_;
}

GruModel train_gru(std::span<const SequenceInstance> data, const GruConfig& config, GruTrainingReport* report) {
    config.validate();
    std::vector<bool> labels;
    std::vector<std::size_t> all;
    for (std::size_t i = 0; i < data.size(); ++i) {
        labels.push_back(data[i].label);
        all.push_back(i);
    }
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
    if (positives == 0 || positives == data.size()) throw TrainingError("GRU training data must contain both classes");
    auto [fit_idx, val_idx] = stratified_holdout(all, labels, config.validation_fraction, derive_seed(config.seed, 1));
    if (val_idx.empty()) val_idx = fit_idx;

    std::vector<const SequenceInstance*> fit_raw;
    for (std::size_t i : fit_idx) fit_raw.push_back(&data[i]);
    GruModel model(kGruFeatures, config.hidden_size, config.num_layers);
    model.standardizer = Standardizer::fit(fit_raw);
    std::vector<SequenceInstance> fit, val;
    for (std::size_t i : fit_idx) {
        fit.push_back(model.standardizer.apply(data[i]));
        if (fit.back().steps.size() > static_cast<std::size_t>(config.max_length)) fit.back().steps.resize(static_cast<std::size_t>(config.max_length));
    }
    for (std::size_t i : val_idx) {
        val.push_back(model.standardizer.apply(data[i]));
        if (val.back().steps.size() > static_cast<std::size_t>(config.max_length)) val.back().steps.resize(static_cast<std::size_t>(config.max_length));
    }
    std::vector<const SequenceInstance*> val_ptr;
    for (const auto& s : val) val_ptr.push_back(&s);

    Rng rng(config.seed);
    model.init_uniform(rng);
    const std::size_t n = model.parameter_count();
    std::vector<double> grad(n), m1(n, 0.0), m2(n, 0.0), best(model.parameters().begin(), model.parameters().end());
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    double b1t = 1.0, b2t = 1.0;
    EarlyStopping stopper(config.patience);
    GruTrainingReport local;
    GruTrainingReport& rep = report ? *report : local;
    rep = {};

    std::vector<std::size_t> order(fit.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<const SequenceInstance*> batch;
            for (std::size_t k = start; k < end; ++k) batch.push_back(&fit[order[k]]);
            std::fill(grad.begin(), grad.end(), 0.0);
            const double loss = model.loss_and_gradient(batch, grad, config.dropout, &rng);
            if (!std::isfinite(loss)) {
                throw TrainingError("GRU loss diverged (non-finite) in epoch " + std::to_string(epoch + 1));
            }
            epoch_loss += loss * static_cast<double>(batch.size());
            b1t *= kBeta1;
            b2t *= kBeta2;
            auto w = model.parameters();
            for (std::size_t i = 0; i < n; ++i) {
                m1[i] = kBeta1 * m1[i] + (1 - kBeta1) * grad[i];
                m2[i] = kBeta2 * m2[i] + (1 - kBeta2) * grad[i] * grad[i];
                w[i] -= config.learning_rate * (m1[i] / (1 - b1t)) / (std::sqrt(m2[i] / (1 - b2t)) + kEps);
            }
        }
        rep.train_losses.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(fit.size(), 1)));
        double val_loss = 0.0;
        for (std::size_t start = 0; start < val_ptr.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(val_ptr.size(), start + static_cast<std::size_t>(config.batch_size));
            std::span<const SequenceInstance* const> batch(val_ptr.data() + start, end - start);
            val_loss += model.loss_and_gradient(batch, {}) * static_cast<double>(batch.size());
        }
        val_loss /= static_cast<double>(val_ptr.size());
        if (!std::isfinite(val_loss)) throw TrainingError("GRU validation loss is non-finite");
        rep.validation_losses.push_back(val_loss);
        const bool stop = stopper.update(val_loss);
        if (stopper.improved()) std::copy(model.parameters().begin(), model.parameters().end(), best.begin());
        if (stop) {
            rep.stopped_early = true;
            break;
        }
    }
    std::copy(best.begin(), best.end(), model.parameters().begin());
    rep.best_epoch = stopper.best_epoch();
    return model;
}

GruCrossValidationResult cross_validate_gru(std::span<const PairDay> days, const GruConfig& config, int folds,
                                            std::uint64_t fold_seed) {
    std::vector<bool> labels;
    std::vector<SequenceInstance> seqs;
    for (const auto& d : days) {
        if (!d.label) throw DataError("cross-validation needs labels; day " + d.pair_id + " has none");
        labels.push_back(*d.label);
        seqs.push_back(make_sequence(d, config.max_length));
    }
    const auto fold_of = make_folds(labels, folds, fold_seed);
    GruCrossValidationResult r;
    double infer_seconds = 0.0;
    for (int f = 0; f < folds; ++f) {
        std::vector<SequenceInstance> train;
        std::vector<std::size_t> val;
        for (std::size_t i = 0; i < days.size(); ++i) {
            if (fold_of[i] == f) {
                val.push_back(i);
            } else {
                train.push_back(seqs[i]);
            }
        }
        GruConfig fc = config;
        fc.seed = derive_seed(config.seed, static_cast<std::uint64_t>(f));
        GruTrainingReport rep;
        const GruModel model = train_gru(train, fc, &rep);
        ConfusionCounts counts;
        for (std::size_t i : val) {
            const auto t0 = std::chrono::steady_clock::now();
            const double p = model.predict(make_sequence(days[i], config.max_length));
            infer_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            counts.add(p > 0.5, labels[i]);
        }
        r.fold_counts.push_back(counts);
        r.fold_metrics.push_back(compute_metrics(counts));
        r.fold_epochs.push_back(static_cast<int>(rep.validation_losses.size()));
        r.pooled += counts;
    }
    r.metrics = mean_metrics(r.fold_metrics);
    std::vector<Metrics> weighted;
    for (const auto& c : r.fold_counts) weighted.push_back(weighted_metrics(c));
    r.weighted = mean_metrics(weighted);
    r.seconds_per_instance = days.empty() ? 0.0 : infer_seconds / static_cast<double>(days.size());
    r.metrics.exec_time_seconds = r.seconds_per_instance;
    r.weighted.exec_time_seconds = r.seconds_per_instance;
    return r;
}

nlohmann::json to_json(const GruCrossValidationResult& r) {
    nlohmann::json j;
    j["averaging"] = "per-fold metrics (weighted: by class support within the fold), averaged across folds";
    j["metrics"] = to_json(r.metrics);
    j["weighted"] = to_json(r.weighted);
    j["pooled_counts"] = to_json(r.pooled);
    j["folds"] = nlohmann::json::array();
    for (std::size_t i = 0; i < r.fold_counts.size(); ++i) {
        j["folds"].push_back({{"fold", i},
                              {"counts", to_json(r.fold_counts[i])},
                              {"metrics", to_json(r.fold_metrics[i])},
                              {"epochs", r.fold_epochs[i]}});
    }
    j["timing"] = {{"seconds_per_instance", r.seconds_per_instance}};
    return j;
}

GruGradientCheck check_gru_gradients(const GruModel& model, std::span<const SequenceInstance* const> batch,
                                     double step, double abs_floor) {
    GruGradientCheck out;
    out.parameters = model.parameter_count();
    std::vector<double> analytic(model.parameter_count(), 0.0);
    model.loss_and_gradient(batch, analytic);
    GruModel probe = model;
    auto w = probe.parameters();
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double saved = w[i];
        w[i] = saved + step;
        const double up = probe.loss_and_gradient(batch, {});
        w[i] = saved - step;
        const double down = probe.loss_and_gradient(batch, {});
        w[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double a = analytic[i];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), abs_floor});
        out.max_relative_error = std::max(out.max_relative_error, rel);
        out.max_abs_analytic = std::max(out.max_abs_analytic, std::abs(a));
    }
    return out;
}

}  // namespace trajmatch
