#include "trajmatch/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "trajmatch/error.hpp"
#include "trajmatch/parallel.hpp"
#include "trajmatch/quality.hpp"
#include "trajmatch/random.hpp"

namespace trajmatch {

namespace {

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

double harmonic(double p, double r) { return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void ConfusionCounts::add(bool predicted, bool actual) {
    if (predicted) {
        ++(actual ? tp : fp);
    } else {
        ++(actual ? fn : tn);
    }
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
}

ConfusionCounts confusion(const std::vector<bool>& predicted, const std::vector<bool>& actual) {
    if (predicted.size() != actual.size()) throw Error("prediction and label counts differ");
    ConfusionCounts c;
    for (std::size_t i = 0; i < predicted.size(); ++i) c.add(predicted[i], actual[i]);
    return c;
}

Metrics compute_metrics(const ConfusionCounts& c) {
    if (c.total() == 0) throw Error("metrics of an empty confusion matrix");
    const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
    Metrics m;
    m.precision = ratio(tp, tp + fp);
    m.recall = ratio(tp, tp + fn);
    m.accuracy = (tp + tn) / static_cast<double>(c.total());
    m.f1 = harmonic(m.precision, m.recall);
    const double den = std::sqrt(tp + fp) * std::sqrt(tp + fn) * std::sqrt(tn + fp) * std::sqrt(tn + fn);
    m.mcc = den > 0 ? std::clamp((tp * tn - fp * fn) / den, -1.0, 1.0) : 0.0;
    return m;
}

Metrics weighted_metrics(const ConfusionCounts& c) {
    const Metrics pos = compute_metrics(c);
    const Metrics neg = compute_metrics(ConfusionCounts{c.tn, c.fn, c.tp, c.fp});
    const double sp = static_cast<double>(c.tp + c.fn);
    const double sn = static_cast<double>(c.tn + c.fp);
    const double total = sp + sn;
    Metrics m = pos;
    m.precision = (sp * pos.precision + sn * neg.precision) / total;
    m.recall = (sp * pos.recall + sn * neg.recall) / total;
    m.f1 = (sp * pos.f1 + sn * neg.f1) / total;
    return m;
}

Metrics mean_metrics(std::span<const Metrics> rows) {
    Metrics m;
    if (rows.empty()) return m;
    for (const auto& r : rows) {
        m.precision += r.precision;
        m.recall += r.recall;
        m.accuracy += r.accuracy;
        m.f1 += r.f1;
        m.mcc += r.mcc;
        m.exec_time_seconds += r.exec_time_seconds;
    }
    const double n = static_cast<double>(rows.size());
    m.precision /= n;
    m.recall /= n;
    m.accuracy /= n;
    m.f1 /= n;
    m.mcc /= n;
    m.exec_time_seconds /= n;
    return m;
}

nlohmann::json to_json(const ConfusionCounts& c) {
    return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

nlohmann::json to_json(const Metrics& m) {
    return {{"precision", m.precision}, {"recall", m.recall}, {"accuracy", m.accuracy},
            {"f1", m.f1},               {"mcc", m.mcc}};
}

std::vector<int> make_folds(const std::vector<bool>& labels, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("fold count must be at least 2");
    if (labels.size() < static_cast<std::size_t>(k)) throw ConfigError("fewer instances than folds");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
    Rng rng(seed);
    rng.shuffle(pos);
    rng.shuffle(neg);
    std::vector<int> fold(labels.size(), 0);
    std::size_t dealt = 0;
    for (const auto* group : {&pos, &neg}) {
        for (std::size_t idx : *group) fold[idx] = static_cast<int>(dealt++ % static_cast<std::size_t>(k));
    }
    return fold;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(std::span<const std::size_t> indices,
                                                                                  const std::vector<bool>& labels,
                                                                                  double fraction,
                                                                                  std::uint64_t seed) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t idx : indices) (labels[idx] ? pos : neg).push_back(idx);
    Rng rng(seed);
    rng.shuffle(pos);
    rng.shuffle(neg);
    std::vector<std::size_t> kept, held;
    for (auto* group : {&pos, &neg}) {
        std::size_t take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(group->size())));
        if (fraction > 0 && take == 0 && group->size() >= 2) take = 1;
        take = std::min(take, group->size() > 0 ? group->size() - 1 : 0);
        held.insert(held.end(), group->begin(), group->begin() + static_cast<std::ptrdiff_t>(take));
        kept.insert(kept.end(), group->begin() + static_cast<std::ptrdiff_t>(take), group->end());
    }
    std::sort(kept.begin(), kept.end());
    std::sort(held.begin(), held.end());
    return {kept, held};
}

std::vector<PreparedDay> prepare_days(std::span<const PairDay> days, const PipelineConfig& config, int input_size,
                                      int workers) {
    config.validate();
    std::vector<PreparedDay> out(days.size());
    parallel_for(days.size(), workers, [&](std::size_t i) { out[i] = prepare_day(days[i], config, input_size); });
    return out;
}

CrossValidationResult cross_validate(std::span<const PreparedDay> days, const CrossValidationConfig& config,
                                     const ModelContext& context) {
    std::vector<bool> label_vec;
    for (const auto& d : days) {
        if (!d.label) throw DataError("cross-validation needs labels; day " + d.pair_id + " has none");
        label_vec.push_back(*d.label);
    }
    const auto fold_of = make_folds(label_vec, config.folds, config.seed);

    CrossValidationResult result;
    result.verdicts.resize(days.size());
    std::vector<double> classify_time(days.size(), 0.0);
    std::vector<Metrics> fold_metrics, fold_weighted;
    for (const auto& d : days) result.counters += d.counters;

    for (int f = 0; f < config.folds; ++f) {
        FoldResult fr;
        fr.fold = f;
        std::vector<std::size_t> train_idx, val_idx;
        for (std::size_t i = 0; i < days.size(); ++i) (fold_of[i] == f ? val_idx : train_idx).push_back(i);
        auto [fit_idx, cal_idx] = stratified_holdout(train_idx, label_vec, config.calibration_fraction,
                                                     derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(f)));
        if (cal_idx.empty()) cal_idx = fit_idx;
        std::vector<const PreparedDay*> fit, cal;
        for (std::size_t i : fit_idx) fit.push_back(&days[i]);
        for (std::size_t i : cal_idx) cal.push_back(&days[i]);

        const auto pairs = training_pairs_from(fit);
        OptimizerConfig opt = config.optimizer;
        opt.seed = derive_seed(config.optimizer.seed, static_cast<std::uint64_t>(f));
        TrainingReport report;
        const auto t_train = std::chrono::steady_clock::now();
        SiameseModel model = train_siamese(config.architecture, pairs, config.contrastive, opt, &report);
        model.context = context;
        fr.threshold = calibrate_threshold(model, cal);
        fr.train_seconds = seconds_since(t_train);

        std::vector<StageCounters> per_day(val_idx.size());
        const auto t_cls = std::chrono::steady_clock::now();
        parallel_for(val_idx.size(), config.workers, [&](std::size_t k) {
            const std::size_t i = val_idx[k];
            const auto t0 = std::chrono::steady_clock::now();
            result.verdicts[i] = classify_prepared(days[i], model, &per_day[k]);
            classify_time[i] = seconds_since(t0);
        });
        fr.classify_seconds = seconds_since(t_cls);
        for (std::size_t k = 0; k < val_idx.size(); ++k) {
            const std::size_t i = val_idx[k];
            fr.counts.add(result.verdicts[i].decision, label_vec[i]);
            result.counters += per_day[k];
        }
        fr.metrics = compute_metrics(fr.counts);
        fr.weighted = weighted_metrics(fr.counts);
        fr.training_pairs = pairs.size();
        fr.training_days = fit.size();
        fr.calibration_days = cal.size();
        fr.validation_days = val_idx.size();
        fr.epoch_losses = report.epoch_losses;
        result.pooled += fr.counts;
        fold_metrics.push_back(fr.metrics);
        fold_weighted.push_back(fr.weighted);
        result.folds.push_back(std::move(fr));
    }
    result.metrics = mean_metrics(fold_metrics);
    result.weighted = mean_metrics(fold_weighted);
    double total = 0.0;
    for (std::size_t i = 0; i < days.size(); ++i) total += days[i].prepare_seconds + classify_time[i];
    result.seconds_per_day = days.empty() ? 0.0 : total / static_cast<double>(days.size());
    result.metrics.exec_time_seconds = result.seconds_per_day;
    result.weighted.exec_time_seconds = result.seconds_per_day;
    return result;
}

namespace {

nlohmann::json to_json_counters(const StageCounters& c) {
    return {{"images_rendered", c.images_rendered}, {"filter_checks", c.filter_checks},
            {"localizations", c.localizations},     {"crops", c.crops},
            {"overlap_checks", c.overlap_checks},   {"network_invocations", c.network_invocations}};
}

}  // namespace

nlohmann::json to_json(const CrossValidationResult& r) {
    nlohmann::json j;
    j["averaging"] = "per-fold metrics (weighted: by class support within the fold), averaged across folds";
    j["metrics"] = to_json(r.metrics);
    j["weighted"] = to_json(r.weighted);
    j["pooled_counts"] = to_json(r.pooled);
    j["stage_counters"] = to_json_counters(r.counters);
    auto& folds = j["folds"] = nlohmann::json::array();
    for (const auto& f : r.folds) {
        folds.push_back({{"fold", f.fold},
                         {"counts", to_json(f.counts)},
                         {"metrics", to_json(f.metrics)},
                         {"weighted", to_json(f.weighted)},
                         {"threshold", f.threshold},
                         {"training_pairs", f.training_pairs},
                         {"training_days", f.training_days},
                         {"calibration_days", f.calibration_days},
                         {"validation_days", f.validation_days},
                         {"epoch_losses", f.epoch_losses}});
    }
    auto& timing = j["timing"];
    timing["seconds_per_day"] = r.seconds_per_day;
    timing["train_seconds"] = nlohmann::json::array();
    timing["classify_seconds"] = nlohmann::json::array();
    for (const auto& f : r.folds) {
        timing["train_seconds"].push_back(f.train_seconds);
        timing["classify_seconds"].push_back(f.classify_seconds);
    }
    return j;
}

std::vector<AblationRow> run_ablation(std::span<const PairDay> days, const AblationConfig& config,
                                      const ModelLookup& lookup) {
    std::vector<AblationRow> rows;
    for (int layers : config.layer_counts) {
        LayerSpec spec;
        spec.num_layers = layers;
        spec.validate();
        std::optional<double> threshold;
        for (PipelineVariant v : config.variants) {
            AblationRow row;
            row.variant = v;
            row.num_layers = layers;
            if (stages_of(v).filter && !threshold) {
                const double pct = config.filter_percentile.value_or(default_filter_percentile(layers));
                threshold = corpus_filter_threshold(days, spec, config.canvas, pct, config.render);
            }
            if (stages_of(v).filter) row.filter_threshold = threshold;

            std::optional<SiameseModel> model = lookup ? lookup(v, layers) : std::nullopt;
            if (!model && !config.train_missing) {
                row.skipped = true;
                row.diagnostic = "no trained model for " + std::string(variant_name(v)) + " at " +
                                 std::to_string(layers) + " layers";
                rows.push_back(std::move(row));
                continue;
            }
            PipelineConfig pc;
            pc.variant = v;
            pc.layers = spec;
            pc.canvas = config.canvas;
            pc.render = config.render;
            pc.filter_threshold = row.filter_threshold;
            pc.crop_pad = config.crop_pad;
            const int input_size = model ? model->input_size() : config.cv.architecture.input_size;

            try {
                const auto t0 = std::chrono::steady_clock::now();
                const auto prepared = prepare_days(days, pc, input_size, config.workers);
                const double prepare_wall = seconds_since(t0);
                for (const auto& p : prepared) row.counters += p.counters;
                if (model) {
                    row.source = "model";
                    std::vector<Verdict> verdicts(prepared.size());
                    std::vector<StageCounters> per_day(prepared.size());
                    const auto t1 = std::chrono::steady_clock::now();
                    parallel_for(prepared.size(), config.workers, [&](std::size_t i) {
                        verdicts[i] = classify_prepared(prepared[i], *model, &per_day[i]);
                    });
                    row.exec_time_seconds = prepare_wall + seconds_since(t1);
                    for (std::size_t i = 0; i < prepared.size(); ++i) {
                        row.counters += per_day[i];
                        if (prepared[i].label) row.counts.add(verdicts[i].decision, *prepared[i].label);
                    }
                    row.metrics = compute_metrics(row.counts);
                    row.weighted = weighted_metrics(row.counts);
                } else {
                    row.source = "cross-validation";
                    ModelContext ctx{v, layers, config.canvas, row.filter_threshold, config.crop_pad};
                    const auto cv = cross_validate(prepared, config.cv, ctx);
                    double classify = 0.0;
                    for (const auto& f : cv.folds) classify += f.classify_seconds;
                    row.exec_time_seconds = prepare_wall + classify;
                    row.counts = cv.pooled;
                    row.metrics = cv.metrics;
                    row.weighted = cv.weighted;
                    row.counters = cv.counters;
                }
                row.prepare_seconds = prepare_wall;
                row.metrics.exec_time_seconds = row.exec_time_seconds;
                row.weighted.exec_time_seconds = row.exec_time_seconds;
            } catch (const TrainingError& e) {
                AblationRow failed;
                failed.variant = v;
                failed.num_layers = layers;
                failed.skipped = true;
                failed.diagnostic = e.what();
                failed.filter_threshold = row.filter_threshold;
                row = std::move(failed);
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

nlohmann::json to_json(const AblationRow& row) {
    nlohmann::json j;
    j["variant"] = variant_name(row.variant);
    j["layers"] = row.num_layers;
    j["skipped"] = row.skipped;
    if (row.skipped) {
        j["diagnostic"] = row.diagnostic;
        return j;
    }
    j["source"] = row.source;
    j["filter_threshold"] = row.filter_threshold ? nlohmann::json(*row.filter_threshold) : nlohmann::json(nullptr);
    j["metrics"] = to_json(row.metrics);
    j["weighted"] = to_json(row.weighted);
    j["counts"] = to_json(row.counts);
    j["stage_counters"] = to_json_counters(row.counters);
    j["timing"] = {{"exec_time_seconds", row.exec_time_seconds}, {"prepare_seconds", row.prepare_seconds}};
    return j;
}

std::string format_ablation_table(std::span<const AblationRow> rows) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-15s %6s %9s %7s %9s %6s %7s %10s\n", "variant", "layers", "precision",
                  "recall", "accuracy", "f1", "mcc", "time_s");
    os << line;
    for (const auto& r : rows) {
        const std::string name(variant_name(r.variant));
        if (r.skipped) {
            std::snprintf(line, sizeof line, "%-15s %6d  skipped: ", name.c_str(), r.num_layers);
            os << line << r.diagnostic << '\n';
            continue;
        }
        const Metrics& m = r.weighted;
        std::snprintf(line, sizeof line, "%-15s %6d %9.3f %7.3f %9.3f %6.3f %7.3f %10.2f\n", name.c_str(),
                      r.num_layers, m.precision, m.recall, m.accuracy, m.f1, m.mcc, r.exec_time_seconds);
        os << line;
    }
    return os.str();
}

}  // namespace trajmatch
