#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "trajmatch/error.hpp"
#include "trajmatch/eval.hpp"
#include "trajmatch/gradcheck.hpp"
#include "trajmatch/gru.hpp"
#include "trajmatch/ingest.hpp"
#include "trajmatch/parallel.hpp"
#include "trajmatch/pipeline.hpp"
#include "trajmatch/quality.hpp"
#include "trajmatch/records.hpp"
#include "trajmatch/routine.hpp"
#include "trajmatch/synth.hpp"
#include "trajmatch/timeutil.hpp"
#include "trajmatch/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace trajmatch;

namespace {

int g_workers = default_workers();
std::string g_config_file;

struct PipelineOptions {
    int layers = 24;
    std::string variant = "entire";
    int canvas = 256;
    int margin = 8;
    double filter_threshold = -1.0;
    double filter_percentile = -1.0;
    int crop_pad = 2;
    double max_gap_minutes = 0.0;

    void add(CLI::App* app, bool with_variant = true) {
        app->add_option("--layers", layers, "Layer count")->capture_default_str();
        if (with_variant) {
            app->add_option("--variant", variant, "baseline | overlap | overlap-crop | overlap-filter | entire")
                ->capture_default_str();
            app->add_option("--filter-threshold", filter_threshold, "Colored-pixel threshold (overrides the percentile)");
            app->add_option("--filter-percentile", filter_percentile,
                            "Corpus percentile for the threshold (default 25 at one layer, 50 otherwise)");
            app->add_option("--crop-pad", crop_pad, "Padding around the cropped box")->capture_default_str();
        }
        app->add_option("--canvas", canvas, "Canvas width and height in pixels")->capture_default_str();
        app->add_option("--margin", margin, "Canvas margin in pixels")->capture_default_str();
        app->add_option("--max-gap-minutes", max_gap_minutes, "Do not connect samples further apart (0 = always)")
            ->capture_default_str();
    }

    LayerSpec layer_spec() const {
        LayerSpec s;
        s.num_layers = layers;
        s.validate();
        return s;
    }
    CanvasSpec canvas_spec() const {
        CanvasSpec c{canvas, canvas, margin};
        c.validate();
        return c;
    }
    RenderOptions render() const {
        RenderOptions r;
        if (max_gap_minutes > 0) r.max_gap_ms = static_cast<std::int64_t>(max_gap_minutes * 60'000.0);
        return r;
    }

    void check() const {
        parse_variant(variant);
        layer_spec();
        canvas_spec();
        if (crop_pad < 0) throw ConfigError("--crop-pad must be non-negative");
        if (filter_percentile > 100) throw ConfigError("--filter-percentile must lie in [0, 100]");
    }

    /// Validates everything and resolves the filter threshold from the corpus.
    PipelineConfig resolve(std::span<const PairDay> days) const {
        PipelineConfig pc;
        pc.variant = parse_variant(variant);
        pc.layers = layer_spec();
        pc.canvas = canvas_spec();
        pc.render = render();
        pc.crop_pad = crop_pad;
        if (crop_pad < 0) throw ConfigError("--crop-pad must be non-negative");
        if (stages_of(pc.variant).filter) {
            if (filter_threshold >= 0) {
                pc.filter_threshold = filter_threshold;
            } else {
                const double pct = filter_percentile >= 0 ? filter_percentile : default_filter_percentile(layers);
                if (pct > 100) throw ConfigError("--filter-percentile must lie in [0, 100]");
                pc.filter_threshold = corpus_filter_threshold(days, pc.layers, pc.canvas, pct, pc.render);
            }
        }
        pc.validate();
        return pc;
    }
};

json effective_config(const CLI::App* app) {
    json j = json::object();
    for (const CLI::Option* opt : app->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string name = opt->get_lnames().front();
        if (name == "help") continue;
        if (opt->count() > 0) {
            const auto& res = opt->results();
            if (opt->get_type_size() == 0 && opt->get_expected_min() == 0) {
                j[name] = true;
            } else if (res.size() == 1) {
                j[name] = res.front();
            } else {
                j[name] = res;
            }
        } else {
            const std::string def = opt->get_default_str();
            j[name] = def.empty() ? json(nullptr) : json(def);
        }
    }
    return j;
}

json provenance(const CLI::App* sub) {
    return {{"tool", "trajmatch"},
            {"version", kVersion},
            {"subcommand", sub->get_name()},
            {"workers", g_workers},
            {"config_file", g_config_file.empty() ? json(nullptr) : json(g_config_file)},
            {"config", effective_config(sub)}};
}

std::vector<PairDay> read_days(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read " + path);
    return read_pair_days(f);
}

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    f << j.dump(2) << '\n';
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read " + path);
    return f;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (const auto& cell : split_delimited(text, ',')) {
        try {
            std::size_t used = 0;
            const int v = std::stoi(cell, &used);
            if (used != cell.size()) throw std::invalid_argument(cell);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("not an integer list: " + text);
        }
    }
    if (out.empty()) throw ConfigError("empty list");
    return out;
}

// ---------------------------------------------------------------------------

struct IngestCmd {
    std::string locations, roster, labels, out;
    ColumnMapping mapping;
    std::string delimiter = ",";

    void add(CLI::App& app) {
        auto* s = app.add_subcommand("ingest", "Group raw location rows into labelled pair-days");
        s->add_option("--locations", locations, "Location CSV")->required();
        s->add_option("--roster", roster, "device_id,pair_id CSV")->required();
        s->add_option("--labels", labels, "pair_id,local_date,report_a,report_b CSV")->required();
        s->add_option("--out", out, "Output pair-day NDJSON")->required();
        s->add_option("--delimiter", delimiter, "Field delimiter")->capture_default_str();
        s->add_option("--col-device", mapping.device)->capture_default_str();
        s->add_option("--col-timestamp", mapping.timestamp)->capture_default_str();
        s->add_option("--col-lat", mapping.lat)->capture_default_str();
        s->add_option("--col-lon", mapping.lon)->capture_default_str();
        s->add_option("--col-tz", mapping.tz_offset)->capture_default_str();
        s->callback([this, s] { run(s); });
    }

    void run(const CLI::App* s) {
        if (delimiter.size() != 1) throw ConfigError("--delimiter must be a single character");
        mapping.delimiter = delimiter[0];
        auto lf = open_in(locations);
        const auto parsed = parse_locations(lf, mapping);
        auto rf = open_in(roster);
        const auto roster_rows = parse_roster(rf, mapping.delimiter);
        auto bf = open_in(labels);
        const auto label_rows = parse_labels(bf, mapping.delimiter);
        const auto days = build_pair_days(parsed.samples, roster_rows, label_rows);
        {
            std::ofstream f(out);
            if (!f) throw Error("cannot write " + out);
            write_pair_days(f, days);
        }
        json meta;
        meta["provenance"] = provenance(s);
        meta["samples"] = parsed.samples.size();
        meta["rejected_rows"] = parsed.rejected_rows;
        meta["pair_days"] = days.size();
        meta["warnings"] = parsed.warnings;
        auto& diag = meta["diagnostics"] = json::array();
        for (std::size_t i = 0; i < parsed.diagnostics.size() && i < 100; ++i) {
            diag.push_back({{"line", parsed.diagnostics[i].line}, {"reason", parsed.diagnostics[i].reason}});
        }
        write_json(out + ".meta.json", meta);
        for (const auto& w : parsed.warnings) std::cerr << "warning: " << w << '\n';
        std::cout << "pair-days: " << days.size() << "  samples: " << parsed.samples.size()
                  << "  rejected rows: " << parsed.rejected_rows << '\n';
    }
};

struct SynthCmd {
    std::string out, scenario_file;
    std::uint64_t seed = 7;
    int pairs = -1, days = -1;
    double co_walk_probability = -1, hard_negative_probability = -1, noise = -1, dropout = -1;
    int sample_period = -1;
    bool disjoint_homes = false, no_home_fixes = false;

    void add(CLI::App& app) {
        auto* s = app.add_subcommand("synth", "Generate a labelled synthetic co-walk corpus");
        s->add_option("--out", out, "Output directory")->required();
        s->add_option("--seed", seed)->capture_default_str();
        s->add_option("--scenario", scenario_file, "JSON scenario config (flags override it)");
        s->add_option("--pairs", pairs);
        s->add_option("--days", days);
        s->add_option("--co-walk-probability", co_walk_probability);
        s->add_option("--hard-negative-probability", hard_negative_probability);
        s->add_option("--noise-m", noise);
        s->add_option("--dropout", dropout);
        s->add_option("--sample-period", sample_period);
        s->add_flag("--disjoint-homes", disjoint_homes);
        s->add_flag("--no-home-fixes", no_home_fixes);
        s->callback([this, s] { run(s); });
    }

    void run(const CLI::App* s) {
        ScenarioConfig c;
        if (!scenario_file.empty()) {
            auto f = open_in(scenario_file);
            try {
                c = scenario_config_from_json(json::parse(f));
            } catch (const json::parse_error& e) {
                throw ConfigError(scenario_file + ": " + e.what());
            }
        }
        if (s->count("--seed") || scenario_file.empty()) c.seed = seed;
        if (pairs >= 0) c.num_pairs = pairs;
        if (days >= 0) c.days_per_pair = days;
        if (co_walk_probability >= 0) c.co_walk_probability = co_walk_probability;
        if (hard_negative_probability >= 0) c.hard_negative_probability = hard_negative_probability;
        if (noise >= 0) c.gps_noise_std_m = noise;
        if (dropout >= 0) c.dropout_probability = dropout;
        if (sample_period >= 0) c.sample_period_s = sample_period;
        if (disjoint_homes) c.disjoint_homes = true;
        if (no_home_fixes) c.home_fixes = false;
        c.validate();
        const auto scenario = generate(c);
        write_scenario(out, scenario, c);
        write_json(fs::path(out) / "provenance.json", provenance(s));
        std::size_t positives = 0;
        for (const auto& t : scenario.truth) positives += t.label;
        std::cout << "pair-days: " << scenario.days.size() << "  positive: " << positives << "  -> " << out << '\n';
    }
};

struct RasterizeCmd {
    std::string in, out, pair;
    bool skip_blank = false;
    PipelineOptions p;

    void add(CLI::App& app) {
        auto* s = app.add_subcommand("rasterize", "Render per-layer PNG images and colored-pixel statistics");
        s->add_option("--in", in, "Pair-day NDJSON")->required();
        s->add_option("--out", out, "Output directory")->required();
        s->add_option("--pair", pair, "Only this pair");
        s->add_flag("--skip-blank", skip_blank, "Do not write images without colored pixels");
        p.add(s, false);
        s->callback([this, s] { run(s); });
    }

    void run(const CLI::App* s) {
        const auto spec = p.layer_spec();
        const auto canvas = p.canvas_spec();
        auto days = read_days(in);
        if (!pair.empty()) {
            std::erase_if(days, [&](const PairDay& d) { return d.pair_id != pair; });
            if (days.empty()) throw DataError("no days for pair " + pair);
        }
        fs::create_directories(out);
        std::ofstream index(fs::path(out) / "layers.ndjson");
        std::vector<double> counts_all, counts_colored;
        std::size_t written = 0;
        for (const auto& day : days) {
            const std::string date = format_date(day.local_date);
            for (const auto& lp : render_pair_day(day, spec, canvas, p.render())) {
                for (const LayerImage* img : {&lp.a, &lp.b}) {
                    const auto count = static_cast<double>(img->colored_pixel_count);
                    counts_all.push_back(count);
                    if (count > 0) counts_colored.push_back(count);
                    json rec{{"pair_id", day.pair_id},
                             {"local_date", date},
                             {"device_id", img->device_id},
                             {"layer", img->layer_index},
                             {"layers", spec.num_layers},
                             {"window", {format_time_of_day(img->window.t0_ms), format_time_of_day(img->window.t1_ms)}},
                             {"colored_pixel_count", img->colored_pixel_count}};
                    if (!img->extent.empty) {
                        rec["extent"] = {{"lat_min", img->extent.lat_min}, {"lat_max", img->extent.lat_max},
                                         {"lon_min", img->extent.lon_min}, {"lon_max", img->extent.lon_max}};
                    } else {
                        rec["extent"] = nullptr;
                    }
                    if (!(skip_blank && count == 0)) {
                        const fs::path rel = fs::path(day.pair_id) / date /
                                             (img->device_id + "_" + std::to_string(spec.num_layers) + "layers_" +
                                              std::to_string(img->layer_index) + ".png");
                        fs::create_directories((fs::path(out) / rel).parent_path());
                        write_png(fs::path(out) / rel, img->pixels);
                        rec["path"] = rel.generic_string();
                        ++written;
                    } else {
                        rec["path"] = nullptr;
                    }
                    index << rec.dump() << '\n';
                }
            }
        }
        json stats;
        stats["provenance"] = provenance(s);
        stats["images"] = counts_all.size();
        stats["colored_images"] = counts_colored.size();
        if (!counts_colored.empty()) {
            const auto st = compute_stats(counts_colored);
            stats["colored_stats"] = to_json(st);
            stats["default_percentile"] = default_filter_percentile(spec.num_layers);
            stats["default_threshold"] = threshold_from_stats(st, default_filter_percentile(spec.num_layers));
        }
        if (!counts_all.empty()) stats["all_stats"] = to_json(compute_stats(counts_all));
        write_json(fs::path(out) / "stats.json", stats);
        std::cout << "images: " << counts_all.size() << "  written: " << written << "  -> " << out << '\n';
    }
};

struct TrainOptions {
    int epochs = 50;
    double lr = 1e-3;
    double momentum = 0.9;
    int batch = 16;
    std::uint64_t seed = 7;
    int input_size = 128;
    int embedding_dim = 128;
    std::size_t max_pairs_per_epoch = 0;
    double calibration_fraction = 0.15;
    double alpha = 1.0, beta = 1.0, margin = 1.0;

    void add(CLI::App* s) {
        s->add_option("--epochs", epochs)->capture_default_str();
        s->add_option("--lr", lr)->capture_default_str();
        s->add_option("--momentum", momentum)->capture_default_str();
        s->add_option("--batch", batch)->capture_default_str();
        s->add_option("--seed", seed)->capture_default_str();
        s->add_option("--input-size", input_size, "Network input width and height")->capture_default_str();
        s->add_option("--embedding-dim", embedding_dim)->capture_default_str();
        s->add_option("--max-pairs-per-epoch", max_pairs_per_epoch, "Class-balanced cap per epoch (0 = all)")
            ->capture_default_str();
        s->add_option("--calibration-fraction", calibration_fraction, "Share of training days used for the threshold")
            ->capture_default_str();
        s->add_option("--alpha", alpha)->capture_default_str();
        s->add_option("--beta", beta)->capture_default_str();
        s->add_option("--loss-margin", margin, "Contrastive margin")->capture_default_str();
    }

    CrossValidationConfig cv_config(int folds) const {
        CrossValidationConfig cv;
        cv.folds = folds;
        cv.seed = seed;
        cv.calibration_fraction = calibration_fraction;
        cv.architecture.input_size = input_size;
        cv.architecture.embedding_dim = embedding_dim;
        try {
            cv.architecture.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        cv.contrastive = {alpha, beta, margin};
        cv.contrastive.validate();
        cv.optimizer.learning_rate = lr;
        cv.optimizer.momentum = momentum;
        cv.optimizer.batch_size = batch;
        cv.optimizer.epochs = epochs;
        cv.optimizer.seed = seed;
        cv.optimizer.max_pairs_per_epoch = max_pairs_per_epoch;
        cv.optimizer.validate();
        if (calibration_fraction < 0 || calibration_fraction >= 1) {
            throw ConfigError("--calibration-fraction must lie in [0, 1)");
        }
        cv.workers = g_workers;
        return cv;
    }
};

struct TrainCmd {
    std::string in, out, report;
    int cv_folds = 0;
    PipelineOptions p;
    TrainOptions t;

    void add(CLI::App& app) {
        auto* s = app.add_subcommand("train", "Train the Siamese embedder and calibrate its threshold");
        s->add_option("--in", in, "Labelled pair-day NDJSON")->required();
        s->add_option("--out", out, "Output model JSON")->required();
        s->add_option("--report", report, "Training report JSON");
        s->add_option("--cv", cv_folds, "Also run k-fold cross-validation (0 = off)")->capture_default_str();
        p.add(s);
        t.add(s);
        s->callback([this, s] { run(s); });
    }

    void run(const CLI::App* s) {
        if (cv_folds == 1 || cv_folds < 0) throw ConfigError("--cv must be 0 or at least 2");
        p.check();
        const auto cv = t.cv_config(cv_folds >= 2 ? cv_folds : 5);
        auto days = read_days(in);
        std::erase_if(days, [](const PairDay& d) { return !d.label; });
        if (days.empty()) throw DataError("no labelled days in " + in);
        const auto pc = p.resolve(days);
        const ModelContext ctx{pc.variant, pc.layers.num_layers, pc.canvas, pc.filter_threshold, pc.crop_pad};
        const auto prepared = prepare_days(days, pc, t.input_size, g_workers);

        json rep;
        rep["provenance"] = provenance(s);
        if (cv_folds >= 2) {
            const auto r = cross_validate(prepared, cv, ctx);
            rep["cross_validation"] = to_json(r);
            std::cout << "cv f1 " << r.metrics.f1 << "  mcc " << r.metrics.mcc << "  weighted f1 " << r.weighted.f1
                      << '\n';
        }

        std::vector<bool> labels;
        std::vector<std::size_t> all;
        for (std::size_t i = 0; i < prepared.size(); ++i) {
            labels.push_back(*prepared[i].label);
            all.push_back(i);
        }
        auto [fit_idx, cal_idx] = stratified_holdout(all, labels, t.calibration_fraction, derive_seed(t.seed, 999));
        if (cal_idx.empty()) cal_idx = fit_idx;
        std::vector<const PreparedDay*> fit, cal;
        for (std::size_t i : fit_idx) fit.push_back(&prepared[i]);
        for (std::size_t i : cal_idx) cal.push_back(&prepared[i]);
        const auto pairs = training_pairs_from(fit);
        TrainingReport tr;
        SiameseModel model = train_siamese(cv.architecture, pairs, cv.contrastive, cv.optimizer, &tr);
        model.context = ctx;
        const double threshold = calibrate_threshold(model, cal);
        save_model(out, model);

        rep["training"] = {{"pairs", pairs.size()},
                           {"training_days", fit.size()},
                           {"calibration_days", cal.size()},
                           {"threshold", threshold},
                           {"epoch_losses", tr.epoch_losses},
                           {"filter_threshold", pc.filter_threshold ? json(*pc.filter_threshold) : json(nullptr)}};
        if (!report.empty()) write_json(report, rep);
        std::cout << "model -> " << out << "  pairs " << pairs.size() << "  threshold " << threshold << '\n';
    }
};

struct ClassifyCmd {
    std::string in, model_path, out, report;
    bool exhaustive = false;

    void add(CLI::App& app) {
        auto* s = app.add_subcommand("classify", "Decide co-walking per pair-day with a trained model");
        s->add_option("--in", in, "Pair-day NDJSON")->required();
        s->add_option("--model", model_path, "Model JSON")->required();
        s->add_option("--out", out, "Verdict NDJSON")->required();
        s->add_option("--report", report, "Summary report JSON");
        s->add_flag("--exhaustive", exhaustive, "Score every layer instead of stopping at the first match");
        s->callback([this, s] { run(s); });
    }

    void run(const CLI::App* s) {
        const auto model = load_model(model_path);
        const auto days = read_days(in);
        const auto pc = config_from_model(model);
        pc.validate();
        StageCounters counters;
        const auto t0 = std::chrono::steady_clock::now();
        const auto verdicts = classify_days(days, pc, model, g_workers, &counters);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        {
            std::ofstream f(out);
            if (!f) throw Error("cannot write " + out);
            for (std::size_t i = 0; i < days.size(); ++i) {
                json j = to_json(verdicts[i]);
                if (exhaustive) {
                    j["layers"] = json::array();
                    for (const auto& sc : score_all_layers(days[i], pc, model)) {
                        j["layers"].push_back({{"layer", sc.layer_index},
                                               {"status", status_name(sc.status)},
                                               {"distance", sc.distance ? json(*sc.distance) : json(nullptr)}});
                    }
                }
                f << j.dump() << '\n';
            }
        }
        json rep;
        rep["provenance"] = provenance(s);
        rep["days"] = days.size();
        ConfusionCounts c;
        for (std::size_t i = 0; i < days.size(); ++i) {
            if (days[i].label) c.add(verdicts[i].decision, *days[i].label);
        }
        if (c.total() > 0) {
            rep["counts"] = to_json(c);
            rep["metrics"] = to_json(compute_metrics(c));
            rep["weighted"] = to_json(weighted_metrics(c));
        }
        rep["stage_counters"] = {{"images_rendered", counters.images_rendered},
                                 {"filter_checks", counters.filter_checks},
                                 {"localizations", counters.localizations},
                                 {"crops", counters.crops},
                                 {"overlap_checks", counters.overlap_checks},
                                 {"network_invocations", counters.network_invocations}};
        rep["timing"] = {{"total_seconds", secs}, {"seconds_per_day", days.empty() ? 0.0 : secs / days.size()}};
        if (!report.empty()) write_json(report, rep);
        std::size_t positive = 0;
        for (const auto& v : verdicts) positive += v.decision;
        std::cout << "days: " << days.size() << "  positive: " << positive << "  -> " << out << '\n';
    }
};

struct GruCmd {
    std::string in, out, model_out;
    std::uint64_t seed = 7;
    int folds = 5;
    GruConfig g;

    void add(CLI::App& app) {
        auto* s = app.add_subcommand("baseline-gru", "Cross-validate the recurrent baseline on raw coordinates");
        s->add_option("--in", in, "Labelled pair-day NDJSON")->required();
        s->add_option("--out", out, "Report JSON");
        s->add_option("--model-out", model_out, "Also train on all days and save the model");
        s->add_option("--seed", seed)->capture_default_str();
        s->add_option("--folds", folds)->capture_default_str();
        s->add_option("--hidden", g.hidden_size)->capture_default_str();
        s->add_option("--gru-layers", g.num_layers)->capture_default_str();
        s->add_option("--dropout", g.dropout)->capture_default_str();
        s->add_option("--max-length", g.max_length)->capture_default_str();
        s->add_option("--epochs", g.max_epochs)->capture_default_str();
        s->add_option("--patience", g.patience)->capture_default_str();
        s->add_option("--lr", g.learning_rate)->capture_default_str();
        s->add_option("--batch", g.batch_size)->capture_default_str();
        s->callback([this, s] { run(s); });
    }

    void run(const CLI::App* s) {
        g.seed = seed;
        g.validate();
        auto days = read_days(in);
        std::erase_if(days, [](const PairDay& d) { return !d.label; });
        if (days.empty()) throw DataError("no labelled days in " + in);
        const auto r = cross_validate_gru(days, g, folds, seed);
        json rep;
        rep["provenance"] = provenance(s);
        rep["gru"] = to_json(g);
        rep["cross_validation"] = to_json(r);
        if (!model_out.empty()) {
            std::vector<SequenceInstance> seqs;
            for (const auto& d : days) seqs.push_back(make_sequence(d, g.max_length));
            save_gru_model(model_out, train_gru(seqs, g));
        }
        if (!out.empty()) write_json(out, rep);
        std::cout << "gru f1 " << r.metrics.f1 << "  mcc " << r.metrics.mcc << "  weighted f1 " << r.weighted.f1
                  << '\n';
    }
};

struct AblationCmd {
    std::string in, out, table, models_dir;
    std::string layer_counts = "1,5,24,48";
    std::vector<std::string> variants;
    bool train_missing = false;
    int folds = 5;
    int canvas = 256, margin = 8;
    double filter_percentile = -1;
    TrainOptions t;

    void add(CLI::App& app) {
        auto* s = app.add_subcommand("ablation", "Metrics and timing for every (variant, layer count)");
        s->add_option("--in", in, "Labelled pair-day NDJSON")->required();
        s->add_option("--out", out, "Report JSON")->required();
        s->add_option("--table", table, "Also write the text table here");
        s->add_option("--layer-counts", layer_counts, "Comma-separated layer counts")->capture_default_str();
        s->add_option("--variants", variants, "Subset of variants (default all)")->delimiter(',');
        s->add_option("--models", models_dir, "Directory of <variant>_<layers>.json models");
        s->add_flag("--train-missing", train_missing, "Cross-validate rows that have no model");
        s->add_option("--folds", folds)->capture_default_str();
        s->add_option("--canvas", canvas)->capture_default_str();
        s->add_option("--margin", margin)->capture_default_str();
        s->add_option("--filter-percentile", filter_percentile);
        t.add(s);
        s->callback([this, s] { run(s); });
    }

    void run(const CLI::App* s) {
        AblationConfig ac;
        ac.layer_counts = parse_int_list(layer_counts);
        for (int l : ac.layer_counts) {
            if (l <= 0) throw ConfigError("layer counts must be positive");
        }
        if (!variants.empty()) {
            ac.variants.clear();
            for (const auto& v : variants) ac.variants.push_back(parse_variant(v));
        }
        ac.canvas = CanvasSpec{canvas, canvas, margin};
        ac.canvas.validate();
        if (filter_percentile >= 0) ac.filter_percentile = filter_percentile;
        ac.train_missing = train_missing;
        ac.cv = t.cv_config(folds);
        ac.workers = g_workers;
        auto days = read_days(in);
        std::erase_if(days, [](const PairDay& d) { return !d.label; });
        if (days.empty()) throw DataError("no labelled days in " + in);
        ModelLookup lookup = [this](PipelineVariant v, int layers) -> std::optional<SiameseModel> {
            if (models_dir.empty()) return std::nullopt;
            const fs::path path = fs::path(models_dir) / (std::string(variant_name(v)) + "_" + std::to_string(layers) + ".json");
            if (!fs::exists(path)) return std::nullopt;
            return load_model(path);
        };
        const auto rows = run_ablation(days, ac, lookup);
        json rep;
        rep["provenance"] = provenance(s);
        rep["averaging"] = "weighted = support-weighted over both classes; cross-validated rows average folds";
        rep["rows"] = json::array();
        for (const auto& r : rows) rep["rows"].push_back(to_json(r));
        write_json(out, rep);
        const std::string text = format_ablation_table(rows);
        if (!table.empty()) {
            std::ofstream f(table);
            f << text;
        }
        std::cout << text;
    }
};

struct RoutineCmd {
    std::string in, pair, model_path, out, png_dir, svg;
    int layers = 5;
    double eps = 1e-4;
    int min_pts = 5;
    double min_pixels = 50;
    double percentile = -1;
    double max_gap_minutes = 5;
    int canvas = 256, margin = 8;

    void add(CLI::App& app) {
        auto* s = app.add_subcommand("routine", "Rank multi-day routine layers of one pair by embedding distance");
        s->add_option("--in", in, "Pair-day NDJSON")->required();
        s->add_option("--pair", pair, "Pair id")->required();
        s->add_option("--model", model_path, "Model JSON")->required();
        s->add_option("--out", out, "Report JSON")->required();
        s->add_option("--layers", layers)->capture_default_str();
        s->add_option("--eps", eps, "DBSCAN radius in degrees")->capture_default_str();
        s->add_option("--min-pts", min_pts)->capture_default_str();
        s->add_option("--min-pixels", min_pixels, "Exclude layers below this many colored pixels")->capture_default_str();
        s->add_option("--percentile", percentile, "Raise the exclusion threshold to this percentile of counts");
        s->add_option("--max-gap-minutes", max_gap_minutes)->capture_default_str();
        s->add_option("--canvas", canvas)->capture_default_str();
        s->add_option("--margin", margin)->capture_default_str();
        s->add_option("--png-dir", png_dir, "Write the multi-day layer images here");
        s->add_option("--svg", svg, "Write a bar chart of per-layer distances");
        s->callback([this, s] { run(s); });
    }

    void run(const CLI::App* s) {
        LayerSpec spec;
        spec.num_layers = layers;
        spec.validate();
        const CanvasSpec cs{canvas, canvas, margin};
        cs.validate();
        if (!(eps > 0) || min_pts < 1) throw ConfigError("--eps must be positive and --min-pts at least 1");
        const auto model = load_model(model_path);
        const auto days = read_days(in);
        std::vector<DayTrace> a, b;
        for (const auto& d : days) {
            if (d.pair_id != pair) continue;
            a.push_back(d.trace_a);
            b.push_back(d.trace_b);
        }
        if (a.empty()) throw DataError("no days for pair " + pair);
        const auto fa = routine_filter(a, eps, min_pts);
        const auto fb = routine_filter(b, eps, min_pts);
        RenderOptions ro;
        if (max_gap_minutes > 0) ro.max_gap_ms = static_cast<std::int64_t>(max_gap_minutes * 60'000.0);
        const auto imgs = render_routine_layers(fa.days, fb.days, spec, cs, ro, pair);
        RankOptions opts;
        opts.min_pixels = min_pixels;
        if (percentile >= 0) opts.percentile = percentile;
        const auto report = rank_layers(imgs, model, opts);
        json j = to_json(report);
        j["provenance"] = provenance(s);
        j["filter"] = {{"a", {{"retained", fa.retained}, {"removed", fa.removed}, {"clusters", fa.clusters}}},
                       {"b", {{"retained", fb.retained}, {"removed", fb.removed}, {"clusters", fb.clusters}}}};
        for (const auto* f : {&fa, &fb}) {
            if (!f->diagnostic.empty()) std::cerr << "warning: " << f->diagnostic << '\n';
        }
        write_json(out, j);
        if (!png_dir.empty()) {
            fs::create_directories(png_dir);
            for (const auto& lp : imgs) {
                for (const LayerImage* img : {&lp.a, &lp.b}) {
                    write_png(fs::path(png_dir) / (img->device_id + "_" + std::to_string(layers) + "layers_" +
                                                   std::to_string(img->layer_index) + ".png"),
                              img->pixels);
                }
            }
        }
        if (!svg.empty()) {
            std::ofstream f(svg);
            f << routine_svg(report);
        }
        std::cout << "ranking:";
        for (int l : report.ranking) std::cout << ' ' << l;
        std::cout << '\n';
    }
};

struct GradcheckCmd {
    std::uint64_t seed = 7;
    double step = 1e-5;
    double tolerance = 1e-4;
    std::string out;
    int result = 0;

    void add(CLI::App& app) {
        auto* s = app.add_subcommand("gradcheck", "Compare backpropagation with finite differences on toy models");
        s->add_option("--seed", seed)->capture_default_str();
        s->add_option("--step", step)->capture_default_str();
        s->add_option("--tolerance", tolerance)->capture_default_str();
        s->add_option("--out", out, "Report JSON");
        s->callback([this, s] { run(s); });
    }

    void run(const CLI::App* s) {
        if (!(step > 0)) throw ConfigError("--step must be positive");
        const auto r = run_toy_gradient_checks(seed, step);
        json j = to_json(r);
        j["provenance"] = provenance(s);
        j["tolerance"] = tolerance;
        const bool ok = r.cnn.max_relative_error < tolerance && r.gru.max_relative_error < tolerance;
        j["pass"] = ok;
        if (!out.empty()) write_json(out, j);
        std::cout << "cnn max relative error " << r.cnn.max_relative_error << "\ngru max relative error "
                  << r.gru.max_relative_error << '\n'
                  << (ok ? "PASS" : "FAIL") << '\n';
        result = ok ? 0 : 1;
    }
};

void print_error(const char* kind, const std::string& message) {
    std::string flat = message;
    std::replace(flat.begin(), flat.end(), '\n', ' ');
    std::cerr << json{{"error", kind}, {"message", flat}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trajmatch: co-walking detection from paired location traces"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "TOML or INI file with option defaults (flags take precedence)");
    app.parse_complete_callback([&app] {
        if (const auto* opt = app.get_option_no_throw("--config"); opt && opt->count() > 0) g_config_file = opt->as<std::string>();
    });
    app.add_option("--workers", g_workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);

    IngestCmd ingest;
    SynthCmd synth;
    RasterizeCmd rasterize;
    TrainCmd train;
    ClassifyCmd classify;
    GruCmd gru;
    AblationCmd ablation;
    RoutineCmd routine;
    GradcheckCmd gradcheck;
    ingest.add(app);
    synth.add(app);
    rasterize.add(app);
    train.add(app);
    classify.add(app);
    gru.add(app);
    ablation.add(app);
    routine.add(app);
    gradcheck.add(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return 2;
    } catch (const ConfigError& e) {
        print_error("config", e.what());
        return 2;
    } catch (const DataError& e) {
        print_error("data", e.what());
        return 1;
    } catch (const TrainingError& e) {
        print_error("training", e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("runtime", e.what());
        return 1;
    }
    return gradcheck.result;
}
