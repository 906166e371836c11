#include "trajmatch/stages.hpp"

#include <algorithm>

#include "trajmatch/error.hpp"
#include "trajmatch/quality.hpp"

namespace trajmatch {

VariantStages stages_of(PipelineVariant v) {
    switch (v) {
        case PipelineVariant::Baseline: return {false, false, false};
        case PipelineVariant::Overlap: return {false, true, false};
        case PipelineVariant::OverlapCrop: return {false, true, true};
        case PipelineVariant::OverlapFilter: return {true, true, false};
        case PipelineVariant::EntireMethod: return {true, true, true};
    }
    return {};
}

std::string_view variant_name(PipelineVariant v) {
    switch (v) {
        case PipelineVariant::Baseline: return "baseline";
        case PipelineVariant::Overlap: return "overlap";
        case PipelineVariant::OverlapCrop: return "overlap-crop";
        case PipelineVariant::OverlapFilter: return "overlap-filter";
        case PipelineVariant::EntireMethod: return "entire";
    }
    return "?";
}

PipelineVariant parse_variant(std::string_view name) {
    for (PipelineVariant v : kAllVariants) {
        if (variant_name(v) == name) return v;
    }
    if (name == "entire-method") return PipelineVariant::EntireMethod;
    throw ConfigError("unknown variant '" + std::string(name) +
                      "' (expected baseline, overlap, overlap-crop, overlap-filter or entire)");
}

void PipelineConfig::validate() const {
    layers.validate();
    canvas.validate();
    if (crop_pad < 0) throw ConfigError("crop padding must be non-negative");
    if (stages_of(variant).filter && !filter_threshold) {
        throw ConfigError("variant '" + std::string(variant_name(variant)) +
                          "' needs a filter threshold (from corpus statistics)");
    }
    if (filter_threshold && *filter_threshold < 0) throw ConfigError("filter threshold must be non-negative");
}

StageCounters& StageCounters::operator+=(const StageCounters& o) {
    images_rendered += o.images_rendered;
    filter_checks += o.filter_checks;
    localizations += o.localizations;
    crops += o.crops;
    overlap_checks += o.overlap_checks;
    network_invocations += o.network_invocations;
    return *this;
}

bool boxes_overlap(const BoundingBox& a, const BoundingBox& b) {
    if (a.empty || b.empty) throw Error("boxes_overlap: empty bounding box");
    // Inclusive pixel boxes cover [x0, x1+1) x [y0, y1+1) in continuous space;
    // the overlap test is on the pixel-centre geometry [x0, x1] x [y0, y1].
    const int w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const int h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    return w > 0 && h > 0;
}

std::string_view status_name(LayerStatus s) {
    switch (s) {
        case LayerStatus::Filtered: return "filtered";
        case LayerStatus::Empty: return "empty";
        case LayerStatus::NoOverlap: return "no-overlap";
        case LayerStatus::Candidate: return "candidate";
    }
    return "?";
}

std::vector<LayerAssessment> assess_rendered(const std::vector<LayerPair>& layers, const PipelineConfig& config,
                                             StageCounters* counters) {
    config.validate();
    StageCounters local;
    StageCounters& cnt = counters ? *counters : local;
    const VariantStages st = stages_of(config.variant);

    std::vector<LayerAssessment> out;
    out.reserve(layers.size());
    for (const LayerPair& lp : layers) {
        LayerAssessment a;
        a.layer_index = lp.a.layer_index;
        a.pixels_a = lp.a.colored_pixel_count;
        a.pixels_b = lp.b.colored_pixel_count;

        if (st.filter) {
            ++cnt.filter_checks;
            if (!passes_filter(lp, *config.filter_threshold)) {
                a.status = LayerStatus::Filtered;
                out.push_back(std::move(a));
                continue;
            }
        }

        if (!st.overlap) {
            a.status = LayerStatus::Candidate;
            a.input_a = lp.a.pixels;
            a.input_b = lp.b.pixels;
            out.push_back(std::move(a));
            continue;
        }

        cnt.localizations += 2;
        a.box_a = locate(lp.a);
        a.box_b = locate(lp.b);
        if (a.box_a.empty || a.box_b.empty) {
            a.status = LayerStatus::Empty;
            out.push_back(std::move(a));
            continue;
        }
        if (st.crop) {
            cnt.crops += 2;
            a.input_a = crop(lp.a, a.box_a, config.crop_pad).pixels;
            a.input_b = crop(lp.b, a.box_b, config.crop_pad).pixels;
        }
        ++cnt.overlap_checks;
        if (!boxes_overlap(a.box_a, a.box_b)) {
            a.status = LayerStatus::NoOverlap;
            a.input_a = RgbImage();
            a.input_b = RgbImage();
            out.push_back(std::move(a));
            continue;
        }
        a.status = LayerStatus::Candidate;
        if (!st.crop) {
            a.input_a = lp.a.pixels;
            a.input_b = lp.b.pixels;
        }
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<LayerAssessment> assess_layers(const PairDay& day, const PipelineConfig& config,
                                           StageCounters* counters) {
    config.validate();
    auto layers = render_pair_day(day, config.layers, config.canvas, config.render);
    if (counters) counters->images_rendered += layers.size() * 2;
    return assess_rendered(layers, config, counters);
}

}  // namespace trajmatch
