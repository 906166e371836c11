#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trajmatch/localize.hpp"
#include "trajmatch/raster.hpp"

namespace trajmatch {

/// Ablation variants. Stage wiring:
///   Baseline       render -> network
///   Overlap        render -> localize -> overlap check -> network
///   OverlapCrop    render -> localize -> crop -> overlap check -> network (cropped)
///   OverlapFilter  render -> filter -> localize -> overlap check -> network
///   EntireMethod   render -> filter -> localize -> crop -> overlap check -> network (cropped)
enum class PipelineVariant { Baseline, Overlap, OverlapCrop, OverlapFilter, EntireMethod };

inline constexpr PipelineVariant kAllVariants[] = {PipelineVariant::Baseline, PipelineVariant::Overlap,
                                                   PipelineVariant::OverlapCrop, PipelineVariant::OverlapFilter,
                                                   PipelineVariant::EntireMethod};

struct VariantStages {
    bool filter = false;
    bool overlap = false;  // localize + overlap check
    bool crop = false;
};

VariantStages stages_of(PipelineVariant v);
std::string_view variant_name(PipelineVariant v);
/// Accepts the names printed by variant_name ("baseline", "overlap",
/// "overlap-crop", "overlap-filter", "entire"); throws ConfigError otherwise.
PipelineVariant parse_variant(std::string_view name);

struct PipelineConfig {
    PipelineVariant variant = PipelineVariant::EntireMethod;
    LayerSpec layers;
    CanvasSpec canvas;
    RenderOptions render;
    /// Minimum colored-pixel count per member; required by filtering variants.
    std::optional<double> filter_threshold;
    int crop_pad = 2;

    void validate() const;
};

/// Per-call stage invocation counts.
struct StageCounters {
    std::size_t images_rendered = 0;
    std::size_t filter_checks = 0;
    std::size_t localizations = 0;
    std::size_t crops = 0;
    std::size_t overlap_checks = 0;
    std::size_t network_invocations = 0;

    StageCounters& operator+=(const StageCounters& o);
};

/// True iff the boxes share strictly positive area; touching edges or corners
/// do not count. Throws Error if either box is empty.
bool boxes_overlap(const BoundingBox& a, const BoundingBox& b);

enum class LayerStatus {
    Filtered,   // removed by the pixel-count filter
    Empty,      // a member has no colored pixels, so no box exists
    NoOverlap,  // boxes disjoint: negative without the network
    Candidate,  // goes to the network
};

std::string_view status_name(LayerStatus s);

/// A layer after the geometric stages, with network inputs for candidates.
struct LayerAssessment {
    int layer_index = 0;
    LayerStatus status = LayerStatus::Candidate;
    std::size_t pixels_a = 0;
    std::size_t pixels_b = 0;
    BoundingBox box_a;
    BoundingBox box_b;
    RgbImage input_a;  // cropped or full image; set for candidates only
    RgbImage input_b;
};

/// Renders every layer and applies the variant's filter/localize/crop/overlap
/// stages, in layer order.
std::vector<LayerAssessment> assess_layers(const PairDay& day, const PipelineConfig& config,
                                           StageCounters* counters = nullptr);

/// Same, starting from already rendered layers.
std::vector<LayerAssessment> assess_rendered(const std::vector<LayerPair>& layers, const PipelineConfig& config,
                                             StageCounters* counters = nullptr);

}  // namespace trajmatch
