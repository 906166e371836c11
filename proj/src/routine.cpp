#include "trajmatch/routine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "trajmatch/error.hpp"
#include "trajmatch/quality.hpp"
#include "trajmatch/timeutil.hpp"

namespace trajmatch {

namespace {

/// Uniform grid with cell size eps; neighbours lie in the 3x3 block.
class NeighbourGrid {
public:
    NeighbourGrid(std::span<const GeoPoint> pts, double eps) : pts_(pts), eps_(eps), eps2_(eps * eps) {
        for (std::size_t i = 0; i < pts.size(); ++i) cells_[key(cell(pts[i].lat), cell(pts[i].lon))].push_back(i);
    }

    void query(std::size_t i, std::vector<std::size_t>& out) const {
        out.clear();
        const std::int64_t cy = cell(pts_[i].lat);
        const std::int64_t cx = cell(pts_[i].lon);
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                const auto it = cells_.find(key(cy + dy, cx + dx));
                if (it == cells_.end()) continue;
                for (std::size_t j : it->second) {
                    const double a = pts_[i].lat - pts_[j].lat;
                    const double b = pts_[i].lon - pts_[j].lon;
                    if (a * a + b * b <= eps2_) out.push_back(j);
                }
            }
        }
    }

private:
    std::int64_t cell(double v) const { return static_cast<std::int64_t>(std::floor(v / eps_)); }
    static std::uint64_t key(std::int64_t y, std::int64_t x) {
        return (static_cast<std::uint64_t>(y) * 0x9E3779B97F4A7C15ULL) ^ static_cast<std::uint64_t>(x);
    }

    std::span<const GeoPoint> pts_;
    double eps_;
    double eps2_;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

constexpr int kUnvisited = -2;

}  // namespace

std::vector<int> dbscan(std::span<const GeoPoint> points, double eps, int min_pts) {
    if (!(eps > 0)) throw ConfigError("dbscan eps must be positive");
    if (min_pts < 1) throw ConfigError("dbscan min_pts must be at least 1");
    const NeighbourGrid grid(points, eps);
    std::vector<int> label(points.size(), kUnvisited);
    std::vector<std::size_t> nb, frontier;
    int next_cluster = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (label[i] != kUnvisited) continue;
        grid.query(i, nb);
        if (nb.size() < static_cast<std::size_t>(min_pts)) {
            label[i] = kNoise;
            continue;
        }
        const int c = next_cluster++;
        label[i] = c;
        frontier.assign(nb.begin(), nb.end());
        while (!frontier.empty()) {
            const std::size_t j = frontier.back();
            frontier.pop_back();
            if (label[j] == kNoise) label[j] = c;  // border point
            if (label[j] != kUnvisited) continue;
            label[j] = c;
            grid.query(j, nb);
            if (nb.size() >= static_cast<std::size_t>(min_pts)) {
                for (std::size_t k : nb) {
                    if (label[k] == kUnvisited || label[k] == kNoise) frontier.push_back(k);
                }
            }
        }
    }
    return label;
}

RoutineFilterResult routine_filter(std::span<const DayTrace> days, double eps, int min_pts) {
    if (days.size() < 2) throw DataError("routine filtering needs at least two days of data");
    std::vector<GeoPoint> pts;
    for (const auto& d : days) {
        for (const auto& s : d.samples) pts.push_back({s.lat, s.lon});
    }
    const auto labels = dbscan(pts, eps, min_pts);
    RoutineFilterResult r;
    std::size_t k = 0;
    int max_label = -1;
    for (const auto& d : days) {
        DayTrace kept{d.device_id, d.local_date, {}};
        for (const auto& s : d.samples) {
            const int l = labels[k++];
            if (l == kNoise) {
                ++r.removed;
            } else {
                ++r.retained;
                max_label = std::max(max_label, l);
                kept.samples.push_back(s);
            }
        }
        r.days.push_back(std::move(kept));
    }
    r.clusters = static_cast<std::size_t>(max_label + 1);
    if (r.retained == 0) r.diagnostic = "every sample was labelled noise; nothing recurs at this eps/min_pts";
    return r;
}

std::vector<LayerPair> render_routine_layers(std::span<const DayTrace> days_a, std::span<const DayTrace> days_b,
                                             const LayerSpec& spec, const CanvasSpec& canvas,
                                             const RenderOptions& options, const std::string& pair_id) {
    spec.validate();
    canvas.validate();
    std::vector<LayerPair> out;
    for (int i = 1; i <= spec.num_layers; ++i) {
        const TimeWindow w = spec.window(i);
        std::vector<std::vector<TimedPoint>> lines_a, lines_b;
        GeoExtent extent;
        auto collect = [&](std::span<const DayTrace> days, std::vector<std::vector<TimedPoint>>& lines) {
            for (const auto& d : days) {
                auto pts = window_points(d, w);
                for (const auto& p : pts) extent.include(p.lat, p.lon);
                if (!pts.empty()) lines.push_back(std::move(pts));
            }
        };
        collect(days_a, lines_a);
        collect(days_b, lines_b);
        auto make = [&](const std::vector<std::vector<TimedPoint>>& lines, std::span<const DayTrace> days) {
            LayerImage img;
            img.pair_id = pair_id;
            img.device_id = days.empty() ? std::string() : days.front().device_id;
            img.local_date = days.empty() ? LocalDate{} : days.front().local_date;
            img.layer_index = i;
            img.window = w;
            img.extent = extent;
            img.pixels = draw_polylines(lines, w, extent, canvas, options, &img.colored_pixel_count);
            return img;
        };
        out.push_back({make(lines_a, days_a), make(lines_b, days_b)});
    }
    return out;
}

RoutineReport rank_layers(std::span<const LayerPair> layers, const SiameseModel& model, const RankOptions& options) {
    RoutineReport r;
    if (!layers.empty()) r.pair_id = layers.front().a.pair_id;
    double threshold = options.min_pixels;
    if (options.percentile && !layers.empty()) {
        threshold = std::max(threshold, threshold_from_stats(compute_stats(layers), *options.percentile));
    }
    r.pixel_threshold = threshold;
    for (const auto& lp : layers) {
        RoutineLayer l;
        l.layer_index = lp.a.layer_index;
        l.window = lp.a.window;
        l.pixels_a = lp.a.colored_pixel_count;
        l.pixels_b = lp.b.colored_pixel_count;
        const auto fewest = std::min(l.pixels_a, l.pixels_b);
        if (static_cast<double>(fewest) < threshold) {
            l.excluded = true;
            char buf[96];
            std::snprintf(buf, sizeof buf, "insufficient data: %zu colored pixels < %.0f", fewest, threshold);
            l.reason = buf;
        } else {
            l.distance = model.distance(lp.a.pixels, lp.b.pixels);
        }
        r.layers.push_back(std::move(l));
    }
    std::vector<const RoutineLayer*> included;
    for (const auto& l : r.layers) {
        if (!l.excluded) included.push_back(&l);
    }
    std::stable_sort(included.begin(), included.end(), [](const RoutineLayer* a, const RoutineLayer* b) {
        if (*a->distance != *b->distance) return *a->distance < *b->distance;
        return a->layer_index < b->layer_index;
    });
    for (const auto* l : included) r.ranking.push_back(l->layer_index);
    return r;
}

nlohmann::json to_json(const RoutineReport& r) {
    nlohmann::json j;
    j["pair_id"] = r.pair_id;
    j["pixel_threshold"] = r.pixel_threshold;
    j["ranking"] = r.ranking;
    j["layers"] = nlohmann::json::array();
    for (const auto& l : r.layers) {
        nlohmann::json e;
        e["layer"] = l.layer_index;
        e["window"] = {{"start", format_time_of_day(l.window.t0_ms)}, {"end", format_time_of_day(l.window.t1_ms)}};
        e["pixels_a"] = l.pixels_a;
        e["pixels_b"] = l.pixels_b;
        e["distance"] = l.distance ? nlohmann::json(*l.distance) : nlohmann::json(nullptr);
        e["excluded"] = l.excluded;
        if (l.excluded) e["reason"] = l.reason;
        j["layers"].push_back(std::move(e));
    }
    return j;
}

std::string routine_svg(const RoutineReport& r) {
    const int bar_w = 48, gap = 16, left = 56, top = 36, plot_h = 220;
    const int n = static_cast<int>(r.layers.size());
    const int width = left + n * (bar_w + gap) + gap;
    const int height = top + plot_h + 56;
    double max_d = 0.0;
    for (const auto& l : r.layers) {
        if (l.distance) max_d = std::max(max_d, *l.distance);
    }
    if (max_d <= 0.0) max_d = 1.0;
    const int best = r.ranking.empty() ? -1 : r.ranking.front();

    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" font-family=\"sans-serif\" "
                  "font-size=\"11\">\n",
                  width, height);
    os << buf;
    os << "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\">"
          "<path d=\"M0,6 L6,0\" stroke=\"#999\"/></pattern></defs>\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"20\" font-size=\"13\">Per-layer distance, pair %s</text>\n", left,
                  r.pair_id.c_str());
    os << buf;
    std::snprintf(buf, sizeof buf, "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", left, top, left,
                  top + plot_h);
    os << buf;
    std::snprintf(buf, sizeof buf, "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", left,
                  top + plot_h, width - gap / 2, top + plot_h);
    os << buf;
    for (int k = 0; k <= 4; ++k) {
        const double v = max_d * k / 4.0;
        const int y = top + plot_h - static_cast<int>(std::lround(plot_h * k / 4.0));
        std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" text-anchor=\"end\">%.3g</text>\n", left - 4, y + 4, v);
        os << buf;
    }
    for (int i = 0; i < n; ++i) {
        const auto& l = r.layers[static_cast<std::size_t>(i)];
        const int x = left + gap + i * (bar_w + gap);
        if (l.excluded) {
            std::snprintf(buf, sizeof buf,
                          "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"8\" fill=\"url(#hatch)\" stroke=\"#999\">"
                          "<title>%s</title></rect>\n",
                          x, top + plot_h - 8, bar_w, l.reason.c_str());
        } else {
            const int h = static_cast<int>(std::lround(plot_h * (*l.distance / max_d)));
            std::snprintf(buf, sizeof buf,
                          "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"%s\"><title>%.6g</title></rect>\n", x,
                          top + plot_h - h, bar_w, h, l.layer_index == best ? "#d62728" : "#1f77b4", *l.distance);
        }
        os << buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\">L%d</text>\n", x + bar_w / 2,
                      top + plot_h + 16, l.layer_index);
        os << buf;
        const std::string win = format_time_of_day(l.window.t0_ms) + "-" + format_time_of_day(l.window.t1_ms);
        std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\" font-size=\"9\">%s</text>\n",
                      x + bar_w / 2, top + plot_h + 30, win.c_str());
        os << buf;
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace trajmatch
