#include "trajmatch/raster.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trajmatch/error.hpp"

namespace trajmatch {

void LayerSpec::validate() const {
    if (num_layers <= 0) throw ConfigError("layer count must be positive, got " + std::to_string(num_layers));
    if (period_end_ms <= period_start_ms) throw ConfigError("layer period must be non-empty");
    if (period_start_ms < 0 || period_end_ms > kMillisPerDay) throw ConfigError("layer period must lie within one day");
    if (period_end_ms - period_start_ms < num_layers) throw ConfigError("more layers than milliseconds in the period");
}

TimeWindow LayerSpec::window(int index) const {
    if (index < 1 || index > num_layers) throw std::out_of_range("layer index out of range");
    const std::int64_t span = period_end_ms - period_start_ms;
    return {period_start_ms + span * (index - 1) / num_layers, period_start_ms + span * index / num_layers};
}

std::vector<TimeWindow> LayerSpec::windows() const {
    validate();
    std::vector<TimeWindow> out;
    out.reserve(static_cast<std::size_t>(num_layers));
    for (int i = 1; i <= num_layers; ++i) out.push_back(window(i));
    return out;
}

int layer_of(const LayerSpec& spec, std::int64_t t_ms) {
    if (t_ms < spec.period_start_ms || t_ms >= spec.period_end_ms) return 0;
    const std::int64_t span = spec.period_end_ms - spec.period_start_ms;
    // Largest k with start + span*(k-1)/l <= t.
    std::int64_t k = (t_ms - spec.period_start_ms) * spec.num_layers / span + 1;
    while (k > 1 && spec.window(static_cast<int>(k)).t0_ms > t_ms) --k;
    while (k < spec.num_layers && spec.window(static_cast<int>(k)).t1_ms <= t_ms) ++k;
    return static_cast<int>(k);
}

void CanvasSpec::validate() const {
    if (width <= 2 * margin || height <= 2 * margin || margin < 0) {
        throw ConfigError("canvas must be larger than twice the margin");
    }
}

void GeoExtent::include(double lat, double lon) {
    if (empty) {
        lat_min = lat_max = lat;
        lon_min = lon_max = lon;
        empty = false;
        return;
    }
    lat_min = std::min(lat_min, lat);
    lat_max = std::max(lat_max, lat);
    lon_min = std::min(lon_min, lon);
    lon_max = std::max(lon_max, lon);
}

Rgb colormap(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("colormap parameter outside [0,1]");
    const double hue = 240.0 * (1.0 - t);  // degrees
    const double sector = hue / 60.0;
    const double x = 1.0 - std::fabs(std::fmod(sector, 2.0) - 1.0);
    double r = 0, g = 0, b = 0;
    if (sector < 1.0) {
        r = 1, g = x;
    } else if (sector < 2.0) {
        r = x, g = 1;
    } else if (sector < 3.0) {
        g = 1, b = x;
    } else {
        g = x, b = 1;
    }
    auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(255.0 * v)); };
    return {q(r), q(g), q(b)};
}

PixelPoint project(double lat, double lon, const GeoExtent& extent, const CanvasSpec& canvas) {
    const int inner_w = canvas.width - 1 - 2 * canvas.margin;
    const int inner_h = canvas.height - 1 - 2 * canvas.margin;
    PixelPoint p;
    const double lon_span = extent.lon_max - extent.lon_min;
    const double lat_span = extent.lat_max - extent.lat_min;
    if (extent.empty || lon_span <= 0.0) {
        p.x = (canvas.width - 1) / 2;
    } else {
        p.x = canvas.margin + static_cast<int>(std::floor((lon - extent.lon_min) / lon_span * inner_w + 0.5));
    }
    if (extent.empty || lat_span <= 0.0) {
        p.y = (canvas.height - 1) / 2;
    } else {
        p.y = canvas.margin + static_cast<int>(std::floor((extent.lat_max - lat) / lat_span * inner_h + 0.5));
    }
    p.x = std::clamp(p.x, 0, canvas.width - 1);
    p.y = std::clamp(p.y, 0, canvas.height - 1);
    return p;
}

namespace {

double normalized(std::int64_t t, const TimeWindow& w) {
    const double v = static_cast<double>(t - w.t0_ms) / static_cast<double>(w.t1_ms - w.t0_ms);
    return std::clamp(v, 0.0, 1.0);
}

}  // namespace

RgbImage draw_polylines(std::span<const std::vector<TimedPoint>> polylines, const TimeWindow& window,
                        const GeoExtent& extent, const CanvasSpec& canvas, const RenderOptions& options,
                        std::size_t* colored) {
    RgbImage img(canvas.width, canvas.height);
    std::size_t count = 0;
    // Colormap output is never white, so a pixel is newly colored iff it was background.
    auto paint = [&](int x, int y, Rgb c) {
        count += img.is_background(x, y);
        img.set(x, y, c);
    };
    for (const auto& line : polylines) {
        if (line.empty()) continue;
        if (line.size() == 1) {
            const auto p = project(line[0].lat, line[0].lon, extent, canvas);
            paint(p.x, p.y, colormap(normalized(line[0].time_ms, window)));
            continue;
        }
        for (std::size_t i = 0; i + 1 < line.size(); ++i) {
            const TimedPoint& a = line[i];
            const TimedPoint& b = line[i + 1];
            const auto pa = project(a.lat, a.lon, extent, canvas);
            const auto pb = project(b.lat, b.lon, extent, canvas);
            if (options.max_gap_ms && b.time_ms - a.time_ms > *options.max_gap_ms) {
                paint(pa.x, pa.y, colormap(normalized(a.time_ms, window)));
                paint(pb.x, pb.y, colormap(normalized(b.time_ms, window)));
                continue;
            }
            const double ta = static_cast<double>(a.time_ms);
            const double dt = static_cast<double>(b.time_ms - a.time_ms);
            rasterize_segment(pa.x, pa.y, pb.x, pb.y, [&](int x, int y, int step, int steps) {
                const double t = steps == 0 ? ta + dt : ta + dt * step / steps;
                const double tn = std::clamp((t - window.t0_ms) / static_cast<double>(window.t1_ms - window.t0_ms),
                                             0.0, 1.0);
                paint(x, y, colormap(tn));
            });
        }
    }
    if (colored) *colored = count;
    return img;
}

std::vector<TimedPoint> window_points(const DayTrace& trace, const TimeWindow& window) {
    std::vector<TimedPoint> pts;
    for (const auto& s : trace.samples) {
        const std::int64_t t = s.local_time_of_day_ms();
        if (window.contains(t)) pts.push_back({s.lat, s.lon, t});
    }
    return pts;
}

GeoExtent compute_pair_extent(const PairDay& day, const TimeWindow& window) {
    GeoExtent e;
    for (const DayTrace* t : {&day.trace_a, &day.trace_b}) {
        for (const auto& s : t->samples) {
            if (window.contains(s.local_time_of_day_ms())) e.include(s.lat, s.lon);
        }
    }
    return e;
}

LayerImage render_layer(const DayTrace& trace, const TimeWindow& window, const GeoExtent& extent,
                        const CanvasSpec& canvas, const RenderOptions& options) {
    LayerImage out;
    out.device_id = trace.device_id;
    out.local_date = trace.local_date;
    out.window = window;
    out.extent = extent;
    std::vector<std::vector<TimedPoint>> lines{window_points(trace, window)};
    if (!lines[0].empty() && extent.empty) throw Error("render_layer: samples present but extent is empty");
    out.pixels = draw_polylines(lines, window, extent, canvas, options, &out.colored_pixel_count);
    return out;
}

std::vector<LayerPair> render_pair_day(const PairDay& day, const LayerSpec& spec, const CanvasSpec& canvas,
                                       const RenderOptions& options) {
    spec.validate();
    canvas.validate();
    const auto n = static_cast<std::size_t>(spec.num_layers);
    // One pass per trace assigns every sample to its layer.
    auto bucket = [&](const DayTrace& t) {
        std::vector<std::vector<TimedPoint>> b(n);
        for (const auto& s : t.samples) {
            const std::int64_t tod = s.local_time_of_day_ms();
            if (const int k = layer_of(spec, tod); k > 0) b[static_cast<std::size_t>(k - 1)].push_back({s.lat, s.lon, tod});
        }
        return b;
    };
    const auto pts_a = bucket(day.trace_a);
    const auto pts_b = bucket(day.trace_b);
    std::vector<LayerPair> out;
    out.reserve(n);
    for (int k = 1; k <= spec.num_layers; ++k) {
        const auto i = static_cast<std::size_t>(k - 1);
        const TimeWindow w = spec.window(k);
        GeoExtent extent;
        for (const auto* pts : {&pts_a[i], &pts_b[i]}) {
            for (const auto& p : *pts) extent.include(p.lat, p.lon);
        }
        auto make = [&](const DayTrace& t, const std::vector<TimedPoint>& pts) {
            LayerImage img;
            img.pair_id = day.pair_id;
            img.device_id = t.device_id;
            img.local_date = t.local_date;
            img.layer_index = k;
            img.window = w;
            img.extent = extent;
            img.pixels = draw_polylines(std::span(&pts, 1), w, extent, canvas, options, &img.colored_pixel_count);
            return img;
        };
        out.push_back({make(day.trace_a, pts_a[i]), make(day.trace_b, pts_b[i])});
    }
    return out;
}

}  // namespace trajmatch
