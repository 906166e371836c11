#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trajmatch/image.hpp"
#include "trajmatch/types.hpp"

namespace trajmatch {

/// Half-open interval [t0_ms, t1_ms) of local time of day.
struct TimeWindow {
    std::int64_t t0_ms = 0;
    std::int64_t t1_ms = kMillisPerDay;

    bool contains(std::int64_t t) const { return t >= t0_ms && t < t1_ms; }
    friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

/// Splits [period_start, period_end) into `num_layers` equal windows.
struct LayerSpec {
    int num_layers = 1;
    std::int64_t period_start_ms = 0;
    std::int64_t period_end_ms = kMillisPerDay;

    void validate() const;
    /// Window of 1-based layer `index`. Boundaries use integer division so the
    /// windows tile the period exactly.
    TimeWindow window(int index) const;
    std::vector<TimeWindow> windows() const;
};

struct CanvasSpec {
    int width = 256;
    int height = 256;
    int margin = 8;

    void validate() const;
};

struct GeoExtent {
    double lat_min = 0.0;
    double lat_max = 0.0;
    double lon_min = 0.0;
    double lon_max = 0.0;
    bool empty = true;

    void include(double lat, double lon);
    friend bool operator==(const GeoExtent&, const GeoExtent&) = default;
};

struct PixelPoint {
    int x = 0;
    int y = 0;
    friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

struct LayerImage {
    std::string pair_id;
    std::string device_id;
    LocalDate local_date;
    int layer_index = 1;
    RgbImage pixels;
    std::size_t colored_pixel_count = 0;
    GeoExtent extent;
    TimeWindow window;
};

struct LayerPair {
    LayerImage a;
    LayerImage b;
};

struct RenderOptions {
    /// Consecutive samples further apart than this are not connected.
    std::optional<std::int64_t> max_gap_ms;
};

/// Hue sweep from blue (t=0) through cyan, green and yellow to red (t=1) at
/// full saturation and value. Throws std::invalid_argument outside [0,1].
Rgb colormap(double t_norm);

/// Affine lat/lon -> pixel map onto the margin-inset canvas; north is up. An
/// axis with zero span collapses to the canvas centre line.
PixelPoint project(double lat, double lon, const GeoExtent& extent, const CanvasSpec& canvas);

/// Integer midpoint segment from (x0,y0) to (x1,y1), inclusive of both ends.
/// The major axis is x when |dx| >= |dy|; the minor coordinate at each step is
/// the exact position rounded half up, so the pixel set does not depend on the
/// drawing direction. `plot(x, y, step, steps)` is called in order from the
/// first endpoint.
template <typename Plot>
void rasterize_segment(int x0, int y0, int x1, int y1, Plot&& plot) {
    const int dx = x1 - x0;
    const int dy = y1 - y0;
    const bool x_major = (dx < 0 ? -dx : dx) >= (dy < 0 ? -dy : dy);
    const int major0 = x_major ? x0 : y0;
    const int minor0 = x_major ? y0 : x0;
    const int dmajor = x_major ? dx : dy;
    const int dminor = x_major ? dy : dx;
    const int steps = dmajor < 0 ? -dmajor : dmajor;
    const int dir = dmajor < 0 ? -1 : 1;
    if (steps == 0) {
        plot(x0, y0, 0, 0);
        return;
    }
    // minor(i) = minor0 + floor((2*i*dminor + steps) / (2*steps)), tracked as
    // quotient + remainder in [0, 2*steps).
    const long long denom = 2LL * steps;
    const long long inc = 2LL * dminor;
    long long q = 0;
    long long r = steps;  // numerator at i = 0
    long long inc_q = inc / denom;
    long long inc_r = inc % denom;
    if (inc_r < 0) {
        inc_r += denom;
        --inc_q;
    }
    for (int i = 0; i <= steps; ++i) {
        const int major = major0 + dir * i;
        const int minor = minor0 + static_cast<int>(q);
        if (x_major) {
            plot(major, minor, i, steps);
        } else {
            plot(minor, major, i, steps);
        }
        q += inc_q;
        r += inc_r;
        if (r >= denom) {
            r -= denom;
            ++q;
        }
    }
}

/// A sample reduced to what the renderer needs.
struct TimedPoint {
    double lat = 0.0;
    double lon = 0.0;
    std::int64_t time_ms = 0;  // local time of day
};

/// Draws each polyline in order onto a white canvas. Points outside `window`
/// must already be removed. Segment pixels take the colour of the linearly
/// interpolated time; later segments overwrite earlier ones. `colored`, if
/// given, receives the number of non-background pixels.
RgbImage draw_polylines(std::span<const std::vector<TimedPoint>> polylines, const TimeWindow& window,
                        const GeoExtent& extent, const CanvasSpec& canvas, const RenderOptions& options = {},
                        std::size_t* colored = nullptr);

/// In-window points of a trace, in trace order.
std::vector<TimedPoint> window_points(const DayTrace& trace, const TimeWindow& window);

/// Smallest extent over both traces' in-window samples; `empty` when none.
GeoExtent compute_pair_extent(const PairDay& day, const TimeWindow& window);

LayerImage render_layer(const DayTrace& trace, const TimeWindow& window, const GeoExtent& extent,
                        const CanvasSpec& canvas, const RenderOptions& options = {});

/// One image pair per layer, both drawn on the layer's shared extent.
std::vector<LayerPair> render_pair_day(const PairDay& day, const LayerSpec& spec, const CanvasSpec& canvas,
                                       const RenderOptions& options = {});

/// Index (1-based) of the layer containing local time-of-day `t_ms`, or 0 if
/// outside the period.
int layer_of(const LayerSpec& spec, std::int64_t t_ms);

}  // namespace trajmatch
