#pragma once

// Reference implementations used by the unit and acceptance tests. They follow
// the documented contracts directly, trading speed for obviousness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "trajmatch/eval.hpp"
#include "trajmatch/raster.hpp"
#include "trajmatch/routine.hpp"

namespace oracle {

inline long long floor_div(long long a, long long b) {
    long long q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

/// Pixels of the segment: along the major axis every integer, on the minor axis
/// the exact position rounded half up.
inline std::set<std::pair<int, int>> segment_pixels(int x0, int y0, int x1, int y1) {
    std::set<std::pair<int, int>> out;
    const int dx = x1 - x0, dy = y1 - y0;
    const bool x_major = std::abs(dx) >= std::abs(dy);
    const int n = x_major ? std::abs(dx) : std::abs(dy);
    if (n == 0) {
        out.insert({x0, y0});
        return out;
    }
    for (int i = 0; i <= n; ++i) {
        if (x_major) {
            const int x = x0 + (dx > 0 ? i : -i);
            const int y = y0 + static_cast<int>(floor_div(2LL * i * dy + n, 2LL * n));
            out.insert({x, y});
        } else {
            const int y = y0 + (dy > 0 ? i : -i);
            const int x = x0 + static_cast<int>(floor_div(2LL * i * dx + n, 2LL * n));
            out.insert({x, y});
        }
    }
    return out;
}

/// Affine map onto the inner canvas, north up, rounded half up.
inline std::pair<int, int> to_pixel(double lat, double lon, const trajmatch::GeoExtent& e,
                                    const trajmatch::CanvasSpec& c) {
    const double iw = c.width - 1 - 2 * c.margin;
    const double ih = c.height - 1 - 2 * c.margin;
    int x = (c.width - 1) / 2;
    int y = (c.height - 1) / 2;
    if (e.lon_max > e.lon_min) x = c.margin + static_cast<int>(std::floor((lon - e.lon_min) / (e.lon_max - e.lon_min) * iw + 0.5));
    if (e.lat_max > e.lat_min) y = c.margin + static_cast<int>(std::floor((e.lat_max - lat) / (e.lat_max - e.lat_min) * ih + 0.5));
    return {std::clamp(x, 0, c.width - 1), std::clamp(y, 0, c.height - 1)};
}

/// Colored pixels of one trace in one window: the union of the segment pixel
/// sets between consecutive in-window samples (or the lone sample's pixel).
inline std::size_t colored_count(const trajmatch::DayTrace& trace, const trajmatch::TimeWindow& w,
                                 const trajmatch::GeoExtent& e, const trajmatch::CanvasSpec& c,
                                 std::optional<std::int64_t> max_gap_ms = std::nullopt) {
    std::vector<std::pair<std::pair<int, int>, std::int64_t>> pts;
    for (const auto& s : trace.samples) {
        const std::int64_t t = s.local_time_of_day_ms();
        if (t >= w.t0_ms && t < w.t1_ms) pts.push_back({to_pixel(s.lat, s.lon, e, c), t});
    }
    std::set<std::pair<int, int>> all;
    if (pts.size() == 1) all.insert(pts[0].first);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const auto [a, ta] = pts[i];
        const auto [b, tb] = pts[i + 1];
        if (max_gap_ms && tb - ta > *max_gap_ms) {
            all.insert(a);
            all.insert(b);
            continue;
        }
        for (const auto& p : segment_pixels(a.first, a.second, b.first, b.second)) all.insert(p);
    }
    return all.size();
}

/// Brute-force density clustering. Core points are those with at least
/// min_pts neighbours (self included) within eps. Clusters are the connected
/// components of the core graph, numbered by their smallest member index.
/// A border point joins the lowest-numbered cluster among its core neighbours.
inline std::vector<int> dbscan(const std::vector<trajmatch::GeoPoint>& p, double eps, int min_pts) {
    const std::size_t n = p.size();
    auto near = [&](std::size_t i, std::size_t j) {
        const double dl = p[i].lat - p[j].lat, dn = p[i].lon - p[j].lon;
        return dl * dl + dn * dn <= eps * eps;
    };
    std::vector<bool> core(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        int cnt = 0;
        for (std::size_t j = 0; j < n; ++j) cnt += near(i, j);
        core[i] = cnt >= min_pts;
    }
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (core[i] && core[j] && near(i, j)) parent[find(i)] = find(j);
        }
    }
    std::vector<int> root_label(n, -1);
    std::vector<int> label(n, trajmatch::kNoise);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i]) continue;
        const std::size_t r = find(i);
        if (root_label[r] < 0) root_label[r] = next++;
        label[i] = root_label[r];
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        int best = trajmatch::kNoise;
        for (std::size_t j = 0; j < n; ++j) {
            if (core[j] && near(i, j) && (best == trajmatch::kNoise || label[j] < best)) best = label[j];
        }
        label[i] = best;
    }
    return label;
}

/// Exact fraction num/den (den > 0) evaluated once in long double.
inline double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

struct ExactMetrics {
    double precision, recall, accuracy, f1, mcc;
};

/// Rational forms: P = tp/(tp+fp), R = tp/(tp+fn), A = (tp+tn)/N,
/// F1 = 2tp/(2tp+fp+fn), MCC = sign(num) * sqrt(num^2 / prod) with
/// num = tp*tn - fp*fn and prod the four marginal totals. Zero denominators give 0.
inline ExactMetrics exact_metrics(const trajmatch::ConfusionCounts& c) {
    using i128 = __int128;
    ExactMetrics m{};
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.recall = ratio(c.tp, c.tp + c.fn);
    m.accuracy = ratio(c.tp + c.tn, c.total());
    m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
    const i128 num = static_cast<i128>(c.tp) * c.tn - static_cast<i128>(c.fp) * c.fn;
    const i128 a = c.tp + c.fp, b = c.tp + c.fn, d = c.tn + c.fp, e = c.tn + c.fn;
    if (a == 0 || b == 0 || d == 0 || e == 0 || num == 0) {
        m.mcc = 0.0;
    } else {
        // For counts below 10^4 both num^2 and a*b*d*e fit the 64-bit long double
        // mantissa, so the quotient and the root are each rounded once.
        const long double sq = static_cast<long double>(num) * static_cast<long double>(num);
        const long double den = static_cast<long double>(a) * static_cast<long double>(b) *
                                static_cast<long double>(d) * static_cast<long double>(e);
        const double v = static_cast<double>(std::sqrt(sq / den));
        m.mcc = num > 0 ? v : -v;
    }
    return m;
}

}  // namespace oracle
