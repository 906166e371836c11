#pragma once

#include "trajmatch/raster.hpp"

namespace trajmatch {

/// Inclusive pixel box. Empty boxes carry no coordinates.
struct BoundingBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = -1;
    int y1 = -1;
    bool empty = true;

    int width() const { return empty ? 0 : x1 - x0 + 1; }
    int height() const { return empty ? 0 : y1 - y0 + 1; }
    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Tight box over all non-background pixels.
BoundingBox locate(const RgbImage& image);
inline BoundingBox locate(const LayerImage& image) { return locate(image.pixels); }

/// The box grown by `pad` on each side and clipped to the canvas. Throws
/// Error on an empty box or negative pad.
BoundingBox padded_box(const BoundingBox& box, int pad, int width, int height);

/// Copies the padded box region. Every colored pixel lies inside the box, so
/// the colored count is unchanged.
LayerImage crop(const LayerImage& image, const BoundingBox& box, int pad = 2);

}  // namespace trajmatch
