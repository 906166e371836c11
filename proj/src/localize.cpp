#include "trajmatch/localize.hpp"

#include <algorithm>

#include "trajmatch/error.hpp"

namespace trajmatch {

BoundingBox locate(const RgbImage& image) {
    BoundingBox box;
    const auto& px = image.bytes();
    const int w = image.width();
    for (int y = 0; y < image.height(); ++y) {
        const std::uint8_t* row = px.data() + static_cast<std::size_t>(y) * w * 3;
        for (int x = 0; x < w; ++x) {
            const std::uint8_t* p = row + x * 3;
            if (p[0] == 255 && p[1] == 255 && p[2] == 255) continue;
            if (box.empty) {
                box = {x, y, x, y, false};
            } else {
                box.x0 = std::min(box.x0, x);
                box.x1 = std::max(box.x1, x);
                box.y1 = y;  // rows scanned in order
            }
        }
    }
    return box;
}

BoundingBox padded_box(const BoundingBox& box, int pad, int width, int height) {
    if (box.empty) throw Error("cannot crop to an empty bounding box");
    if (pad < 0) throw Error("crop padding must be non-negative");
    return {std::max(0, box.x0 - pad), std::max(0, box.y0 - pad), std::min(width - 1, box.x1 + pad),
            std::min(height - 1, box.y1 + pad), false};
}

LayerImage crop(const LayerImage& image, const BoundingBox& box, int pad) {
    const BoundingBox r = padded_box(box, pad, image.pixels.width(), image.pixels.height());
    LayerImage out = image;
    out.pixels = RgbImage(r.width(), r.height());
    for (int y = r.y0; y <= r.y1; ++y) {
        for (int x = r.x0; x <= r.x1; ++x) out.pixels.set(x - r.x0, y - r.y0, image.pixels.at(x, y));
    }
    out.colored_pixel_count = out.pixels.count_colored();
    return out;
}

}  // namespace trajmatch
