#include "ovg/box.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "ovg/errors.hpp"

namespace ovg {

double BBox::area() const { return std::max(0.0, width()) * std::max(0.0, height()); }

bool BBox::valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
           x1 <= x2 && y1 <= y2;
}

bool NormBox::valid() const {
    auto unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    return unit(cx) && unit(cy) && unit(w) && unit(h) && w > 0.0 && h > 0.0;
}

std::ostream& operator<<(std::ostream& os, const BBox& b) {
    return os << "BBox(" << b.x1 << ", " << b.y1 << ", " << b.x2 << ", " << b.y2 << ")";
}

std::ostream& operator<<(std::ostream& os, const NormBox& b) {
    return os << "NormBox(" << b.cx << ", " << b.cy << ", " << b.w << ", " << b.h << ")";
}

namespace {

void check_dims(double w, double h) {
    if (!(w > 0.0) || !(h > 0.0) || !std::isfinite(w) || !std::isfinite(h)) {
        std::ostringstream msg;
        msg << "image dimensions must be positive, got " << w << "x" << h;
        throw DimensionError(msg.str());
    }
}

}  // namespace

NormBox bbox_to_norm(const BBox& b, double image_width, double image_height) {
    check_dims(image_width, image_height);
    if (!b.valid()) {
        std::ostringstream msg;
        msg << "invalid box " << b;
        throw InputError(msg.str());
    }
    return NormBox{(b.x1 + b.x2) / (2.0 * image_width), (b.y1 + b.y2) / (2.0 * image_height),
                   (b.x2 - b.x1) / image_width, (b.y2 - b.y1) / image_height};
}

BBox norm_to_bbox(const NormBox& n, double image_width, double image_height, bool clip) {
    check_dims(image_width, image_height);
    if (!(n.w > 0.0) || !(n.h > 0.0)) {
        std::ostringstream msg;
        msg << "degenerate normalized box " << n;
        throw DegenerateBoxError(msg.str());
    }
    BBox b{(n.cx - 0.5 * n.w) * image_width, (n.cy - 0.5 * n.h) * image_height,
           (n.cx + 0.5 * n.w) * image_width, (n.cy + 0.5 * n.h) * image_height};
    return clip ? clip_to_image(b, image_width, image_height) : b;
}

BBox clip_to_image(const BBox& b, double image_width, double image_height) {
    auto cx = [&](double v) { return std::clamp(v, 0.0, image_width); };
    auto cy = [&](double v) { return std::clamp(v, 0.0, image_height); };
    BBox out{cx(b.x1), cy(b.y1), cx(b.x2), cy(b.y2)};
    out.x2 = std::max(out.x1, out.x2);
    out.y2 = std::max(out.y1, out.y2);
    return out;
}

}  // namespace ovg
