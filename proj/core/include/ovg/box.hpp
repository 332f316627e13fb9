#pragma once

#include <array>
#include <iosfwd>

namespace ovg {

/// Axis-aligned box in pixel corner form (top-left, bottom-right).
struct BBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const;

    /// x1 <= x2, y1 <= y2 and every coordinate finite.
    bool valid() const;

    std::array<double, 4> as_array() const { return {x1, y1, x2, y2}; }

    bool operator==(const BBox&) const = default;
};

/// Normalized center-size box; all fields are fractions of the image extent.
struct NormBox {
    double cx = 0.5;
    double cy = 0.5;
    double w = 1.0;
    double h = 1.0;

    /// Every field in [0, 1] with w, h > 0.
    bool valid() const;

    bool operator==(const NormBox&) const = default;
};

std::ostream& operator<<(std::ostream& os, const BBox& b);
std::ostream& operator<<(std::ostream& os, const NormBox& b);

/// Throws DimensionError for non-positive image sizes and InputError for an
/// invalid box.
NormBox bbox_to_norm(const BBox& b, double image_width, double image_height);

/// Throws DegenerateBoxError if the normalized box has zero width or height.
/// With `clip` the result is clamped to [0, w] x [0, h].
BBox norm_to_bbox(const NormBox& n, double image_width, double image_height, bool clip = false);

/// Clamp a box to the image rectangle; keeps x1 <= x2 after clamping.
BBox clip_to_image(const BBox& b, double image_width, double image_height);

}  // namespace ovg
