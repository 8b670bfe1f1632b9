#include "rgbx/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "rgbx/errors.hpp"

namespace rgbx {

bool BBox::valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && x1 >= 0.0 && y1 >= 0.0 && x1 <= x2 && y1 <= y2;
}

BBox bbox_from_xywh(double x, double y, double w, double h) {
    return BBox{x, y, x + w, y + h};
}

double iou(const BBox& a, const BBox& b) {
    if (!a.valid() || !b.valid()) {
        throw GeometryError("iou: malformed box (corners reversed, negative or non-finite)");
    }
    const double ix1 = std::max(a.x1, b.x1);
    const double iy1 = std::max(a.y1, b.y1);
    const double ix2 = std::min(a.x2, b.x2);
    const double iy2 = std::min(a.y2, b.y2);
    const double iw = std::max(0.0, ix2 - ix1);
    const double ih = std::max(0.0, iy2 - iy1);
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) {
        return 0.0;
    }
    return inter / uni;
}

double iou_or_zero(const BBox& a, const BBox& b) {
    if (!a.valid() || !b.valid()) {
        return 0.0;
    }
    return iou(a, b);
}

double slot_iou(const BBox& pred, const std::optional<BBox>& gt) {
    if (!gt.has_value()) {
        return is_absence_sentinel(pred) ? 1.0 : 0.0;
    }
    return iou_or_zero(pred, *gt);
}

} // namespace rgbx
