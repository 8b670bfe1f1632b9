#pragma once

#include <optional>

namespace rgbx {

/// Axis-aligned box in corner form, absolute pixel coordinates.
/// Valid boxes satisfy x1 <= x2, y1 <= y2, all coordinates finite and >= 0.
/// Zero-area boxes are valid; (0,0,0,0) doubles as the absence sentinel
/// used to claim that the target has left the frame.
struct BBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }

    bool valid() const;
    bool operator==(const BBox&) const = default;
};

/// The box predictions use to claim the target is out of frame.
inline constexpr BBox kAbsenceSentinel{0.0, 0.0, 0.0, 0.0};

inline bool is_absence_sentinel(const BBox& b) {
    return b.x1 == 0.0 && b.y1 == 0.0 && b.x2 == 0.0 && b.y2 == 0.0;
}

/// Convert an (x, y, w, h) quadruple to corner form.
BBox bbox_from_xywh(double x, double y, double w, double h);

/// Intersection over union of two valid boxes. Returns 0 when the union
/// has zero area (two degenerate boxes). Throws GeometryError on invalid
/// input.
double iou(const BBox& a, const BBox& b);

/// iou() that treats any invalid box as zero overlap instead of throwing.
/// Evaluation and reward paths use this so a malformed predicted box
/// scores 0 rather than aborting the batch.
double iou_or_zero(const BBox& a, const BBox& b);

/// Per-frame correctness value against an optional ground-truth slot.
/// Present slot: plain IoU. Absent slot (target out of frame): 1 when the
/// prediction is the absence sentinel, else 0.
double slot_iou(const BBox& pred, const std::optional<BBox>& gt);

} // namespace rgbx
