#include "rgbx/types.hpp"

#include "rgbx/errors.hpp"

namespace rgbx {

std::string to_string(Modality m) {
    switch (m) {
        case Modality::Rgb: return "rgb";
        case Modality::Thermal: return "thermal";
        case Modality::Depth: return "depth";
        case Modality::Event: return "event";
    }
    return "rgb";
}

std::optional<Modality> parse_modality(const std::string& name) {
    if (name == "rgb") return Modality::Rgb;
    if (name == "thermal") return Modality::Thermal;
    if (name == "depth") return Modality::Depth;
    if (name == "event") return Modality::Event;
    return std::nullopt;
}

std::string to_string(BoxFormat f) {
    return f == BoxFormat::Xyxy ? "xyxy" : "xywh";
}

std::optional<BoxFormat> parse_box_format(const std::string& name) {
    if (name == "xyxy") return BoxFormat::Xyxy;
    if (name == "xywh") return BoxFormat::Xywh;
    return std::nullopt;
}

BBox bbox_from_quad(const std::array<double, 4>& q, BoxFormat f) {
    if (f == BoxFormat::Xywh) {
        return bbox_from_xywh(q[0], q[1], q[2], q[3]);
    }
    return BBox{q[0], q[1], q[2], q[3]};
}

std::vector<int> MIGSample::frame_intervals() const {
    std::vector<int> out;
    out.reserve(search_images.size());
    for (const auto& s : search_images) {
        out.push_back(s.frame_index - template_frame_index);
    }
    return out;
}

void MIGSample::validate() const {
    const int count = n();
    if (count != 4 && count != 6) {
        throw StructuralError("sample " + sample_id + ": N must be 4 or 6, got " +
                              std::to_string(count));
    }
    if (ground_truth.size() != search_images.size()) {
        throw StructuralError("sample " + sample_id +
                              ": ground-truth slot count does not match search images");
    }
    if (!template_rgb.box.valid()) {
        throw StructuralError("sample " + sample_id + ": invalid template box");
    }
    if (template_x.modality == Modality::Rgb) {
        throw StructuralError("sample " + sample_id + ": X template must be a non-RGB modality");
    }
    int prev_pair_frame = template_frame_index;
    for (int i = 0; i < count; i += 2) {
        const auto& rgb = search_images[i];
        const auto& x = search_images[i + 1];
        if (rgb.modality != Modality::Rgb || x.modality != template_x.modality) {
            throw StructuralError("sample " + sample_id +
                                  ": search images must alternate RGB/X in keyframe pairs");
        }
        if (rgb.frame_index != x.frame_index) {
            throw StructuralError("sample " + sample_id +
                                  ": keyframe pair images must share a frame index");
        }
        if (rgb.frame_index <= prev_pair_frame) {
            throw StructuralError("sample " + sample_id +
                                  ": frame indices must be strictly increasing");
        }
        prev_pair_frame = rgb.frame_index;
    }
    for (const auto& slot : ground_truth) {
        if (slot.has_value() && !slot->valid()) {
            throw StructuralError("sample " + sample_id + ": invalid ground-truth box");
        }
    }
}

} // namespace rgbx
