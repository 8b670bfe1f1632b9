#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rgbx/geometry.hpp"

namespace rgbx {

enum class Modality { Rgb, Thermal, Depth, Event };

/// The non-RGB modalities.
inline constexpr std::array<Modality, 3> kXModalities{
    Modality::Thermal, Modality::Depth, Modality::Event};

std::string to_string(Modality m);
std::optional<Modality> parse_modality(const std::string& name);

/// Coordinate order of box quadruples in files and response text.
enum class BoxFormat { Xyxy, Xywh };

std::string to_string(BoxFormat f);
std::optional<BoxFormat> parse_box_format(const std::string& name);

/// Interpret a raw quadruple according to the declared format.
BBox bbox_from_quad(const std::array<double, 4>& q, BoxFormat f);

struct RgbTemplate {
    std::string image;
    BBox box;
};

struct XTemplate {
    std::string image;
    Modality modality = Modality::Thermal;
};

struct SearchImage {
    std::string image;
    Modality modality = Modality::Rgb;
    int frame_index = 0;
};

/// One multi-image grounding sample: a query, an RGB+X template pair with
/// the target box, and N search images with per-image ground truth.
/// Ground-truth slots are empty when the target is out of frame.
struct MIGSample {
    std::string sample_id;
    std::string query;
    RgbTemplate template_rgb;
    XTemplate template_x;
    int template_frame_index = 0;
    std::vector<SearchImage> search_images;
    std::vector<std::optional<BBox>> ground_truth;
    std::string subset;
    std::string split = "train";
    bool modality_known = true;
    /// Coordinate order declared by the manifest the sample came from;
    /// response answers follow it. Internal boxes are always corner form.
    BoxFormat bbox_format = BoxFormat::Xyxy;

    int n() const { return static_cast<int>(search_images.size()); }

    /// Frame interval of each search image relative to the template keyframe.
    std::vector<int> frame_intervals() const;

    /// Throws StructuralError when the sample violates its invariants:
    /// N in {4,6}, one ground-truth slot per search image, RGB/X alternation
    /// in keyframe pairs, strictly increasing frame indices per stream.
    void validate() const;
};

/// Predicted boxes for one sample, positionally aligned with its
/// search images.
struct PredictionRecord {
    std::string sample_id;
    std::vector<BBox> boxes;
    std::optional<Modality> modality_guess;
    std::optional<std::string> think_text;
};

} // namespace rgbx
