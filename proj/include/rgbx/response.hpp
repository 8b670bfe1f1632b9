#pragma once

#include <string>
#include <vector>

#include "rgbx/geometry.hpp"
#include "rgbx/types.hpp"

namespace rgbx {

/// Result of parsing a model response of the form
/// `<think> ... </think> <answer>[[x1,y1,x2,y2], ...]</answer>`.
///
/// Malformation is data, not an exception: the parser never throws on
/// arbitrary input. `well_formed` is true only when both delimiter pairs
/// appear exactly once, in think-then-answer order, without overlap, and
/// the answer parses to an expected_n x 4 numeric list with finite values.
/// `answer_boxes` may still be populated when the dimensions do not match
/// (the boxes were extractable even though the response is malformed).
struct ParsedResponse {
    std::string think_text;
    std::vector<BBox> answer_boxes;
    std::string raw;
    bool well_formed = false;
    std::string diagnostics;
};

/// Parse an arbitrary byte string against the response grammar.
/// expected_n >= 1 is a caller contract (ArgumentError otherwise);
/// everything about `raw` itself is tolerated and reported through
/// the returned record.
ParsedResponse parse_response(const std::string& raw, int expected_n);

/// 1.0 iff the response is well formed, else 0.0.
double format_reward(const ParsedResponse& p);

/// Emit the canonical response text for a think string and box list.
/// parse_response on the output is well formed with equal content.
/// Throws ArgumentError on an empty box list.
std::string serialize_response(const std::string& think, const std::vector<BBox>& boxes);

/// Reinterpret parsed answer quadruples under the declared coordinate
/// order. Parsing keeps quadruples verbatim (corner-form fields), so this
/// is where an xywh manifest's answers become corner boxes.
std::vector<BBox> answer_boxes_as(const ParsedResponse& p, BoxFormat format);

} // namespace rgbx
