#include "rgbx/response.hpp"

#include <charconv>
#include <cmath>

#include <json.hpp>

#include "rgbx/errors.hpp"

namespace rgbx {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

int count_occurrences(std::string_view text, std::string_view needle) {
    int count = 0;
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string_view::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

// Shortest round-trip formatting; integers come out without a decimal point.
std::string format_number(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

} // namespace

ParsedResponse parse_response(const std::string& raw, int expected_n) {
    if (expected_n < 1) {
        throw ArgumentError("parse_response: expected_n must be >= 1");
    }
    ParsedResponse out;
    out.raw = raw;

    const std::string_view text{raw};
    const int n_think_open = count_occurrences(text, kThinkOpen);
    const int n_think_close = count_occurrences(text, kThinkClose);
    const int n_answer_open = count_occurrences(text, kAnswerOpen);
    const int n_answer_close = count_occurrences(text, kAnswerClose);

    bool delimiters_ok = n_think_open == 1 && n_think_close == 1 &&
                         n_answer_open == 1 && n_answer_close == 1;
    if (!delimiters_ok) {
        out.diagnostics = "delimiter counts: <think>=" + std::to_string(n_think_open) +
                          " </think>=" + std::to_string(n_think_close) +
                          " <answer>=" + std::to_string(n_answer_open) +
                          " </answer>=" + std::to_string(n_answer_close);
    }

    // Extract whatever spans are recoverable even when counts are off, so
    // downstream reward code can still see the boxes. Note </think> is a
    // substring match independent of <think> (the open tag is a prefix of
    // neither close tag), so first-occurrence positions are usable as-is.
    const std::size_t to = text.find(kThinkOpen);
    const std::size_t tc = text.find(kThinkClose);
    const std::size_t ao = text.find(kAnswerOpen);
    const std::size_t ac = text.find(kAnswerClose);

    const bool order_ok = to != std::string_view::npos && tc != std::string_view::npos &&
                          ao != std::string_view::npos && ac != std::string_view::npos &&
                          to < tc && tc < ao && ao < ac;
    if (delimiters_ok && !order_ok) {
        delimiters_ok = false;
        out.diagnostics = "delimiters out of order or overlapping";
    }

    if (to != std::string_view::npos && tc != std::string_view::npos && to < tc) {
        const std::size_t begin = to + kThinkOpen.size();
        out.think_text = std::string(text.substr(begin, tc - begin));
    }

    bool boxes_ok = false;
    if (ao != std::string_view::npos && ac != std::string_view::npos && ao < ac) {
        const std::size_t begin = ao + kAnswerOpen.size();
        const std::string payload{text.substr(begin, ac - begin)};
        const nlohmann::json parsed = nlohmann::json::parse(payload, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_array()) {
            if (out.diagnostics.empty()) out.diagnostics = "answer payload is not a numeric list";
        } else {
            boxes_ok = true;
            for (const auto& row : parsed) {
                if (!row.is_array() || row.size() != 4) {
                    boxes_ok = false;
                    break;
                }
                BBox b;
                double* coords[4] = {&b.x1, &b.y1, &b.x2, &b.y2};
                for (int i = 0; i < 4; ++i) {
                    if (!row[i].is_number()) {
                        boxes_ok = false;
                        break;
                    }
                    *coords[i] = row[i].get<double>();
                    if (!std::isfinite(*coords[i])) boxes_ok = false;
                }
                if (!boxes_ok) break;
                out.answer_boxes.push_back(b);
            }
            if (!boxes_ok) {
                out.answer_boxes.clear();
                if (out.diagnostics.empty()) out.diagnostics = "answer rows must be quadruples of finite numbers";
            }
        }
    }

    const bool dims_ok = boxes_ok && static_cast<int>(out.answer_boxes.size()) == expected_n;
    if (delimiters_ok && boxes_ok && !dims_ok && out.diagnostics.empty()) {
        out.diagnostics = "expected " + std::to_string(expected_n) + " boxes, got " +
                          std::to_string(out.answer_boxes.size());
    }

    out.well_formed = delimiters_ok && dims_ok;
    return out;
}

double format_reward(const ParsedResponse& p) {
    return p.well_formed ? 1.0 : 0.0;
}

std::string serialize_response(const std::string& think, const std::vector<BBox>& boxes) {
    if (boxes.empty()) {
        throw ArgumentError("serialize_response: box list must be non-empty");
    }
    std::string out;
    out += kThinkOpen;
    out += think;
    out += kThinkClose;
    out += " ";
    out += kAnswerOpen;
    out += "[";
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (i > 0) out += ", ";
        const BBox& b = boxes[i];
        out += "[" + format_number(b.x1) + ", " + format_number(b.y1) + ", " +
               format_number(b.x2) + ", " + format_number(b.y2) + "]";
    }
    out += "]";
    out += kAnswerClose;
    return out;
}

std::vector<BBox> answer_boxes_as(const ParsedResponse& p, BoxFormat format) {
    if (format == BoxFormat::Xyxy) {
        return p.answer_boxes;
    }
    std::vector<BBox> out;
    out.reserve(p.answer_boxes.size());
    for (const auto& q : p.answer_boxes) {
        out.push_back(bbox_from_quad({q.x1, q.y1, q.x2, q.y2}, format));
    }
    return out;
}

} // namespace rgbx
